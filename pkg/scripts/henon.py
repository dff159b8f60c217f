"""Variational equations along Henon orbits in two and three dimensions."""
from _common import evaluate, parser, report

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    report([evaluate(name, m=args.m, seed=args.seed) for name in ("henon2", "henon3")], args.json)
