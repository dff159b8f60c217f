"""Parameter-dependent 3-D model: angular values as the middle rate p varies."""
from _common import evaluate, parser, report

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--p", type=float, nargs="+", default=[0.5, 2.0])
    args = p.parse_args()
    report([evaluate("param3d", {"p": v}, m=args.m, seed=args.seed) for v in args.p], args.json)
