"""Spectral intervals and first angular values of the 2-D and 4-D test models."""
from _common import evaluate, parser, report

MODELS = ["diag23", "reflection", "rotated_diag", "rotation", "normal_form", "block4"]

if __name__ == "__main__":
    args = parser(__doc__).parse_args()
    report([evaluate(name, m=args.m, seed=args.seed) for name in MODELS], args.json)
