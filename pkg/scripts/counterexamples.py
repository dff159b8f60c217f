"""Spectra of the two dyadic-block counterexamples for several window lengths.

Windows of length M/2 average over many blocks of the second sequence, so
its spectrum [1/2, 1] only shows up for windows short enough to fit
inside a single block.
"""
from angulus import catalog_get, compute_spectrum
from _common import parser

if __name__ == "__main__":
    p = parser(__doc__, m=4000)
    p.add_argument("--windows", type=int, nargs="+", default=[250, 500, 1000, 2000])
    p.add_argument("--phi0", type=float, default=0.2)
    p.add_argument("--phi1", type=float, default=0.8)
    args = p.parse_args()
    models = [("counterexample1", {"phi0": args.phi0, "phi1": args.phi1}),
              ("counterexample2", None)]
    for name, params in models:
        model = catalog_get(name, params)
        a = model.matrices(0, args.m)
        for h in args.windows:
            rep = compute_spectrum(model, args.m, h, matrices=a)
            ivs = ", ".join(f"[{iv.lower:.4f}, {iv.upper:.4f}] (dim {iv.bundle_dim})"
                            for iv in rep.intervals)
            print(f"{name:16s} M={args.m} H={h:5d}: {ivs}")
