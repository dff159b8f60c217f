"""Coupled oscillators: how the coupling strength orders the first two angular values."""
from _common import evaluate, parser, report

if __name__ == "__main__":
    p = parser(__doc__, m=1000)
    p.add_argument("--lam", type=float, nargs="+", default=[0.0, 0.05, 0.2, 0.5])
    args = p.parse_args()
    rows = [evaluate("oscillators", {"lambda": lam}, m=args.m, seed=args.seed)
            for lam in args.lam]
    report(rows, args.json)
    if not args.json:
        for r in rows:
            a, b = r["theta1_hat"], r["theta2_hat"]
            rel = "=" if abs(a - b) <= 1e-3 else ("<" if a < b else ">")
            print(f"lambda = {r['params']['lambda']:g}: theta1 {a:.4f} {rel} theta2 {b:.4f}")
