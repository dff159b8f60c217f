"""Random 3-D system over several seeds; the analytic values are sqrt(15), sqrt(2) and 0.1."""
import statistics

from _common import evaluate, parser, report

if __name__ == "__main__":
    p = parser(__doc__)
    p.add_argument("--seeds", type=int, default=5)
    args = p.parse_args()
    rows = [evaluate("random3d", m=args.m, seed=s) for s in range(args.seeds)]
    report(rows, args.json)
    if not args.json:
        t1 = [r["theta1_hat"] for r in rows]
        print(f"theta1_hat over seeds: mean {statistics.mean(t1):.6f}, "
              f"min {min(t1):.6f}, max {max(t1):.6f}")
