"""theta1_hat(n) of the rotated diagonal model for horizons 10^2 .. 10^4 at k = 50.

Writes ``n, theta_hat, error`` rows as CSV, ready for a log-log plot.
"""
import argparse
import csv
import sys

import numpy as np

from angulus import catalog_get, run
from angulus.angular import theta1_sweep
from angulus.pipeline import PipelineSettings

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=21, help="horizons, log-spaced")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("-o", "--output", help="CSV file (stdout by default)")
    args = p.parse_args()
    horizons = np.unique(np.round(np.logspace(2, 4, args.points)).astype(int))
    res = run(catalog_get("rotated_diag"), PipelineSettings(m=args.k + horizons.max() + 50))
    rows = theta1_sweep(res.bundles, horizons, k=args.k)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "theta_hat", "error"])
    for n, val in rows:
        w.writerow([n, format(val, ".17g"), format(abs(val - 1 / 3), ".3e")])
    if args.output:
        out.close()
