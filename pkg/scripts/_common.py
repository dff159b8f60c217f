"""Shared helpers for the experiment scripts."""
import argparse
import json
import time

from angulus import catalog_get, run
from angulus.angular import theta1_hat, theta2_hat
from angulus.pipeline import PipelineSettings


def parser(description, m=2000):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("-M", dest="m", type=int, default=m)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print JSON rows instead of a table")
    return p


def evaluate(name, params=None, *, m=2000, seed=0, s2=True):
    """Spectrum and both estimators for one model; returns a flat dict."""
    t0 = time.perf_counter()
    res = run(catalog_get(name, params, seed), PipelineSettings(m=m, seed=seed))
    r1 = theta1_hat(res.bundles)
    row = {
        "model": name,
        "params": params or {},
        "intervals": [[iv.lower, iv.upper, iv.bundle_dim] for iv in res.spectrum.intervals],
        "theta1": {c.label: c.value for c in r1.candidates},
        "theta1_hat": r1.theta_hat,
    }
    if s2 and res.model.dim > 1 and max(res.spectrum.dims) <= 2:
        r2 = theta2_hat(res.bundles)
        row["theta2"] = {c.label: c.value for c in r2.candidates}
        row["theta2_hat"] = r2.theta_hat
    row["seconds"] = round(time.perf_counter() - t0, 2)
    return row


def report(rows, as_json=False):
    if as_json:
        print(json.dumps(rows, indent=2))
        return
    for row in rows:
        head = row["model"] + "".join(f" {k}={v:g}" for k, v in row["params"].items())
        print(head)
        for lo, hi, dim in row["intervals"]:
            print(f"    interval [{lo:.6f}, {hi:.6f}]  dim {dim}")
        for key in ("theta1", "theta2"):
            if key in row:
                vals = ", ".join(f"{k} = {v:.6f}" for k, v in row[key].items())
                print(f"    {key}: {vals}  ->  max {row[key + '_hat']:.6f}")
        print(f"    ({row['seconds']} s)")
