"""Command-line front end: ``angulus {spectrum,bundles,angular,models-list}``.

Settings come from three layers, later ones winning: built-in defaults,
a ``key=value`` config file (``--config``), and command-line flags.  The
seed falls back to the ``ANGULUS_SEED`` environment variable.

Exit codes: 0 success, 2 bad model or configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass, field, fields

from .angular import theta1_hat, theta1_sweep, theta2_hat
from .bundles import GAP, SUBINTERVAL, compute_bundles, write_fiber_csv
from .errors import AngulusError, ConfigError, ModelError, NumericalError
from .models import CATALOG, _REQUIRED, catalog_get
from .spectrum import MERGE_GAP, compute_spectrum

EXIT_MODEL = 2
EXIT_NUMERICAL = 3
SEED_ENV = "ANGULUS_SEED"
MODEL_PARAM_FLAGS = ("phi", "p", "lambda", "eta", "rho")
DEFAULT_SWEEP = (100, 200, 500, 1000, 2000, 5000, 10000)


@dataclass
class RunConfig:
    model: str = ""
    params: dict = field(default_factory=dict)
    seed: int = 0
    m: int = 2000
    window: int | None = None         # H; None means M // 2
    gap: int = GAP
    subinterval: int | None = SUBINTERVAL
    merge_threshold: float = MERGE_GAP
    initial_frame: str = "generic"
    k: int | None = None              # None means gap
    n: int | None = None              # None means M - 100 (or up to the last fiber)
    s: int = 1
    fmt: str = "json"
    output: str | None = None
    threads: int | None = None
    sweep: tuple[int, ...] | None = None

    @property
    def window_or_default(self) -> int:
        return self.m // 2 if self.window is None else self.window

    @property
    def k_or_default(self) -> int:
        return self.gap if self.k is None else self.k

    @property
    def n_or_default(self) -> int:
        if self.n is not None:
            return self.n
        return min(self.m - 100, self.m - self.gap - self.k_or_default)

    def validate(self) -> "RunConfig":
        if self.m < 2 * self.gap + 100:
            raise ConfigError(f"M = {self.m} must be at least 2 * gap + 100 = {2 * self.gap + 100}")
        k, n = self.k_or_default, self.n_or_default
        if not self.gap <= k <= self.m - self.gap:
            raise ConfigError(f"k = {k} outside [gap, M - gap] = [{self.gap}, {self.m - self.gap}]")
        if n < 1 or k + n > self.m - self.gap:
            raise ConfigError(f"k + n = {k + n} exceeds M - gap = {self.m - self.gap}")
        if self.s not in (1, 2):
            raise ConfigError("s must be 1 or 2")
        if self.initial_frame not in ("generic", "identity"):
            raise ConfigError("initial frame must be generic or identity")
        if self.fmt not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        if self.window is not None and not 1 <= self.window <= self.m - 1:
            raise ConfigError(f"H = {self.window} must lie in [1, M - 1]")
        return self


# ---------------------------------------------------------------------------
# configuration layers
# ---------------------------------------------------------------------------

_ALIASES = {"M": "m", "H": "window", "format": "fmt"}
_INT_KEYS = {"seed", "m", "window", "gap", "subinterval", "k", "n", "s", "threads"}
_FLOAT_KEYS = {"merge_threshold"}


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "sweep":
            return _parse_sweep(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def _parse_sweep(value):
    if isinstance(value, (tuple, list)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if text in ("", "default"):
        return DEFAULT_SWEEP
    return tuple(int(v) for v in text.split(","))


def _parse_param(item: str):
    if "=" not in item:
        raise ConfigError(f"expected key=value, got {item!r}")
    key, value = item.split("=", 1)
    try:
        return key.strip(), float(value)
    except ValueError as exc:
        raise ConfigError(f"parameter {key!r} is not a number: {value!r}") from exc


def read_config_file(path: str) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Keys naming a :class:`RunConfig` field set that field; ``param.NAME``
    or any other key sets a model parameter.
    """
    known = {f.name for f in fields(RunConfig)} - {"params"}
    out: dict = {"params": {}}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key.startswith("param."):
            out["params"].update([_parse_param(f"{key[6:]}={value}")])
        elif key in known:
            out[key] = _coerce(key, value)
        else:
            out["params"].update([_parse_param(f"{key}={value}")])
    return out


def build_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge defaults, config file and flags (in that order of precedence)."""
    values = asdict(RunConfig())
    env_seed = environ.get(SEED_ENV)
    if env_seed is not None:
        values["seed"] = _coerce("seed", env_seed)
    if getattr(args, "config", None):
        from_file = read_config_file(args.config)
        values["params"].update(from_file.pop("params"))
        values.update(from_file)
    for f in fields(RunConfig):
        if f.name == "params":
            continue
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _coerce(f.name, flag)
    for item in getattr(args, "param", None) or []:
        values["params"].update([_parse_param(item)])
    for name in MODEL_PARAM_FLAGS:
        flag = getattr(args, f"model_{name}", None)
        if flag is not None:
            values["params"][name] = flag
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write(cfg: RunConfig, text: str):
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _model(cfg: RunConfig):
    if not cfg.model:
        raise ConfigError("--model is required")
    return catalog_get(cfg.model, cfg.params, cfg.seed)


def _spectrum(cfg: RunConfig, model, matrices):
    frame = None if cfg.initial_frame == "identity" else "generic"
    return compute_spectrum(model, cfg.m, cfg.window_or_default, cfg.merge_threshold,
                            matrices=matrices, initial_frame=frame)


def _bundles(cfg: RunConfig, model, matrices, spec):
    return compute_bundles(model, spec, cfg.m, gap=cfg.gap, subinterval=cfg.subinterval or None,
                           seed=cfg.seed, matrices=matrices, workers=_workers(cfg))


def _workers(cfg: RunConfig) -> int:
    return cfg.threads if cfg.threads else (os.cpu_count() or 1)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_spectrum(cfg: RunConfig) -> int:
    model = _model(cfg)
    a = model.matrices(0, cfg.m)
    spec = _spectrum(cfg, model, a)
    if cfg.fmt == "json":
        _write(cfg, _dump_json({"model": model.name, "params": model.params, "M": cfg.m,
                                "H": cfg.window_or_default, "intervals": spec.to_records()}))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lower", "upper", "dim"])
        for r in spec.to_records():
            w.writerow([_fmt(r["lower"]), _fmt(r["upper"]), r["dim"]])
        _write(cfg, buf.getvalue())
    return 0


def cmd_bundles(cfg: RunConfig) -> int:
    model = _model(cfg)
    a = model.matrices(0, cfg.m)
    spec = _spectrum(cfg, model, a)
    bundles = _bundles(cfg, model, a, spec)
    if cfg.fmt == "csv":
        buf = io.StringIO()
        write_fiber_csv(bundles, buf)
        _write(cfg, buf.getvalue())
    else:
        _write(cfg, _dump_json({
            "model": model.name, "params": model.params, "intervals": spec.to_records(),
            "k_min": bundles.k_min, "k_max": bundles.k_max,
            "fibers": [{"i": f.interval_index, "dim": f.dim,
                        "bases": f.bases.tolist()} for f in bundles.fibers],
        }))
    return 0


def cmd_angular(cfg: RunConfig) -> int:
    if cfg.sweep:
        need = cfg.k_or_default + max(cfg.sweep) + cfg.gap
        if need > cfg.m:
            cfg.m = need
    model = _model(cfg)
    a = model.matrices(0, cfg.m)
    spec = _spectrum(cfg, model, a)
    bundles = _bundles(cfg, model, a, spec)
    k = cfg.k_or_default
    if cfg.sweep:
        rows = theta1_sweep(bundles, cfg.sweep, k, workers=_workers(cfg))
        if cfg.fmt == "json":
            _write(cfg, _dump_json({"model": model.name, "k": k, "M": cfg.m,
                                    "sweep": [{"n": n, "theta_hat": v} for n, v in rows]}))
        else:
            _write(cfg, "n,theta_hat\n" + "".join(f"{n},{_fmt(v)}\n" for n, v in rows))
        return 0
    estimator = theta1_hat if cfg.s == 1 else theta2_hat
    report = estimator(bundles, k, cfg.n_or_default, workers=_workers(cfg))
    if cfg.fmt == "json":
        _write(cfg, _dump_json(report.to_dict()))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["label", "value", "params"])
        for c in report.candidates:
            params = ";".join(f"{key}={_fmt(v)}" for key, v in sorted(c.params.items()))
            w.writerow([c.label, _fmt(c.value), params])
        _write(cfg, buf.getvalue())
    return 0


def cmd_models_list(fmt: str = "text", out=None) -> int:
    out = out or sys.stdout
    rows = []
    for name, entry in CATALOG.items():
        params = {k: (None if v is _REQUIRED else v) for k, v in entry.defaults.items()}
        rows.append({"name": name, "params": params, "description": entry.description})
    if fmt == "json":
        out.write(_dump_json(rows))
        return 0
    for r in rows:
        params = ", ".join(f"{k}={'<required>' if v is None else repr(v)}"
                           for k, v in r["params"].items())
        out.write(f"{r['name']:<16} {r['description']}" + (f"  [{params}]" if params else "")
                  + "\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--model", help="catalog model name (see models-list)")
    g.add_argument("-P", "--param", action="append", metavar="KEY=VALUE",
                   help="model parameter; may be repeated")
    for name in MODEL_PARAM_FLAGS:
        g.add_argument(f"--{name}", dest=f"model_{name}", type=float, metavar="X",
                       help=f"shorthand for -P {name}=X")
    g.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV}, then 0)")
    r = p.add_argument_group("run")
    r.add_argument("-M", dest="m", type=int, help="number of matrices A_0 .. A_{M-1} (2000)")
    r.add_argument("-H", dest="window", type=int, help="Bohl window length (M/2)")
    r.add_argument("--merge-threshold", dest="merge_threshold", type=float,
                   help="join intervals closer than this (0.1)")
    r.add_argument("--initial-frame", dest="initial_frame", choices=("generic", "identity"),
                   help="starting frame of the QR iteration (generic)")
    r.add_argument("--gap", type=int, help="distance of base times to the ends (50)")
    r.add_argument("--subinterval", type=int, help="least-squares window length (200)")
    r.add_argument("--config", help="key=value settings file")
    r.add_argument("--threads", type=int, help="worker threads (all cores)")
    o = p.add_argument_group("output")
    o.add_argument("--format", dest="fmt", choices=("json", "csv"))
    o.add_argument("-o", "--output", help="write to this file instead of stdout")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="angulus",
        description="Dichotomy spectra, spectral bundles and outer angular values "
                    "of linear difference equations u_{n+1} = A_n u_n.")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("spectrum", help="spectral intervals from Bohl exponents"))
    _common(sub.add_parser("bundles", help="fiber bases for every base time"))
    ang = sub.add_parser("angular", help="outer angular values theta_1 / theta_2")
    _common(ang)
    a = ang.add_argument_group("angular")
    a.add_argument("-k", type=int, help="base time (gap)")
    a.add_argument("-n", type=int, help="horizon (M - 100)")
    a.add_argument("-s", type=int, choices=(1, 2), help="dimension of the subspaces (1)")
    a.add_argument("--sweep", nargs="?", const="default", metavar="N1,N2,...",
                   help="theta_1 for several horizons instead of one report")
    ml = sub.add_parser("models-list", help="list catalog models")
    ml.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "models-list":
            return cmd_models_list(args.fmt)
        cfg = build_config(args)
        return {"spectrum": cmd_spectrum, "bundles": cmd_bundles,
                "angular": cmd_angular}[args.command](cfg)
    except ModelError as exc:
        print(f"angulus: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ConfigError as exc:
        print(f"angulus: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NumericalError as exc:
        print(f"angulus: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except AngulusError as exc:
        print(f"angulus: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
