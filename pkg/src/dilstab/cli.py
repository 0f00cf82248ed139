"""Command-line front end: simulate | moments | estimate | verify | discriminate.

Exit codes: 0 success or pass, 1 runtime or check failure, 2 usage or
validation error.  Settings come from defaults, then ``--config`` (a JSON
object keyed by option name), then explicit flags.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import partitions as pc
from . import verify as vf
from .io import dump_json, jsonable, read_path_csv, write_path_csv
from .model import CumulantVector, DilativeParams, ProcessSpec, SamplePath, SamplingMismatch
from .pathstats import (BracketFailure, DichotomyRule, default_kappa_grid, design_times,
                        estimate_alpha, estimate_holder_exponent)
from .simulate import GenerationError, SimGrid, parse_levy, sample_paths

OUT_ENV = "DILSTAB_OUT"
DEFAULT_LEVY = "cpois:rate=5,jumps=cexp:mu=1"
CHECKS = ("start_at_zero", "covariance", "cumulant_scaling", "stationary_increments", "kolmogorov")
# settings that must not change results, so they stay out of the echoed config
NOT_ECHOED = {"config", "out", "workers", "no_timestamp", "func", "command"}


class UsageError(Exception):
    """Bad input detected after argument parsing (exit code 2)."""


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for item in str(text).split(","):
        a, sep, b = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"probe pairs look like t1:t2,... (got {item!r})")
        out.append((float(a), float(b)))
    return out


def _cumulants(text: str) -> dict[int, float]:
    out = {}
    for item in str(text).split(","):
        n, sep, v = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"cumulants look like 2:1,4:0.5 (got {item!r})")
        out[int(n)] = float(v)
    return out


# -- parser ----------------------------------------------------------------


def _global_options() -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--config", help="JSON file of option defaults; explicit flags win")
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./dilstab_out)")
    g.add_argument("--format", choices=("csv", "json"), default="json")
    g.add_argument("--no-timestamp", action="store_true", help="omit the timestamp from reports")
    g.add_argument("--workers", type=int, default=1, help="threads for path simulation")
    return g


def _process_options(p: argparse.ArgumentParser, default: str = "fbm") -> None:
    p.add_argument("--process", choices=("fbm", "flp", "power", "identity", "zero"), default=default)
    p.add_argument("--hurst", type=float, default=0.7)
    p.add_argument("--var1", type=float, default=1.0, help="FBM variance at t=1")
    p.add_argument("--levy", default=DEFAULT_LEVY, help="FLP driver, e.g. " + DEFAULT_LEVY)
    p.add_argument("--beta", type=float, help="exponent of the power path (default: --hurst)")
    p.add_argument("--window", type=float, help="FLP truncation window (default 1e9*T)")


def _grid_options(p: argparse.ArgumentParser, steps: int, horizon: float = 1.0) -> None:
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--horizon", type=float, default=horizon)


def _geometry_options(p: argparse.ArgumentParser, anchors: int | None = None) -> None:
    p.add_argument("--geom-ratio", type=float, default=0.7)
    p.add_argument("--geom-anchors", type=int, default=anchors,
                   help="anchors in the fan (default: 64 for random paths, 1 for deterministic ones)")
    p.add_argument("--geom-span", type=float, default=0.3, help="anchors cover [0, span*T)")
    p.add_argument("--rule-window", type=int, default=DichotomyRule().window)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dilstab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dilstab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[_global_options()], help="simulate paths and write CSV")
    _process_options(s)
    _grid_options(s, 4096)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--geometric", action="store_true", help="add the exact geometric design points")
    s.add_argument("--geometric-only", action="store_true", help="only 0 and the geometric points")
    _geometry_options(s)
    s.set_defaults(func=cmd_simulate, format="csv")

    m = sub.add_parser("moments", parents=[_global_options()], help="scaled increment moments and Kolmogorov bounds")
    m.add_argument("--process", choices=("fbm", "flp"), help="take H, delta and cumulants from a process")
    m.add_argument("--hurst", type=float, default=0.75)
    m.add_argument("--delta", type=float, default=1.0)
    m.add_argument("--cumulants", type=_cumulants, default={2: 1.0}, help="e.g. 2:1,4:0.5")
    m.add_argument("--var1", type=float, default=1.0)
    m.add_argument("--levy", default=DEFAULT_LEVY)
    m.add_argument("--p", type=_ints, default=[2, 4])
    m.add_argument("--h", type=_floats, default=[0.25, 0.5, 1.0])
    m.set_defaults(func=cmd_moments)

    e = sub.add_parser("estimate", parents=[_global_options()], help="alpha and Holder exponent estimates")
    e.add_argument("--input", nargs="+", help="CSV path files (default: simulate inline)")
    _process_options(e)
    _grid_options(e, 2**14)
    _geometry_options(e)
    e.add_argument("--paths", type=int, default=1)
    e.add_argument("--method", choices=("alpha", "holder", "both"), default="both")
    e.add_argument("--kappa-step", type=float, default=0.05)
    e.add_argument("--quantile", type=float, default=0.9, help="Holder estimator quantile (1 = max)")
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", parents=[_global_options()], help="run named checks")
    v.add_argument("--checks", default="start_at_zero,covariance", help=",".join(CHECKS))
    _process_options(v)
    _grid_options(v, 256)
    v.add_argument("--paths", type=int, default=2000)
    v.add_argument("--tolerance-sigmas", type=float, default=4.0)
    v.add_argument("--p", type=int, default=4)
    v.add_argument("--lags", type=_floats, default=[0.125, 0.25])
    v.add_argument("--anchors", type=_floats, default=[0.0, 0.25, 0.5])
    v.add_argument("--probe-pairs", type=_pairs, default=[(0.25, 0.5), (0.5, 1.0), (1.0, 1.0)])
    v.add_argument("--orders", type=_ints, default=[2, 4])
    v.add_argument("--times", type=_floats, default=[0.25, 0.5, 1.0])
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("discriminate", parents=[_global_options()], help="two-hypothesis discrimination experiment")
    d.add_argument("--family", choices=("fbm", "flp", "power"), default="fbm")
    d.add_argument("--h1", type=float, default=0.6)
    d.add_argument("--h2", type=float, default=0.8)
    d.add_argument("--levy", default=DEFAULT_LEVY)
    d.add_argument("--window", type=float)
    d.add_argument("--paths", type=int, default=200, help="paths per hypothesis")
    _grid_options(d, 2**14)
    _geometry_options(d)
    d.add_argument("--floor", type=float, default=0.9)
    d.add_argument("--max-undecided", type=float, default=0.2)
    d.add_argument("--null-control", action="store_true")
    d.set_defaults(func=cmd_discriminate)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        known = set(vars(args)) - {"func", "command", "config"}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # re-parse with the config as defaults so explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: _coerce(sub, k, v) for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def _coerce(sub: argparse.ArgumentParser, key: str, value):
    """Run config values through the option's type so "0.1,0.2" and [0.1, 0.2] agree."""
    action = next((a for a in sub._actions if a.dest == key), None)
    if action is None or action.type is None:
        return value
    if isinstance(value, list):
        value = ",".join(str(x) for x in value)
    return action.type(value) if isinstance(value, str) else value


# -- helpers ---------------------------------------------------------------


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or "dilstab_out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _spec(args) -> ProcessSpec:
    if args.process == "fbm":
        return ProcessSpec.fbm(args.hurst, args.var1)
    if args.process == "flp":
        return ProcessSpec.flp(args.hurst, parse_levy(args.levy))
    beta = args.beta if args.beta is not None else args.hurst
    return ProcessSpec.deterministic(args.process, beta)


def _validate_process(args) -> None:
    """Collect every parameter violation before anything is simulated."""
    bad = []
    if args.process in ("fbm", "flp"):
        bad = DilativeParams(args.hurst, 1.0 if args.process == "flp" else 0.0, True).violations()
        if args.process == "fbm" and not 0 < args.hurst < 1:
            bad.insert(0, f"H in (0,1) required for FBM (got {args.hurst:g})")
        if args.process == "flp" and not 0.5 < args.hurst < 1:
            bad.append(f"H in (1/2,1) required for FLP (got {args.hurst:g})")
    if bad:
        raise UsageError("invalid parameters: " + "; ".join(bad))


def _design(args, family: str, horizon: float, steps: int):
    anchors = args.geom_anchors
    if anchors is None:
        anchors = 1 if family in ("power", "identity", "zero") else 64
    fam = "power" if anchors == 1 else family
    return vf.default_design(fam, ratio=args.geom_ratio, steps=steps, horizon=horizon,
                             anchors=anchors, span=args.geom_span)


def _flp_opts(args) -> dict:
    return {"window": args.window} if getattr(args, "process", None) == "flp" and args.window else {}


def _report(args, results) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in NOT_ECHOED}
    doc = {"tool_version": __version__, "seed": args.seed, "command": args.command,
           "config_echo": jsonable(echo), "results": jsonable(results)}
    if not args.no_timestamp:
        doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return doc


def _write_report(args, doc, name: str) -> Path:
    dest = _out_dir(args) / f"{name}.json"
    dump_json(doc, dest)
    return dest


# -- commands --------------------------------------------------------------


def cmd_simulate(args) -> int:
    _validate_process(args)
    if args.paths < 1:
        raise UsageError("--paths must be >= 1")
    spec = _spec(args)
    extra = ()
    if args.geometric or args.geometric_only:
        extra = tuple(design_times(_design(args, args.process, args.horizon, args.steps)))
    grid = SimGrid(args.horizon, args.steps, args.seed, extra, include_uniform=not args.geometric_only)
    X = sample_paths(spec, grid, args.paths, workers=args.workers, **_flp_opts(args))
    out = _out_dir(args)
    if args.format == "csv":
        files = []
        for i, x in enumerate(X):
            f = out / f"path_{i:04d}.csv"
            write_path_csv(SamplePath(grid.times, x), f)
            files.append(str(f))
    else:
        doc = _report(args, [{"index": i, "t": grid.times, "x": x} for i, x in enumerate(X)])
        files = [str(_write_report(args, doc, "simulate"))]
    print(f"n={args.steps} T={args.horizon:g} seed={args.seed} paths={args.paths} points={grid.times.size}")
    for f in files:
        print(f)
    return 0


def cmd_moments(args) -> int:
    if args.process == "fbm":
        spec = ProcessSpec.fbm(args.hurst, args.var1)
        params, c = spec.params, spec.cumulants
    elif args.process == "flp":
        spec = ProcessSpec.flp(args.hurst, parse_levy(args.levy))
        params, c = spec.params, spec.cumulants
    else:
        params = DilativeParams(args.hurst, args.delta, True)
        bad = params.violations()
        if bad:
            raise UsageError("invalid parameters: " + "; ".join(bad))
        c = CumulantVector.from_orders(args.cumulants, p_max=max(8, max(args.p), max(args.cumulants)))
    odd = [p for p in args.p if p % 2]
    if odd:
        raise UsageError(f"only even p are supported (got {odd})")
    if any(not 0 < h for h in args.h):
        raise UsageError("lags h must be positive")
    rows = []
    for p in args.p:
        for h in args.h:
            rows.append({"p": p, "h": h,
                         "moment": pc.scaled_increment_moment(params, c, p, h),
                         "bound": pc.kolmogorov_bound(params, c, p, h),
                         "moment_at_1": pc.moment_from_cumulants(c, p)})
    summary = {"min_even_order": pc.min_even_order(params)}
    if args.format == "csv":
        dest = _out_dir(args) / "moments.csv"
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write("p,h,moment,bound\n")
            for r in rows:
                fh.write(f"{r['p']},{r['h']:.17g},{r['moment']:.17g},{r['bound']:.17g}\n")
    else:
        dest = _write_report(args, _report(args, {"table": rows, **summary}), "moments")
    print(f"{'p':>3} {'h':>10} {'moment':>14} {'bound':>14}")
    for r in rows:
        print(f"{r['p']:>3} {r['h']:>10.4g} {r['moment']:>14.6g} {r['bound']:>14.6g}")
    print(f"min_even_order={summary['min_even_order']}")
    print(dest)
    return 0


def _estimate_one(args, path: SamplePath, grids, source) -> dict:
    res: dict = {"source": source}
    if args.method in ("alpha", "both"):
        try:
            est = estimate_alpha(path, grids, default_kappa_grid(args.kappa_step),
                                 DichotomyRule(window=args.rule_window))
            res["alpha"] = est.to_dict()
        except BracketFailure as exc:
            res["alpha"] = {"error": str(exc),
                            "trace": [{"kappa": k, "verdict": v.value} for k, v in exc.trace]}
    if args.method in ("holder", "both"):
        try:
            res["holder"] = estimate_holder_exponent(path, quantile=args.quantile).to_dict()
        except ValueError as exc:
            res["holder"] = {"error": str(exc)}
    return res


def cmd_estimate(args) -> int:
    if args.input:
        paths = [(f, read_path_csv(f)) for f in args.input]
        horizon = args.horizon  # the design depends on (T, n), as in ``simulate``
        family = "power" if args.geom_anchors in (None, 1) else args.process
    else:
        _validate_process(args)
        spec = _spec(args)
        horizon, family = args.horizon, args.process
    grids = _design(args, family, horizon, args.steps) if args.method != "holder" else []
    if not args.input:
        extra = tuple(design_times(grids)) if grids else ()
        grid = SimGrid(args.horizon, args.steps, args.seed, extra)
        X = sample_paths(spec, grid, args.paths, workers=args.workers, **_flp_opts(args))
        paths = [(f"inline:{i}", SamplePath(grid.times, x)) for i, x in enumerate(X)]
    results = [_estimate_one(args, p, grids, src) for src, p in paths]
    summary = {}
    for key in ("alpha", "holder"):
        vals = [r[key]["estimate"] for r in results if key in r and "estimate" in r[key]]
        if vals:
            summary[f"median_{key}"] = float(np.median(vals))
    notes = []
    if not args.input and args.process == "flp" and parse_levy(args.levy).sigma == 0:
        notes.append("driver has no Gaussian component; divergence half of the dichotomy lacks theoretical backing")
    doc = _report(args, {"paths": results, "summary": summary, "notes": notes})
    _write_report(args, doc, "estimate")
    sys.stdout.write(dump_json(doc))
    failed = any("error" in r.get(k, {}) for r in results for k in ("alpha", "holder"))
    return 1 if failed else 0


def cmd_verify(args) -> int:
    ids = [c.strip() for c in args.checks.split(",") if c.strip()]
    unknown = [c for c in ids if c not in CHECKS]
    if unknown or not ids:
        raise UsageError(f"unknown check id(s) {unknown}; choose from {', '.join(CHECKS)}")
    _validate_process(args)
    spec = _spec(args)
    if spec.cumulants is None and set(ids) - {"start_at_zero"}:
        raise UsageError("deterministic paths only support start_at_zero")
    mc = vf.McConfig(args.paths, SimGrid(args.horizon, args.steps, args.seed), args.tolerance_sigmas,
                     workers=args.workers, flp_window=args.window)
    run = {
        "start_at_zero": lambda: vf.verify_start_at_zero(spec, mc),
        "covariance": lambda: vf.verify_covariance(spec, args.probe_pairs, mc),
        "cumulant_scaling": lambda: vf.verify_cumulant_scaling(spec, args.orders, args.times, mc),
        "stationary_increments": lambda: vf.verify_stationary_increments(spec, args.lags, args.anchors, mc),
        "kolmogorov": lambda: vf.verify_kolmogorov_bound(spec, args.p, args.lags, mc),
    }
    reports = [run[c]() for c in ids]
    dest = _write_report(args, _report(args, [r.to_dict() for r in reports]), "verify")
    for r in reports:
        print(f"{r.check_id}: {'PASS' if r.passed else 'FAIL'} statistic={r.statistic:.4g} "
              f"tolerance={r.tolerance:.4g}")
    print(dest)
    return 0 if all(r.passed for r in reports) else 1


def cmd_discriminate(args) -> int:
    if args.h1 == args.h2 and not args.null_control:
        raise UsageError("H1 = H2 is only allowed with --null-control")
    if args.null_control and args.h1 != args.h2:
        raise UsageError("--null-control needs H1 = H2")
    for H in (args.h1, args.h2):
        if args.family == "fbm" and not 0 < H < 1:
            raise UsageError(f"H in (0,1) required for FBM (got {H:g})")
        if args.family == "flp" and not 0.5 < H < 1:
            raise UsageError(f"H in (1/2,1) required for FLP (got {H:g})")
        if args.family == "power" and not H > 0:
            raise UsageError(f"power exponent must be positive (got {H:g})")
    grids = _design(args, args.family, args.horizon, args.steps)
    mc = vf.McConfig(args.paths, SimGrid(args.horizon, args.steps, args.seed), workers=args.workers,
                     flp_window=args.window)
    levy = parse_levy(args.levy) if args.family == "flp" else None
    rep = vf.discrimination_experiment(args.h1, args.h2, args.family, mc, grids,
                                       DichotomyRule(window=args.rule_window), args.floor,
                                       args.max_undecided, levy=levy)
    dest = _write_report(args, _report(args, [rep.to_dict()]), "discriminate")
    print(f"accuracy={rep.statistic:.4f} undecided={rep.details['undecided_rate']:.4f} "
          f"{'NULL CONTROL' if args.null_control else ('PASS' if rep.passed else 'FAIL')}")
    print(dest)
    return 0 if (rep.passed or args.null_control) else 1


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:  # includes UnsupportedCase, SizeLimitError, WindowError
        print(f"dilstab {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SamplingMismatch, GenerationError, BracketFailure, OSError) as exc:
        print(f"dilstab {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
