"""Command-line driver: ``sqtubes fit|bounds|mi|hull|validate|generate``.

Exit codes: 0 success, 2 bad flags or argument ranges, 3 data errors,
4 solver failures.  Every JSON document carries ``schema: 1`` and a run
manifest.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__, bounds, harness, hull, info
from .dataset import DataError, generate_synthetic, load_csv, parse_features, parse_generator, write_csv
from .lp import NumericalBreakdown
from .tubes import (FitError, compression_size, empirical_risk, fit_quantile_tube,
                    multi_quantile_fit, support_tube_fit)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4
SCHEMA = 1
PLOT_POINTS = 200


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers

def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_clean(v) for v in items]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def manifest(args) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    inp = getattr(args, "input", None)
    return {"command": args.command, "args": flags,
            "input_sha256": _sha256(inp) if inp else None,
            "version": __version__, "seed": getattr(args, "seed", None),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def emit(args, payload: dict, out=None) -> None:
    """Write ``payload`` with schema and manifest to ``out`` (stdout when None)."""
    doc = {"schema": SCHEMA, "manifest": manifest(args), **payload}
    text = json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _floats(text, what):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{what} must be a comma-separated list of numbers") from None
    if not vals:
        raise UsageError(f"--{what} is empty")
    return vals


def write_plot_csv(model, X, path) -> None:
    """200-point x grid with (lo_l, hi_l) per level; one covariate only."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != 1:
        raise UsageError("--plot needs data with a single covariate")
    grid = np.linspace(X[:, 0].min(), X[:, 0].max(), PLOT_POINTS)
    L = model.levels
    cols = [grid]
    for level in range(1, L + 1):
        lo, hi = model.bounds(grid[:, None], level if L > 1 else None)
        cols += [lo, hi]
    header = ["x"] + [f"{s}_{l}" for l in range(1, L + 1) for s in ("lo", "hi")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.column_stack(cols):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# commands

def cmd_fit(args) -> int:
    if args.kind in ("quantile", "multi") and not args.C:
        raise UsageError(f"--C is required for --kind {args.kind}")
    data = load_csv(args.input)
    fm = _features(args.features, data)
    if args.kind == "support":
        fit = support_tube_fit(data, fm)
        model = fit.model
        info_ = {"active": fit.active, "objective": model.t}
    elif args.kind == "quantile":
        C = _floats(args.C, "C")
        if len(C) != 1:
            raise UsageError("--kind quantile takes a single --C value")
        fit = fit_quantile_tube(data, fm, C[0])
        model = fit.model
        info_ = {"C": C[0], "active": fit.active, "excluded": fit.excluded,
                 "objective": fit.objective}
    else:
        C = _floats(args.C, "C")
        fit = multi_quantile_fit(data, fm, C)
        model = fit.model
        info_ = {"C": C, "objective": fit.objective,
                 "excluded": [len(fit.excluded(l)) for l in range(1, model.levels + 1)],
                 "boundary_points": fit.boundary_points}
    info_.update({"kind": args.kind, "n": data.n, "p": fm.p,
                  "empirical_risk": [empirical_risk(model, data, l if model.levels > 1 else None)
                                     for l in range(1, model.levels + 1)]})
    if args.plot:
        write_plot_csv(model, data.X, args.plot)
    emit(args, {"model": model.to_dict(), "fit": info_}, args.out)
    return EXIT_OK


def _features(text, data):
    try:
        fm = parse_features(text, data.X, data.d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if fm.d != data.d:
        raise UsageError(f"feature map expects {fm.d} covariates, data has {data.d}")
    return fm


def cmd_bounds(args) -> int:
    rep = bounds.bound_report(args.kind, args.n, args.delta, args.D, args.mode)
    emit(args, {"report": rep.to_dict()}, args.out)
    return EXIT_OK


def cmd_mi(args) -> int:
    data = load_csv(args.input)
    fm = _features(args.features, data)
    model = support_tube_fit(data, fm).model
    D = compression_size(fm)
    if data.n > D:
        eps = bounds.compression_epsilon(args.delta, D, data.n, args.mode)
    else:
        eps = 1.0
    if args.hy is not None:
        H_Y, h_src = args.hy, "user"
    else:
        try:
            H_Y = info.marginal_entropy(data.y)
        except ValueError as exc:
            raise DataError(f"cannot estimate H(Y): {exc}") from None
        h_src = f"spacing estimator, m=floor(sqrt({data.n}))"
    try:
        mlw = info.mean_log_width(model, data)
    except info.DegenerateError as exc:
        raise DataError(f"{exc} (the fitted tube has zero width)") from None
    prov = {"H_Y": h_src, "mean_log_width": "support tube, constant width log(2t)",
            "epsilon": f"compression bound, D={D}, n={data.n}, delta={args.delta}, "
                       f"{args.mode} counting"}
    rep = info.mi_lower_bound(H_Y, mlw, eps, prov)
    if not rep.valid:
        _warn(f"epsilon={eps:.4g} >= 0.5; the lower bound is not applicable")
    emit(args, {"report": rep.to_dict(), "tube": model.to_dict()}, args.out)
    return EXIT_OK


def cmd_hull(args) -> int:
    data = load_csv(args.input)
    if data.d != 1:
        raise DataError("hull needs planar data (one covariate)")
    poly = hull.convex_hull(data.points())
    payload = {"vertices": poly.vertices, "degenerate": poly.degenerate, "area": poly.area(),
               "n": data.n}
    if data.n > bounds.HULL_D:
        payload["mass_bound"] = bounds.hull_mass_bound(data.n, args.delta)
    if args.point:
        pts = []
        for text in args.point:
            xy = _floats(text, "point")
            if len(xy) != 2:
                raise UsageError("--point takes x,y")
            px, py = xy
            tube = hull.separating_tube(data, (px, py))
            pts.append({"point": [px, py], "inside": hull.contains(poly, (px, py)),
                        "separating_tube": tube.to_dict() if tube is not None else None})
        payload["points"] = pts
    if args.polygon:
        hull.write_polygon_csv(poly, args.polygon)
    emit(args, payload, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = harness.TrialConfig(parse_generator(args.gen), args.n, n_eval=args.n_eval,
                                  trials=args.trials, delta=args.delta, features=args.features,
                                  bound=args.bound, base_seed=args.seed, mode=args.mode,
                                  C=args.C, workers=args.workers)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        rep = harness.validate(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.csv:
        rep.write_csv(args.csv)
    if args.out:
        emit(args, {"report": rep.to_dict()}, args.out)
    print(rep.summary_line())
    if rep.kind == "mi":
        for t in rep.extra["trajectory"]:
            print(f"gap n={t['n']}: median {t['median_gap']:.4f} over {t['trials']} trials")
    return EXIT_OK


def cmd_generate(args) -> int:
    data = generate_synthetic(parse_generator(args.gen), args.n, args.seed)
    write_csv(data, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _delta(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sqtubes", description="Support and quantile tubes with risk bounds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a support, quantile or multi-quantile tube")
    f.add_argument("--input", required=True)
    f.add_argument("--kind", choices=("support", "quantile", "multi"), default="support")
    f.add_argument("--C", help="exclusion budget (comma list for --kind multi)")
    f.add_argument("--features", default="affine", help="intercept, affine or rbf:K")
    f.add_argument("--out", help="model JSON (stdout if omitted)")
    f.add_argument("--plot", help="grid CSV with lower/upper boundaries per level")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bounds", help="evaluate a risk bound")
    b.add_argument("--kind", choices=("compression", "orderstat", "hull", "qt"), required=True)
    b.add_argument("--n", type=_pos_int, required=True)
    b.add_argument("--D", type=_pos_int, default=3)
    b.add_argument("--delta", type=_delta, required=True)
    b.add_argument("--mode", choices=bounds.MODES, default="loose")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("mi", help="lower bound on mutual information from a support tube")
    m.add_argument("--input", required=True)
    m.add_argument("--delta", type=_delta, default=0.05)
    m.add_argument("--hy", type=float, help="known H(Y) in nats (default: spacing estimate)")
    m.add_argument("--features", default="affine")
    m.add_argument("--mode", choices=bounds.MODES, default="loose")
    m.add_argument("--out")
    m.set_defaults(func=cmd_mi)

    h = sub.add_parser("hull", help="planar convex hull and separating tubes")
    h.add_argument("--input", required=True)
    h.add_argument("--delta", type=_delta, default=0.05)
    h.add_argument("--point", action="append", help="x,y to test (repeatable)")
    h.add_argument("--polygon", help="hull vertices CSV (x,y, counter-clockwise)")
    h.add_argument("--out")
    h.set_defaults(func=cmd_hull)

    v = sub.add_parser("validate", help="Monte Carlo check of a bound")
    v.add_argument("--bound", choices=harness.BOUND_KINDS, required=True)
    v.add_argument("--gen", required=True, help="generator, e.g. linear:w=2,u=0.25")
    v.add_argument("--n", type=_pos_int, required=True)
    v.add_argument("--trials", type=_pos_int, default=200)
    v.add_argument("--delta", type=_delta, default=0.05)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--n-eval", type=_pos_int, default=100_000)
    v.add_argument("--features", default="affine")
    v.add_argument("--mode", choices=bounds.MODES, default="loose")
    v.add_argument("--C", type=float, help="exclusion budget for --bound qt")
    v.add_argument("--workers", type=_pos_int, default=1)
    v.add_argument("--out", help="report JSON")
    v.add_argument("--csv", help="per-trial CSV")
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--gen", required=True)
    g.add_argument("--n", type=_pos_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, NumericalBreakdown) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
