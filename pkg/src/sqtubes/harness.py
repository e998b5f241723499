"""Monte Carlo validation of the risk bounds.

Each trial draws a fresh training set, fits, and measures the "true" risk on
``n_eval`` held-out draws from the same generator.  A trial violates the bound
when the point estimate of the true risk exceeds it.  Trial ``i`` uses seed
``base_seed + i`` for both draws, so reports are reproducible and do not depend
on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial

import numpy as np

from . import bounds, info
from .dataset import GeneratorSpec, parse_features, parse_generator
from .hull import contains_many as hull_contains_many
from .hull import convex_hull
from .tubes import compression_size, empirical_risk, fit_quantile_tube, fit_support_tube

BOUND_KINDS = ("compression", "orderstat", "hull", "qt", "mi")
TRAJECTORY_N = (200, 1000, 5000)
TRAJECTORY_TRIALS = 50


@dataclass(frozen=True)
class TrialConfig:
    generator: GeneratorSpec
    n_train: int
    n_eval: int = 100_000
    trials: int = 200
    delta: float = 0.05
    features: str = "affine"
    bound: str = "compression"
    base_seed: int = 0
    mode: str = "loose"
    C: float | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "generator", parse_generator(self.generator))
        if self.bound not in BOUND_KINDS:
            raise ValueError(f"bound must be one of {BOUND_KINDS}, got {self.bound!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n_train < 2:
            raise ValueError("n_train must be >= 2")
        if self.n_eval < 1:
            raise ValueError("n_eval must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["generator"] = str(self.generator)
        return out


def violation_cap(delta: float, trials: int) -> float:
    """delta plus 1.96 binomial standard errors; the acceptance threshold."""
    return delta + 1.96 * math.sqrt(delta * (1.0 - delta) / trials)


def wilson_interval(k: int, T: int, z: float = 1.96):
    p = k / T
    den = 1.0 + z * z / T
    mid = (p + z * z / (2 * T)) / den
    half = z * math.sqrt(p * (1 - p) / T + z * z / (4 * T * T)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class ValidationReport:
    kind: str
    config: dict
    rows: list
    violations: int
    trials: int
    extra: dict = field(default_factory=dict)

    @property
    def violation_rate(self) -> float:
        return self.violations / self.trials

    @property
    def ci(self):
        return wilson_interval(self.violations, self.trials)

    @property
    def cap(self) -> float:
        return violation_cap(self.config["delta"], self.trials)

    def summary_line(self) -> str:
        return f"violations {self.violations}/{self.trials} (bound delta={self.config['delta']:g})"

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {"kind": self.kind, "config": self.config, "trials": self.trials,
                "violations": self.violations, "violation_rate": self.violation_rate,
                "ci95": [lo, hi], "cap": self.cap, "extra": self.extra, "rows": self.rows}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        cols = []
        for r in self.rows:
            cols += [k for k in r if k not in cols]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_fmt(r.get(k, "")) for k in cols])


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


# ---------------------------------------------------------------------------
# single trials (top level so worker processes can pickle them)

def _draws(cfg: TrialConfig, i: int, n: int | None = None):
    seed = cfg.base_seed + i
    rng = np.random.default_rng(seed)
    train = cfg.generator.draw(cfg.n_train if n is None else n, rng)
    return seed, train, rng


def _risk_row(i, seed, risk, n_eval, bound):
    return {"trial": i, "seed": seed, "true_risk": risk,
            "stderr": math.sqrt(risk * (1.0 - risk) / n_eval),
            "bound": bound, "violated": bool(risk > bound)}


def _support_trial(cfg: TrialConfig, i: int) -> dict:
    seed, train, rng = _draws(cfg, i)
    fm = parse_features(cfg.features, train.X)
    model = fit_support_tube(train, fm)
    D = compression_size(fm)
    if cfg.bound == "compression":
        eps = bounds.compression_epsilon(cfg.delta, D, cfg.n_train, cfg.mode)
    else:
        eps = bounds.order_stat_epsilon(cfg.delta, cfg.n_train, D, cfg.mode)
    held = cfg.generator.draw(cfg.n_eval, rng)
    row = _risk_row(i, seed, empirical_risk(model, held), cfg.n_eval, eps)
    row["t"] = model.t
    row["D"] = D
    return row


def _hull_trial(cfg: TrialConfig, i: int) -> dict:
    seed, train, rng = _draws(cfg, i)
    if train.d != 1:
        raise ValueError("hull validation needs planar data (one covariate)")
    poly = convex_hull(train.points())
    held = cfg.generator.draw(cfg.n_eval, rng)
    mass = 1.0 - float(np.mean(hull_contains_many(poly, held.points())))
    row = _risk_row(i, seed, mass, cfg.n_eval, bounds.hull_mass_bound(cfg.n_train, cfg.delta))
    row["vertices"] = len(poly)
    return row


def _qt_trial(cfg: TrialConfig, i: int) -> dict:
    seed, train, rng = _draws(cfg, i)
    fm = parse_features(cfg.features, train.X)
    fit = fit_quantile_tube(train, fm, cfg.C)
    D = compression_size(fm)
    alpha = cfg.C / cfg.n_train
    emp = empirical_risk(fit.model, train)
    held = cfg.generator.draw(cfg.n_eval, rng)
    risk = empirical_risk(fit.model, held)
    slack_c = bounds.qt_deviation_slack(cfg.delta, D, cfg.n_train, "corrected-sign")
    slack_v = bounds.qt_deviation_slack(cfg.delta, D, cfg.n_train, "verbatim")
    row = _risk_row(i, seed, risk, cfg.n_eval, alpha + emp + slack_c)
    row.update({"empirical_risk": emp, "alpha": alpha,
                "bound_verbatim": alpha + emp + slack_v,
                "violated_verbatim": bool(risk - alpha > emp + slack_v)})
    return row


def analytic_mi(gen: GeneratorSpec) -> float:
    """Mutual information of generators where it is known in closed form."""
    if gen.name == "linear":
        return info.linear_uniform_mi(gen.params["w"], gen.params["u"])
    if gen.name == "independent":
        return 0.0
    raise ValueError(f"no analytic mutual information for generator {gen.name!r}")


def _mi_trial(cfg: TrialConfig, i: int, n: int | None = None) -> dict:
    n = cfg.n_train if n is None else n
    seed, train, _ = _draws(cfg, i, n)
    fm = parse_features(cfg.features, train.X)
    model = fit_support_tube(train, fm)
    eps = bounds.compression_epsilon(cfg.delta, compression_size(fm), n, cfg.mode)
    rep = info.mi_lower_bound(info.marginal_entropy(train.y),
                              info.mean_log_width(model, train), eps)
    true_i = analytic_mi(cfg.generator)
    return {"trial": i, "seed": seed, "n": n, "H_Y": rep.H_Y,
            "mean_log_width": rep.mean_log_width, "epsilon": eps,
            "mi_lower": rep.mi_lower, "analytic_mi": true_i,
            "gap": true_i - rep.mi_lower, "valid": rep.valid,
            "violated": bool(rep.mi_lower > true_i)}


def _run(fn, cfg: TrialConfig, indices):
    indices = list(indices)
    if cfg.workers > 1 and len(indices) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            rows = list(ex.map(partial(fn, cfg), indices, chunksize=max(1, len(indices) // (4 * cfg.workers))))
    else:
        rows = [fn(cfg, i) for i in indices]
    return sorted(rows, key=lambda r: r["trial"])


def _report(kind, cfg, rows, extra=None) -> ValidationReport:
    k = sum(1 for r in rows if r["violated"])
    return ValidationReport(kind, cfg.to_dict(), rows, k, len(rows), extra or {})


def _require_bounded(cfg: TrialConfig):
    if not cfg.generator.bounded:
        raise ValueError(f"generator {cfg.generator} has unbounded noise; support-tube "
                         "bounds need a zero-risk tube to exist")


# ---------------------------------------------------------------------------
# public entry points

def validate_compression(cfg: TrialConfig) -> ValidationReport:
    _require_bounded(cfg)
    cfg = replace(cfg, bound="compression")
    return _report("compression", cfg, _run(_support_trial, cfg, range(cfg.trials)))


def validate_order_stat(cfg: TrialConfig) -> ValidationReport:
    _require_bounded(cfg)
    cfg = replace(cfg, bound="orderstat")
    rows = _run(_support_trial, cfg, range(cfg.trials))
    D, eps_os = rows[0]["D"], rows[0]["bound"]
    eps_c = bounds.compression_epsilon(cfg.delta, D, cfg.n_train, cfg.mode)
    return _report("orderstat", cfg, rows,
                   {"compression_epsilon": eps_c, "orderstat_below_compression": eps_os < eps_c})


def validate_hull(cfg: TrialConfig) -> ValidationReport:
    cfg = replace(cfg, bound="hull")
    if cfg.n_train <= bounds.HULL_D:
        raise ValueError("hull validation needs n_train > 3")
    return _report("hull", cfg, _run(_hull_trial, cfg, range(cfg.trials)),
                   {"bound": bounds.hull_mass_bound(cfg.n_train, cfg.delta)})


def validate_qt(cfg: TrialConfig, C: float | None = None) -> ValidationReport:
    """Quantile tubes; the primary verdict uses the corrected-sign slack.

    The verbatim variant's violations are reported in ``extra`` and are not
    part of the verdict.
    """
    C = cfg.C if C is None else C
    if C is None or not C > 0:
        raise ValueError("quantile validation needs C > 0")
    cfg = replace(cfg, bound="qt", C=float(C))
    rows = _run(_qt_trial, cfg, range(cfg.trials))
    kv = sum(1 for r in rows if r["violated_verbatim"])
    return _report("qt", cfg, rows, {"alpha": cfg.C / cfg.n_train,
                                     "violations_verbatim": kv,
                                     "violation_rate_verbatim": kv / len(rows)})


def mi_experiment(cfg: TrialConfig, trajectory_n=TRAJECTORY_N,
                  trajectory_trials: int = TRAJECTORY_TRIALS) -> ValidationReport:
    """Tube MI lower bound against the analytic value, plus a gap trajectory.

    Main trials run at ``cfg.n_train``; a "violation" is a bound above the true
    mutual information.  The trajectory reruns ``trajectory_trials`` trials at
    each n in ``trajectory_n`` and records the median gap.
    """
    _require_bounded(cfg)
    true_i = analytic_mi(cfg.generator)
    cfg = replace(cfg, bound="mi")
    rows = _run(_mi_trial, cfg, range(cfg.trials))
    for r in rows:
        r["phase"] = "main"
    traj, trows = [], []
    for n in trajectory_n if trajectory_trials > 0 else ():
        sub = replace(cfg, n_train=n)
        part = _run(partial(_mi_at, n=n), sub, range(trajectory_trials))
        gaps = [r["gap"] for r in part]
        traj.append({"n": n, "trials": len(part), "median_gap": float(np.median(gaps)),
                     "mean_gap": float(np.mean(gaps)),
                     "violations": sum(1 for r in part if r["violated"])})
        for r in part:
            r["phase"] = "trajectory"
        trows += part
    k = sum(1 for r in rows if r["violated"])
    return ValidationReport("mi", cfg.to_dict(), rows + trows, k, len(rows),
                            {"analytic_mi": true_i,
                             "median_gap": float(np.median([r["gap"] for r in rows])),
                             "trajectory": traj})


def _mi_at(cfg, i, n):
    return _mi_trial(cfg, i, n)


def validate(cfg: TrialConfig) -> ValidationReport:
    """Dispatch on ``cfg.bound``."""
    return {"compression": validate_compression, "orderstat": validate_order_stat,
            "hull": validate_hull, "qt": validate_qt, "mi": mi_experiment}[cfg.bound](cfg)
