"""Support, quantile and multi-quantile tubes fitted by linear programming.

A tube is an interval ``[m(x) - width_lo, m(x) + width_hi]`` around a center
``m(x) = w . phi(x)`` where ``phi`` is a :class:`~sqtubes.dataset.FeatureMap`.
Single tubes are symmetric with half-width ``t``; multi-level tubes share ``w``
and stack nonnegative width increments on each side, so level ``l`` is always
contained in level ``l + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, FeatureMap, expand
from .lp import GE, LinearProgram, LpSolution, active_sample_set, solve

CONTAIN_TOL = 1e-9
XI_TOL = 1e-7


class FitError(RuntimeError):
    """The LP behind a fit did not reach an optimum."""


@dataclass(frozen=True, eq=False)
class TubeModel:
    fm: FeatureMap
    w: np.ndarray
    t: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if w.shape[0] != self.fm.p:
            raise ValueError(f"w has length {w.shape[0]}, feature map has p={self.fm.p}")
        if not self.t >= 0:
            raise ValueError("half-width t must be >= 0")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t", float(self.t))

    levels = 1

    def center(self, X) -> np.ndarray:
        return self.fm.expand_many(X) @ self.w

    def bounds(self, X, level=None):
        m = self.center(X)
        return m - self.t, m + self.t

    def to_dict(self) -> dict:
        return {"type": "tube", "feature_map": self.fm.to_dict(),
                "w": self.w.tolist(), "widths": {"t": self.t}}


@dataclass(frozen=True, eq=False)
class MultiTubeModel:
    """Nested tubes; level l (1-based) spans [m - T_l^-, m + T_l^+].

    ``T_l^{+/-}`` is the cumulative sum of the first l increments.
    """

    fm: FeatureMap
    w: np.ndarray
    inc_minus: np.ndarray
    inc_plus: np.ndarray
    C: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        lo = np.asarray(self.inc_minus, dtype=float).ravel()
        hi = np.asarray(self.inc_plus, dtype=float).ravel()
        if w.shape[0] != self.fm.p:
            raise ValueError(f"w has length {w.shape[0]}, feature map has p={self.fm.p}")
        if lo.shape != hi.shape or lo.size < 1:
            raise ValueError("need matching, nonempty increment vectors")
        if np.any(lo < 0) or np.any(hi < 0):
            raise ValueError("width increments must be >= 0")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "inc_minus", lo)
        object.__setattr__(self, "inc_plus", hi)
        object.__setattr__(self, "C", tuple(float(c) for c in self.C))

    @property
    def levels(self) -> int:
        return self.inc_plus.shape[0]

    def widths(self, level: int):
        """Cumulative (lower, upper) widths of a 1-based level."""
        if not 1 <= level <= self.levels:
            raise ValueError(f"level must be in 1..{self.levels}")
        return float(self.inc_minus[:level].sum()), float(self.inc_plus[:level].sum())

    def center(self, X) -> np.ndarray:
        return self.fm.expand_many(X) @ self.w

    def bounds(self, X, level=None):
        lo_w, hi_w = self.widths(self.levels if level is None else level)
        m = self.center(X)
        return m - lo_w, m + hi_w

    def level(self, level: int) -> TubeModel:
        """The level as a symmetric :class:`TubeModel` (intercept absorbs the skew)."""
        lo_w, hi_w = self.widths(level)
        w = self.w.copy()
        w[0] += (hi_w - lo_w) / 2
        return TubeModel(self.fm, w, (hi_w + lo_w) / 2)

    def to_dict(self) -> dict:
        return {"type": "multi", "feature_map": self.fm.to_dict(), "w": self.w.tolist(),
                "widths": {"inc_minus": self.inc_minus.tolist(),
                           "inc_plus": self.inc_plus.tolist(), "C": list(self.C)}}


def model_from_dict(doc: dict):
    fm = FeatureMap.from_dict(doc["feature_map"])
    if doc["type"] == "tube":
        return TubeModel(fm, doc["w"], doc["widths"]["t"])
    if doc["type"] == "multi":
        wd = doc["widths"]
        return MultiTubeModel(fm, doc["w"], wd["inc_minus"], wd["inc_plus"], wd.get("C", ()))
    raise ValueError(f"unknown model type {doc['type']!r}")


# ---------------------------------------------------------------------------
# evaluation

def tube_contains(model, x, y, level=None) -> bool:
    """Closed-interval membership of (x, y), with tolerance 1e-9."""
    phi = expand(model.fm, x)
    m = float(phi @ model.w)
    if isinstance(model, MultiTubeModel):
        lo_w, hi_w = model.widths(model.levels if level is None else level)
    else:
        lo_w = hi_w = model.t
    return m - lo_w - CONTAIN_TOL <= y <= m + hi_w + CONTAIN_TOL


def contains_many(model, X, y, level=None) -> np.ndarray:
    lo, hi = model.bounds(X, level)
    y = np.asarray(y, dtype=float)
    return (lo - CONTAIN_TOL <= y) & (y <= hi + CONTAIN_TOL)


def empirical_risk(model, data: Dataset, level=None) -> float:
    """Fraction of samples outside the tube."""
    inside = contains_many(model, data.X, data.y, level)
    return float(np.count_nonzero(~inside)) / data.n


def compression_size(fm: FeatureMap) -> int:
    """Samples needed to pin down a constant-width tube: p coefficients + 1 width."""
    return fm.p + 1


# ---------------------------------------------------------------------------
# support tube

@dataclass(eq=False)
class SupportFit:
    model: TubeModel
    active: frozenset
    signs: dict
    lp: LinearProgram = field(repr=False)
    solution: LpSolution = field(repr=False)
    row_map: np.ndarray = field(repr=False)


def _side_signs(model, data, idx):
    r = data.y[list(idx)] - model.center(data.X[list(idx)])
    return {int(i): (1 if ri >= 0 else -1) for i, ri in zip(idx, r)}


def _tube_rows(Phi, y):
    """Rows 2i, 2i+1:  phi_i.w + t >= y_i  and  -phi_i.w + t >= -y_i."""
    n, p = Phi.shape
    A = np.empty((2 * n, p + 1))
    A[0::2, :p] = Phi
    A[1::2, :p] = -Phi
    A[:, p] = 1.0
    b = np.empty(2 * n)
    b[0::2] = y
    b[1::2] = -y
    return A, b


def _check_solution(sol, what):
    if not sol.optimal:
        raise FitError(f"{what} LP ended with status {sol.status!r}")


def support_tube_fit(data: Dataset, fm: FeatureMap) -> SupportFit:
    """min t  s.t.  |y_i - w.phi(x_i)| <= t for every sample, t >= 0."""
    Phi = fm.expand_many(data.X)
    n, p = Phi.shape
    A, b = _tube_rows(Phi, data.y)
    c = np.zeros(p + 1)
    c[p] = 1.0
    lower = np.concatenate([np.full(p, -np.inf), [0.0]])
    lp = LinearProgram(c, A, b, (GE,) * (2 * n), lower)
    sol = solve(lp)
    _check_solution(sol, "support tube")
    model = TubeModel(fm, sol.z[:p], max(sol.z[p], 0.0))
    row_map = np.repeat(np.arange(n), 2)
    active = active_sample_set(sol, row_map)
    return SupportFit(model, active, _side_signs(model, data, active), lp, sol, row_map)


def fit_support_tube(data: Dataset, fm: FeatureMap) -> TubeModel:
    return support_tube_fit(data, fm).model


# ---------------------------------------------------------------------------
# quantile tube

@dataclass(eq=False)
class QuantileFit:
    model: TubeModel
    xi: np.ndarray
    C: float
    active: frozenset
    objective: float
    signs: dict = field(default_factory=dict)
    alpha_plus: np.ndarray | None = field(default=None, repr=False)
    alpha_minus: np.ndarray | None = field(default=None, repr=False)
    solution: LpSolution | None = field(default=None, repr=False)

    @property
    def excluded(self) -> frozenset:
        """Samples strictly outside the tube (slack above 1e-7)."""
        return frozenset(int(i) for i in np.flatnonzero(self.xi > XI_TOL))


def fit_quantile_tube(data: Dataset, fm: FeatureMap, C: float) -> QuantileFit:
    """min C t + sum xi_i  s.t.  |y_i - w.phi(x_i)| <= t + xi_i,  xi, t >= 0.

    Each slack is split into an upper and a lower part (one per side
    constraint).  The two programs have the same optimal (w, t); the split keeps
    the slacks as singleton columns, which the LP core turns into bounds.
    """
    C = float(C)
    if not C > 0:
        raise ValueError("C must be > 0")
    Phi = fm.expand_many(data.X)
    n, p = Phi.shape
    A0, b = _tube_rows(Phi, data.y)
    A = np.zeros((2 * n, p + 1 + 2 * n))
    A[:, : p + 1] = A0
    A[2 * np.arange(n), p + 1 + np.arange(n)] = 1.0
    A[2 * np.arange(n) + 1, p + 1 + n + np.arange(n)] = 1.0
    c = np.concatenate([np.zeros(p), [C], np.ones(2 * n)])
    lower = np.concatenate([np.full(p, -np.inf), np.zeros(1 + 2 * n)])
    lp = LinearProgram(c, A, b, (GE,) * (2 * n), lower)
    try:
        sol = solve(lp)
    except Exception as exc:
        raise FitError(f"quantile tube LP failed (n={n}, p={p}, C={C}): {exc}") from exc
    _check_solution(sol, "quantile tube")
    z = sol.z
    model = TubeModel(fm, z[:p], max(z[p], 0.0))
    xi = z[p + 1: p + 1 + n] + z[p + 1 + n:]
    row_map = np.repeat(np.arange(n), 2)
    touching = active_sample_set(sol, row_map)
    btol = 1e-9 * (1.0 + float(np.abs(data.y).max()))
    active = frozenset(i for i in touching if xi[i] <= btol)
    return QuantileFit(model, xi, C, active, sol.objective,
                       _side_signs(model, data, active),
                       sol.duals[0::2].copy(), sol.duals[1::2].copy(), sol)


def refit_from_active(data: Dataset, fm: FeatureMap, active, signs) -> TubeModel:
    """Rebuild (w, t) from the boundary samples: w.phi_i + sign_i t = y_i."""
    idx = sorted(active)
    if not idx:
        raise ValueError("no active samples to rebuild the tube from")
    Phi = fm.expand_many(data.X[idx])
    M = np.column_stack([Phi, [signs[i] for i in idx]])
    sol, *_ = np.linalg.lstsq(M, data.y[idx], rcond=None)
    return TubeModel(fm, sol[:-1], abs(sol[-1]))


# ---------------------------------------------------------------------------
# multi-quantile tube

@dataclass(eq=False)
class MultiQuantileFit:
    model: MultiTubeModel
    xi_minus: np.ndarray
    xi_plus: np.ndarray
    objective: float
    boundary: list = field(default_factory=list)
    solution: LpSolution | None = field(default=None, repr=False)

    def excluded(self, level: int) -> frozenset:
        """Samples strictly outside a 1-based level."""
        k = level - 1
        out = (self.xi_minus[k] > XI_TOL) | (self.xi_plus[k] > XI_TOL)
        return frozenset(int(i) for i in np.flatnonzero(out))

    @property
    def boundary_points(self) -> frozenset:
        """Distinct samples lying on any level's boundary."""
        return frozenset().union(*self.boundary) if self.boundary else frozenset()


def multi_quantile_fit(data: Dataset, fm: FeatureMap, C) -> MultiQuantileFit:
    """Nested quantile tubes from one LP.

    Variables: w, per-level increments on each side, one slack per sample,
    level and side.  Level l's constraints use the cumulative widths T_l.
    Each cumulative width costs C_l / 2 (so one level reduces exactly to the
    symmetric tube with budget C_l), which puts at most C_l / 2 samples
    strictly outside each side of level l.  C must be positive and
    nonincreasing.
    """
    C = np.asarray(C, dtype=float).ravel()
    if C.size < 1 or np.any(~(C > 0)):
        raise ValueError("C must be a nonempty vector of positive budgets")
    if np.any(np.diff(C) > 0):
        raise ValueError("C must be nonincreasing (wider tubes exclude fewer samples)")
    Phi = fm.expand_many(data.X)
    n, p = Phi.shape
    m = C.size
    n_xi = 2 * m * n
    nv = p + 2 * m + n_xi
    A = np.zeros((2 * m * n, nv))
    b = np.empty(2 * m * n)
    ii = np.arange(n)
    for l in range(m):
        up = 2 * (l * n + ii)
        lo = up + 1
        A[up, :p] = Phi
        A[lo, :p] = -Phi
        A[np.ix_(up, p + np.arange(l + 1))] = 1.0
        A[np.ix_(lo, p + m + np.arange(l + 1))] = 1.0
        A[up, p + 2 * m + 2 * (l * n + ii)] = 1.0
        A[lo, p + 2 * m + 2 * (l * n + ii) + 1] = 1.0
        b[up] = data.y
        b[lo] = -data.y
    tail = np.cumsum(C[::-1])[::-1] / 2.0
    c = np.concatenate([np.zeros(p), tail, tail, np.ones(n_xi)])
    lower = np.concatenate([np.full(p, -np.inf), np.zeros(2 * m + n_xi)])
    lp = LinearProgram(c, A, b, (GE,) * (2 * m * n), lower)
    try:
        sol = solve(lp)
    except Exception as exc:
        raise FitError(f"multi-quantile LP failed (n={n}, p={p}, levels={m}): {exc}") from exc
    _check_solution(sol, "multi-quantile")
    z = sol.z
    model = MultiTubeModel(fm, z[:p], np.maximum(z[p + m: p + 2 * m], 0.0),
                           np.maximum(z[p: p + m], 0.0), tuple(C))
    xi = z[p + 2 * m:].reshape(m, n, 2)
    xi_plus, xi_minus = xi[:, :, 0], xi[:, :, 1]
    btol = 1e-9 * (1.0 + float(np.abs(data.y).max()))
    center = model.center(data.X)
    boundary = []
    for l in range(m):
        lo_w, hi_w = model.widths(l + 1)
        on_hi = (np.abs(data.y - (center + hi_w)) <= btol) & (xi_plus[l] <= btol)
        on_lo = (np.abs(data.y - (center - lo_w)) <= btol) & (xi_minus[l] <= btol)
        boundary.append(frozenset(int(i) for i in np.flatnonzero(on_hi | on_lo)))
    return MultiQuantileFit(model, xi_minus, xi_plus, sol.objective, boundary, sol)


def fit_multi_quantile(data: Dataset, fm: FeatureMap, C) -> MultiTubeModel:
    return multi_quantile_fit(data, fm, C).model
