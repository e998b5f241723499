"""Dense two-phase primal simplex.

Every LP in the package goes through :func:`solve`.  The core is a
bounded-variable revised simplex on the standard form ``A x = b, 0 <= x <= u``
with Bland's rule (lowest index) for both the entering and the leaving
variable, so it never cycles.

Tube estimators produce tall problems (two rows per sample, a handful of
columns).  For those :func:`solve` builds the dual, whose basis has one row
per primal column, runs the same simplex on it and reads the primal point back
from the dual's simplex multipliers.  Singleton slack columns of the primal
(the ``xi`` variables of the quantile LPs) turn into plain upper bounds of the
dual and never enlarge its basis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

LE, EQ, GE = "<=", "=", ">="
SENSES = (LE, EQ, GE)

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-12
OPT_TOL = 1e-9
REFACTOR_EVERY = 50
SMALL_BASIS = 64

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


class NumericalBreakdown(RuntimeError):
    """The simplex lost accuracy: no usable pivot, or the optimum fails its checks."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``minimize c.z  s.t.  A z (row_sense) b`` with each z_j >= 0 or free.

    ``var_lower`` holds 0.0 (nonnegative) or ``-inf`` (free) per variable.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    row_sense: tuple
    var_lower: np.ndarray = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        if A.ndim != 2:
            A = A.reshape(len(b), len(c))
        sense = tuple(self.row_sense)
        lower = (np.zeros(len(c)) if self.var_lower is None
                 else np.asarray(self.var_lower, dtype=float).ravel())
        if A.shape != (len(b), len(c)):
            raise ValueError(f"A has shape {A.shape}, expected {(len(b), len(c))}")
        if len(sense) != len(b):
            raise ValueError("row_sense must have one entry per row")
        if any(s not in SENSES for s in sense):
            raise ValueError(f"row_sense entries must be in {SENSES}")
        if len(lower) != len(c):
            raise ValueError("var_lower must have one entry per variable")
        if not np.all((lower == 0.0) | (lower == -np.inf)):
            raise ValueError("var_lower entries must be 0 or -inf")
        for name, arr in (("c", c), ("A", A), ("b", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "row_sense", sense)
        object.__setattr__(self, "var_lower", lower)

    @property
    def shape(self):
        return self.A.shape

    @property
    def free(self):
        return self.var_lower == -np.inf

    def residuals(self, z):
        return self.A @ z - self.b

    def max_violation(self, z):
        r = self.residuals(z)
        viol = np.zeros_like(r)
        for i, s in enumerate(self.row_sense):
            if s == LE:
                viol[i] = max(r[i], 0.0)
            elif s == GE:
                viol[i] = max(-r[i], 0.0)
            else:
                viol[i] = abs(r[i])
        bound_viol = np.maximum(-z[~self.free], 0.0) if z.size else np.zeros(0)
        return float(max(viol.max(initial=0.0), bound_viol.max(initial=0.0)))

    def permuted(self, perm):
        """Same problem with its rows reordered."""
        perm = np.asarray(perm)
        return LinearProgram(self.c, self.A[perm], self.b[perm],
                             tuple(self.row_sense[i] for i in perm), self.var_lower)


@dataclass
class LpSolution:
    status: str
    z: np.ndarray | None = None
    objective: float = float("nan")
    active_rows: tuple = ()
    duals: np.ndarray | None = None
    iterations: int = 0
    method: str = ""
    dual_objective: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# bounded revised simplex on A x = b, 0 <= x <= upper

class _IterationLimit(Exception):
    pass


def _simplex(A, b, c, upper, basis, at_upper, max_iter):
    """Phase-agnostic simplex loop.

    Returns (status, x, pi, iterations, basis, at_upper).

    ``basis`` must be a feasible starting basis for the given ``at_upper``
    pattern.  Variables with ``upper <= 0`` are treated as fixed at zero.
    """
    m, N = A.shape
    basis = np.array(basis, dtype=int)
    at_upper = at_upper.copy()
    is_basic = np.zeros(N, dtype=bool)
    is_basic[basis] = True
    fixed = upper <= 0.0
    finite_up = np.isfinite(upper)
    cscale = max(1.0, float(np.abs(c).max(initial=0.0)))
    dtol = OPT_TOL * cscale

    def factor():
        try:
            Binv = np.linalg.inv(A[:, basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        return Binv

    refactor_every = 1 if m <= SMALL_BASIS else REFACTOR_EVERY
    Binv = factor()
    since = 0
    it = 0
    fresh = True
    while True:
        if since >= refactor_every:
            Binv = factor()
            since = 0
            fresh = True
        up_cols = at_upper & ~is_basic
        rhs = b - A[:, up_cols] @ upper[up_cols] if up_cols.any() else b
        xB = Binv @ rhs
        pi = c[basis] @ Binv
        d = c - pi @ A
        cand = ~is_basic & ~fixed & ((~at_upper & (d < -dtol)) | (at_upper & (d > dtol)))
        idx = np.flatnonzero(cand)
        if idx.size == 0:
            if not fresh:
                # confirm optimality on a fresh factorization
                Binv = factor()
                since = 0
                fresh = True
                continue
            x = np.where(at_upper & ~is_basic, upper, 0.0)
            x[basis] = xB
            return OPTIMAL, x, pi, it, basis, at_upper
        if it >= max_iter:
            raise _IterationLimit(it)
        j = idx[0]
        col = Binv @ A[:, j]
        step = col if not at_upper[j] else -col
        # basic values move as xB - theta * step
        ratios = np.full(m, np.inf)
        down = step > PIVOT_TOL
        ratios[down] = np.maximum(xB[down], 0.0) / step[down]
        ub = upper[basis]
        rise = (step < -PIVOT_TOL) & np.isfinite(ub)
        ratios[rise] = np.maximum(ub[rise] - xB[rise], 0.0) / -step[rise]
        theta = ratios.min() if m else np.inf
        flip = upper[j] if finite_up[j] else np.inf
        if flip <= theta:
            if not np.isfinite(flip):
                x = np.where(at_upper & ~is_basic, upper, 0.0)
                x[basis] = xB
                return UNBOUNDED, x, pi, it, basis, at_upper
            at_upper[j] = not at_upper[j]
        else:
            ties = np.flatnonzero(ratios <= theta + 1e-12 * (1.0 + theta))
            r = ties[np.argmin(basis[ties])]
            piv = col[r]
            if abs(piv) <= PIVOT_TOL:
                raise NumericalBreakdown(f"pivot {piv:.3e} below tolerance")
            leaving = basis[r]
            at_upper[leaving] = bool(step[r] < 0)
            is_basic[leaving] = False
            basis[r] = j
            is_basic[j] = True
            at_upper[j] = False
            row = Binv[r] / piv
            Binv -= np.outer(col, row)
            Binv[r] = row
            since += 1
            fresh = False
        it += 1


def _standard_form(c, A, b, sense):
    """Rows flipped so that b >= 0, then slack/surplus columns appended."""
    m, n = A.shape
    flip = np.where(b < 0, -1.0, 1.0)
    A = A * flip[:, None]
    b = b * flip
    sense = list(sense)
    for i in range(m):
        if flip[i] < 0 and sense[i] != EQ:
            sense[i] = GE if sense[i] == LE else LE
    slack_rows = [i for i in range(m) if sense[i] != EQ]
    S = np.zeros((m, len(slack_rows)))
    start_basis = np.full(m, -1)
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if sense[i] == LE else -1.0
        if sense[i] == LE:
            start_basis[i] = n + k
    As = np.hstack([A, S])
    cs = np.concatenate([c, np.zeros(len(slack_rows))])
    return As, b, cs, flip, start_basis


def _two_phase(c, A, b, sense, upper, max_iter):
    """Solve min c.x, A x (sense) b, 0 <= x <= upper.

    Returns (status, x, y, iterations) with y the row multipliers in the
    convention ``c - A^T y >= 0`` on variables at their lower bound; y_i >= 0
    on '>=' rows and <= 0 on '<=' rows.
    """
    m, n = A.shape
    As, bs, cs, flip, start = _standard_form(c, A, b, sense)
    N0 = As.shape[1]
    ups = np.concatenate([upper, np.full(N0 - n, np.inf)])
    need_art = np.flatnonzero(start < 0)
    art = np.zeros((m, len(need_art)))
    basis = start.copy()
    for k, i in enumerate(need_art):
        art[i, k] = 1.0
        basis[i] = N0 + k
    Af = np.hstack([As, art])
    N = Af.shape[1]
    iters = 0
    at_upper = np.zeros(N, dtype=bool)
    if len(need_art):
        c1 = np.zeros(N)
        c1[N0:] = 1.0
        up1 = np.concatenate([ups, np.full(len(need_art), np.inf)])
        status, x, _, it, basis, at_upper = _simplex(Af, bs, c1, up1, basis, at_upper, max_iter)
        iters += it
        if x[N0:].sum() > FEAS_TOL * (1.0 + np.abs(bs).max(initial=0.0)):
            return INFEASIBLE, None, None, iters
        # artificials stay in the basis if they must, pinned to zero below
    c2 = np.concatenate([cs, np.zeros(N - N0)])
    up2 = np.concatenate([ups, np.zeros(N - N0)])
    status, x, pi, it, _, _ = _simplex(Af, bs, c2, up2, basis, at_upper, max_iter - iters)
    iters += it
    if status == UNBOUNDED:
        return UNBOUNDED, None, None, iters
    y = flip * pi
    return OPTIMAL, x[:n], y, iters


# ---------------------------------------------------------------------------
# public solver

def _primal_route(lp, max_iter):
    m, n = lp.shape
    free = lp.free
    A = np.hstack([lp.A, -lp.A[:, free]])
    c = np.concatenate([lp.c, -lp.c[free]])
    upper = np.full(A.shape[1], np.inf)
    status, x, y, it = _two_phase(c, A, lp.b, lp.row_sense, upper, max_iter)
    if status != OPTIMAL:
        return LpSolution(status, iterations=it, method="primal")
    z = x[:n].copy()
    z[free] -= x[n:]
    return LpSolution(OPTIMAL, z=z, duals=y, iterations=it, method="primal")


def _row_signs(sense):
    return np.array([1.0 if s == GE else -1.0 if s == LE else 0.0 for s in sense])


def _bound_columns(lp, sign):
    """(column, row) pairs of singleton columns that become dual upper bounds."""
    A = lp.A
    nz = A != 0.0
    cand = np.flatnonzero((nz.sum(axis=0) == 1) & ~lp.free & (lp.c >= 0))
    rows = nz[:, cand].argmax(axis=0)
    ok = A[rows, cand] * sign[rows] > 0
    return list(zip(cand[ok].tolist(), rows[ok].tolist()))


def _dual_route(lp, max_iter):
    """Solve the dual of ``lp`` and map its multipliers back.

    Returns None when the dual is infeasible (primal infeasible or unbounded;
    the caller decides with the primal route).
    """
    m, n = lp.shape
    A, b, c = lp.A, lp.b, lp.c
    sense = lp.row_sense
    free = lp.free
    sign = _row_signs(sense)
    eq_rows = np.flatnonzero(sign == 0.0)

    vub = np.full(m, np.inf)
    bound_col = np.full(m, -1)
    eliminated = np.zeros(n, dtype=bool)
    for j, i in _bound_columns(lp, sign):
        cap = c[j] / (A[i, j] * sign[i])
        eliminated[j] = True
        if cap < vub[i]:
            vub[i] = cap
            bound_col[i] = j
    keep = np.flatnonzero(~eliminated)

    # dual variables: v_i >= 0 with y_i = sign_i v_i, plus split pairs for '=' rows
    cols = [A[:, keep].T * np.where(sign == 0.0, 1.0, sign)[None, :]]
    obj = [-b * np.where(sign == 0.0, 1.0, sign)]
    ups = [vub]
    if len(eq_rows):
        cols.append(-A[eq_rows][:, keep].T)
        obj.append(b[eq_rows])
        ups.append(np.full(len(eq_rows), np.inf))
    DA = np.hstack(cols)
    Dc = np.concatenate(obj)
    Dup = np.concatenate(ups)
    Db = c[keep]
    Dsense = tuple(EQ if free[j] else LE for j in keep)
    status, v, mu, it = _two_phase(Dc, DA, Db, Dsense, Dup, max_iter)
    if status == INFEASIBLE:
        return None, it
    if status == UNBOUNDED:
        return LpSolution(INFEASIBLE, iterations=it, method="dual"), it
    y = np.where(sign == 0.0, 1.0, sign) * v[:m]
    if len(eq_rows):
        y[eq_rows] -= v[m:]
    z = np.zeros(n)
    z[keep] = -mu
    z[~free] = np.maximum(z[~free], 0.0)
    # eliminated slack columns: cheapest one per row takes up the shortfall
    for i in np.flatnonzero(bound_col >= 0):
        j = bound_col[i]
        rest = A[i] @ z - A[i, j] * z[j]
        z[j] = max(0.0, (b[i] - rest) / A[i, j])
    sol = LpSolution(OPTIMAL, z=z, duals=y, iterations=it, method="dual")
    return sol, it


def solve(lp: LinearProgram, method: str = "auto", max_iter: int = 50_000) -> LpSolution:
    """Minimize ``lp``.  Infeasible/unbounded come back as a status, not an error.

    ``method`` is ``"primal"``, ``"dual"`` or ``"auto"`` (dual when the problem
    has more rows than the dual would have).  Raises :class:`NumericalBreakdown` if the
    returned point fails the feasibility or duality-gap checks.
    """
    m, n = lp.shape
    if method not in ("auto", "primal", "dual"):
        raise ValueError(f"unknown method {method!r}")
    use_dual = method == "dual"
    if method == "auto":
        # the dual's basis has one row per primal column that is not a bound
        use_dual = m > n - len(_bound_columns(lp, _row_signs(lp.row_sense)))
    try:
        if use_dual:
            sol, it = _dual_route(lp, max_iter)
            if sol is None:
                sol = _primal_route(lp, max_iter)
                sol.iterations += it
        else:
            sol = _primal_route(lp, max_iter)
    except _IterationLimit as exc:
        raise NumericalBreakdown(f"iteration limit reached after {exc.args[0]} pivots") from exc
    if sol.status != OPTIMAL:
        return sol
    return _finish(lp, sol)


def _finish(lp, sol):
    z = sol.z
    bscale = 1.0 + float(np.abs(lp.b).max(initial=0.0))
    viol = lp.max_violation(z)
    if viol > FEAS_TOL * bscale:
        raise NumericalBreakdown(f"optimum violates constraints by {viol:.3e}")
    sol.objective = float(lp.c @ z)
    sol.dual_objective = float(lp.b @ sol.duals)
    gap = abs(sol.objective - sol.dual_objective)
    if gap > 1e-8 * (1.0 + abs(sol.objective)):
        raise NumericalBreakdown(f"primal/dual objectives differ by {gap:.3e}")
    r = lp.residuals(z)
    tol = FEAS_TOL * bscale
    sol.active_rows = tuple(int(i) for i in np.flatnonzero(np.abs(r) <= tol))
    return sol


def active_sample_set(sol: LpSolution, row_map) -> frozenset:
    """Distinct sample indices owning an active row.

    ``row_map`` maps row index -> sample index (a sequence or dict); rows that
    map to None are not sample constraints and are ignored.
    """
    out = set()
    for r in sol.active_rows:
        k = row_map[r] if not isinstance(row_map, dict) else row_map.get(r)
        if k is not None:
            out.add(int(k))
    return frozenset(out)
