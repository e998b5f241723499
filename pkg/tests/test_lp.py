import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqtubes.lp import (EQ, GE, LE, LinearProgram, active_sample_set, solve)

scipy_opt = pytest.importorskip("scipy.optimize")


def vertex_oracle(lp: LinearProgram):
    """Min objective over all basic feasible solutions of a bounded LP.

    Returns None when no vertex is feasible.
    """
    m, n = lp.shape
    rows, rhs = [], []
    for a, b, s in zip(lp.A, lp.b, lp.row_sense):
        rows.append(a)
        rhs.append(b)
    bound_rows = [np.eye(n)[j] for j in range(n) if lp.var_lower[j] == 0]
    G = np.array(rows + bound_rows)
    h = np.array(rhs + [0.0] * len(bound_rows))
    eq = [i for i, s in enumerate(lp.row_sense) if s == EQ]
    best = None
    for S in itertools.combinations(range(len(G)), n):
        if not set(eq) <= set(S):
            continue
        M = G[list(S)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        z = np.linalg.solve(M, h[list(S)])
        if lp.max_violation(z) > 1e-9 * (1 + np.abs(lp.b).max()):
            continue
        val = float(lp.c @ z)
        best = val if best is None else min(best, val)
    return best


def random_small_lp(rng):
    n = int(rng.integers(1, 5))
    m_rand = int(rng.integers(1, 8 - n + 1))
    integer = rng.random() < 0.5
    if integer:
        A = rng.integers(-3, 4, (m_rand, n)).astype(float)
        b = rng.integers(-3, 6, m_rand).astype(float)
        c = rng.integers(-3, 4, n).astype(float)
    else:
        A = rng.normal(size=(m_rand, n))
        b = rng.normal(size=m_rand) + 1.0
        c = rng.normal(size=n)
    sense = list(rng.choice([LE, GE, EQ], size=m_rand, p=[0.45, 0.4, 0.15]))
    # box rows keep every feasible instance bounded with vertices
    A = np.vstack([A, np.eye(n)])
    b = np.concatenate([b, np.full(n, 10.0)])
    sense += [LE] * n
    return LinearProgram(c, A, b, tuple(sense))


def test_vertex_enumeration_oracle_500():
    rng = np.random.default_rng(2024)
    mismatches = []
    statuses = {"optimal": 0, "infeasible": 0}
    for k in range(500):
        lp = random_small_lp(rng)
        ref = vertex_oracle(lp)
        sol = solve(lp)
        statuses[sol.status] = statuses.get(sol.status, 0) + 1
        if ref is None:
            if sol.status != "infeasible":
                mismatches.append((k, "expected infeasible", sol.status))
        elif sol.status != "optimal" or abs(sol.objective - ref) > 1e-8 * (1 + abs(ref)):
            mismatches.append((k, ref, sol.status, sol.objective))
    assert not mismatches, mismatches[:5]
    assert statuses["optimal"] > 200 and statuses["infeasible"] > 10


def beale():
    c = [-0.75, 20.0, -0.5, 6.0]
    A = [[0.25, -8.0, -1.0, 9.0],
         [0.5, -12.0, -0.5, 3.0],
         [0.0, 0.0, 1.0, 0.0]]
    return LinearProgram(c, A, [0.0, 0.0, 1.0], (LE, LE, LE))


@pytest.mark.parametrize("method", ["primal", "dual", "auto"])
def test_beale_cycling_example(method):
    sol = solve(beale(), method=method)
    assert sol.optimal
    assert sol.objective == pytest.approx(-1.25, abs=1e-12)
    assert sol.iterations <= 10_000


def kuhn():
    # Kuhn's degenerate example, cycles under the textbook largest-coefficient rule
    c = [-2.0, -3.0, 1.0, 12.0]
    A = [[-2.0, -9.0, 1.0, 9.0],
         [1 / 3, 1.0, -1 / 3, -2.0],
         [2.0, 3.0, -1.0, -12.0]]
    return LinearProgram(c, A, [0.0, 0.0, 2.0], (LE, LE, LE))


@pytest.mark.parametrize("method", ["primal", "dual"])
def test_kuhn_example_terminates(method):
    lp = kuhn()
    sol = solve(lp, method=method)
    ref = scipy_opt.linprog(lp.c, A_ub=lp.A, b_ub=lp.b, method="highs")
    assert sol.status == ("optimal" if ref.status == 0 else "unbounded")
    if sol.optimal:
        assert sol.objective == pytest.approx(ref.fun, abs=1e-9)
    assert sol.iterations <= 10_000


def test_massively_degenerate_assignment():
    # 6x6 assignment polytope: every vertex is highly degenerate
    k = 6
    rng = np.random.default_rng(3)
    cost = rng.integers(0, 5, (k, k)).astype(float).ravel()
    rows, b = [], []
    for i in range(k):
        r = np.zeros((k, k)); r[i, :] = 1; rows.append(r.ravel()); b.append(1.0)
        r = np.zeros((k, k)); r[:, i] = 1; rows.append(r.ravel()); b.append(1.0)
    lp = LinearProgram(cost, np.array(rows), np.array(b), (EQ,) * (2 * k))
    ref = scipy_opt.linprog(cost, A_eq=np.array(rows), b_eq=b, method="highs")
    for method in ("primal", "dual"):
        sol = solve(lp, method=method)
        assert sol.optimal and sol.iterations <= 10_000
        assert sol.objective == pytest.approx(ref.fun, abs=1e-9)


def test_infeasible_and_unbounded():
    inf = LinearProgram([1.0], [[1.0], [1.0]], [1.0, 2.0], (LE, GE))
    assert solve(inf).status == "infeasible"
    unb = LinearProgram([-1.0, 0.0], [[1.0, -1.0]], [1.0], (LE,))
    assert solve(unb).status == "unbounded"
    free = LinearProgram([1.0], [[1.0]], [5.0], (LE,), [-np.inf])
    assert solve(free).status == "unbounded"


def test_free_variables_and_equality():
    lp = LinearProgram([1.0, 1.0], [[1.0, -1.0], [1.0, 1.0]], [-4.0, -2.0], (EQ, GE),
                       [-np.inf, -np.inf])
    sol = solve(lp)
    assert sol.optimal and sol.objective == pytest.approx(-2.0)
    np.testing.assert_allclose(sol.z, [-3.0, 1.0], atol=1e-12)


def test_tall_tube_like_lp_matches_highs():
    rng = np.random.default_rng(9)
    n, p = 300, 3
    Phi = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    y = Phi @ rng.normal(size=p) + rng.uniform(-1, 1, n)
    A = np.zeros((2 * n, p + 1))
    A[0::2, :p], A[0::2, p] = Phi, 1.0
    A[1::2, :p], A[1::2, p] = -Phi, 1.0
    b = np.empty(2 * n); b[0::2], b[1::2] = y, -y
    lp = LinearProgram(np.r_[np.zeros(p), 1.0], A, b, (GE,) * (2 * n),
                       np.r_[np.full(p, -np.inf), 0.0])
    ref = scipy_opt.linprog(lp.c, A_ub=-A, b_ub=-b,
                            bounds=[(None, None)] * p + [(0, None)], method="highs")
    for method in ("primal", "dual", "auto"):
        sol = solve(lp, method=method)
        assert sol.objective == pytest.approx(ref.fun, abs=1e-9)
    assert solve(lp).method == "dual"


def test_duals_certify_optimality():
    rng = np.random.default_rng(11)
    for _ in range(50):
        lp = random_small_lp(rng)
        sol = solve(lp)
        if not sol.optimal:
            continue
        y = sol.duals
        for s, yi in zip(lp.row_sense, y):
            if s == GE:
                assert yi >= -1e-9
            elif s == LE:
                assert yi <= 1e-9
        # reduced costs of nonnegative variables are >= 0, complementary to z
        red = lp.c - lp.A.T @ y
        assert np.all(red >= -1e-8)
        assert np.all(np.abs(red * sol.z) <= 1e-7)
        assert sol.dual_objective == pytest.approx(sol.objective, abs=1e-8)
        slack = lp.residuals(sol.z)
        assert np.all(np.abs(y * slack) <= 1e-7)


def test_active_sample_set_mapping():
    lp = LinearProgram([1.0], [[1.0], [1.0], [-1.0]], [1.0, 0.0, -5.0], (GE, GE, GE))
    sol = solve(lp)
    assert sol.active_rows == (0,)
    assert active_sample_set(sol, [7, 8, 9]) == {7}
    assert active_sample_set(sol, {0: None}) == frozenset()


def test_validation_errors():
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [1.0], ("<",))
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[np.nan]], [1.0], (LE,))
    with pytest.raises(ValueError):
        LinearProgram([1.0], [[1.0]], [1.0], (LE,), [1.0])
    with pytest.raises(ValueError):
        solve(beale(), method="simplex")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_row_order_does_not_change_optimum(seed):
    rng = np.random.default_rng(seed)
    lp = random_small_lp(rng)
    a = solve(lp)
    b = solve(lp.permuted(rng.permutation(lp.shape[0])))
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_primal_and_dual_routes_agree(seed):
    lp = random_small_lp(np.random.default_rng(seed))
    a, b = solve(lp, method="primal"), solve(lp, method="dual")
    assert a.status == b.status
    if a.optimal:
        assert a.objective == pytest.approx(b.objective, abs=1e-9)
