import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqtubes.bounds import compression_epsilon
from sqtubes.dataset import Dataset, FeatureMap, generate_synthetic
from sqtubes.info import (DegenerateError, NotApplicableError, binary_entropy,
                          cond_entropy_upper, linear_uniform_entropy, linear_uniform_mi,
                          marginal_entropy, mean_log_width, mi_lower_bound)
from sqtubes.tubes import MultiTubeModel, TubeModel, fit_multi_quantile, fit_support_tube

integrate = pytest.importorskip("scipy.integrate")


def test_binary_entropy_values():
    assert binary_entropy(0.5) == pytest.approx(math.log(2), abs=1e-15)
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    e = mp.mpf("0.10494")
    ref = -e * mp.log(e) - (1 - e) * mp.log(1 - e)
    assert binary_entropy(0.10494) == pytest.approx(float(ref), abs=1e-15)
    # direct evaluation gives 0.335804 (a quoted 0.33573 is off in the 5th digit)
    assert binary_entropy(0.10494) == pytest.approx(0.335804, abs=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_binary_entropy_symmetry():
    for e in np.linspace(0, 1, 101):
        assert abs(binary_entropy(e) - binary_entropy(1 - e)) <= 1e-15
        assert 0 <= binary_entropy(e) <= math.log(2) + 1e-15


def test_mean_log_width_constant():
    data = Dataset(np.linspace(0, 1, 5)[:, None], np.zeros(5))
    fm = FeatureMap("affine", 1)
    assert mean_log_width(TubeModel(fm, [0, 0], 0.5), data) == 0.0
    assert mean_log_width(TubeModel(fm, [0, 0], 0.25), data) == pytest.approx(math.log(0.5))
    with pytest.raises(DegenerateError, match="degenerate width"):
        mean_log_width(TubeModel(fm, [0, 0], 0.0), data)


def test_mean_log_width_multi_level_matches_direct_average():
    data = generate_synthetic("hetero", 300, 4)
    fm = FeatureMap("affine", 1)
    model = fit_multi_quantile(data, fm, [15, 6, 2])
    for level in (1, 2, 3):
        lo, hi = model.bounds(data.X, level)
        direct = math.fsum(math.log(h - l) for l, h in zip(lo[::-1], hi[::-1])) / data.n
        assert mean_log_width(model, data, level) == pytest.approx(direct, abs=1e-12)


def test_mean_log_width_zero_width_level():
    fm = FeatureMap("affine", 1)
    m = MultiTubeModel(fm, [0, 0], [0.0, 1.0], [0.0, 1.0])
    data = Dataset([[0.0], [1.0]], [0.0, 0.0])
    with pytest.raises(DegenerateError):
        mean_log_width(m, data, 1)
    assert mean_log_width(m, data, 2) == pytest.approx(math.log(2.0))


@pytest.mark.parametrize("scale,expected", [(1.0, 0.0), (2.0, math.log(2))])
def test_vasicek_uniform(scale, expected):
    y = np.random.default_rng(5).uniform(0, scale, 100_000)
    assert marginal_entropy(y) == pytest.approx(expected, abs=0.02)


def test_vasicek_errors_and_determinism():
    with pytest.raises(DegenerateError):
        marginal_entropy(np.ones(10))
    with pytest.raises(ValueError):
        marginal_entropy([1.0, 2.0, 3.0])
    y = np.random.default_rng(1).normal(size=500)
    assert marginal_entropy(y) == marginal_entropy(y[::-1].copy())
    # normal entropy 0.5 log(2 pi e) ~ 1.4189, the spacing estimator is biased low
    assert marginal_entropy(np.random.default_rng(2).normal(size=50_000)) == pytest.approx(
        0.5 * math.log(2 * math.pi * math.e), abs=0.03)


def test_cond_entropy_upper():
    assert cond_entropy_upper(3.0, -0.7, 0.0) == -0.7
    assert cond_entropy_upper(1.0, 0.0, 0.1) == pytest.approx(0.1)
    eps = 0.10494
    assert cond_entropy_upper(0.5, -0.693, eps) == pytest.approx(eps * 0.5 - (1 - eps) * 0.693)
    with pytest.raises(NotApplicableError):
        cond_entropy_upper(1.0, 0.0, 0.5)


def test_mi_lower_bound_examples():
    r = mi_lower_bound(0.0, 0.0, 0.1)
    assert r.mi_lower == pytest.approx(-binary_entropy(0.1)) and r.mi_lower <= 0 and r.valid
    assert mi_lower_bound(1.0, 0.0, 0.0).mi_lower == 1.0
    bad = mi_lower_bound(1.0, 0.0, 0.7)
    assert not bad.valid and math.isfinite(bad.mi_lower)
    d = mi_lower_bound(1.2, 0.1, 0.05, {"epsilon": "compression"}).to_dict()
    assert d["provenance"] == {"epsilon": "compression"}


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 0.49))
def test_mi_identity(H, w, eps):
    r = mi_lower_bound(H, w, eps)
    assert r.mi_lower == pytest.approx(H - r.ce_upper - r.h_eps, abs=1e-12)


def test_mi_monotone_on_grid():
    eps = np.linspace(0.0, 0.49, 50)
    vals = [mi_lower_bound(2.0, 0.5, e).mi_lower for e in eps]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert mi_lower_bound(2.0, 0.4, 0.1).mi_lower > mi_lower_bound(2.0, 0.5, 0.1).mi_lower
    assert mi_lower_bound(2.1, 0.5, 0.1).mi_lower > mi_lower_bound(2.0, 0.5, 0.1).mi_lower


def trapezoid_entropy(w, u):
    """-int f log f for the density of w X + U, X ~ U(0,1), U ~ U(-u, u)."""
    def f(y):
        lo, hi = max(0.0, (y - u) / w), min(1.0, (y + u) / w)
        return max(hi - lo, 0.0) / (2 * u)

    def g(y):
        v = f(y)
        return -v * math.log(v) if v > 0 else 0.0
    pts = sorted({-u, u, w - u, w + u})
    return sum(integrate.quad(g, a, b, epsabs=1e-13, epsrel=1e-13)[0] for a, b in zip(pts, pts[1:]))


@pytest.mark.parametrize("w,u", [(2.0, 0.25), (1.0, 0.1), (0.5, 0.5), (0.3, 1.0)])
def test_analytic_entropy_against_quadrature(w, u):
    assert linear_uniform_entropy(w, u) == pytest.approx(trapezoid_entropy(w, u), abs=1e-9)


def test_linear_model_bound_below_truth():
    true_i = linear_uniform_mi(2.0, 0.25)
    assert true_i == pytest.approx(trapezoid_entropy(2.0, 0.25) - math.log(0.5), abs=1e-9)
    data = generate_synthetic("linear:w=2,u=0.25", 2000, 11)
    model = fit_support_tube(data, FeatureMap("affine", 1))
    rep = mi_lower_bound(marginal_entropy(data.y), mean_log_width(model, data),
                         compression_epsilon(0.05, 3, 2000))
    assert rep.valid and rep.mi_lower <= true_i
    assert true_i - rep.mi_lower < 0.15
