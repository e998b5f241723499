"""Entropy terms and the tube-based lower bound on mutual information.

Everything is in nats.  For a tube with zero empirical risk whose true risk is
at most eps (with eps < 1/2):

    H(Y|X) <= eps H(Y) + (1 - eps) E[log 2 s(X)]
    I      >= (1 - eps) (H(Y) - E[log 2 s(X)]) - h(eps)

with h the binary entropy.  Differential entropies may be negative; nothing is
clamped.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np


class DegenerateError(ValueError):
    """An entropy term is -inf (zero-width tube or constant sample)."""


class NotApplicableError(ValueError):
    """eps >= 1/2, where the conditional-entropy bound is not claimed."""


def binary_entropy(eps: float) -> float:
    """h(eps) = -eps log eps - (1-eps) log(1-eps), with 0 log 0 = 0."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    out = 0.0
    if eps > 0.0:
        out -= eps * math.log(eps)
    if eps < 1.0:
        out -= (1.0 - eps) * math.log1p(-eps)
    return out


def mean_log_width(model, data, level=None) -> float:
    """Average of log(interval length) over the samples' covariates.

    Constant-width tubes short-circuit to log(width) exactly.
    """
    t = getattr(model, "t", None)
    if t is not None and level is None:
        if not t > 0:
            raise DegenerateError("degenerate width, entropy bound -inf")
        return math.log(2.0 * t)
    lo, hi = model.bounds(data.X, level)
    width = hi - lo
    if np.any(width <= 0):
        raise DegenerateError("degenerate width, entropy bound -inf")
    if np.all(width == width[0]):
        return math.log(float(width[0]))
    return float(np.mean(np.log(width)))


def marginal_entropy(y, m_spacing="auto") -> float:
    """Vasicek m-spacing estimate of the differential entropy of y.

    (1/n) sum_i log( n / (2m) (y_(i+m) - y_(i-m)) ), order statistics clamped
    to y_(1) and y_(n) at the ends; m = floor(sqrt(n)) when ``"auto"``.
    """
    y = np.sort(np.asarray(y, dtype=float).ravel())
    n = y.size
    if n < 4:
        raise ValueError("spacing estimator needs at least 4 samples")
    m = int(math.isqrt(n)) if m_spacing == "auto" else int(m_spacing)
    if not 1 <= m < n:
        raise ValueError(f"spacing m must lie in [1, n), got {m}")
    i = np.arange(n)
    gaps = y[np.minimum(i + m, n - 1)] - y[np.maximum(i - m, 0)]
    if np.any(gaps <= 0):
        if y[-1] == y[0]:
            raise DegenerateError("all samples identical, entropy -inf")
        raise DegenerateError("tied samples within a spacing window, entropy -inf")
    return float(np.mean(np.log(n / (2.0 * m) * gaps)))


def cond_entropy_upper(H_Y: float, mean_log_width: float, eps: float,
                       allow_invalid: bool = False) -> float:
    """eps H(Y) + (1 - eps) E[log 2 s(X)]."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    if eps >= 0.5 and not allow_invalid:
        raise NotApplicableError(f"bound needs eps < 0.5, got {eps}")
    return eps * H_Y + (1.0 - eps) * mean_log_width


@dataclass
class MiReport:
    H_Y: float
    mean_log_width: float
    epsilon: float
    h_eps: float
    ce_upper: float
    mi_lower: float
    valid: bool
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def mi_lower_bound(H_Y: float, mean_log_width: float, eps: float,
                   provenance: dict | None = None) -> MiReport:
    """(1 - eps)(H(Y) - E[log 2 s(X)]) - h(eps); ``valid`` iff eps < 1/2."""
    h = binary_entropy(eps)
    ce = cond_entropy_upper(H_Y, mean_log_width, eps, allow_invalid=True)
    mi = (1.0 - eps) * (H_Y - mean_log_width) - h
    return MiReport(H_Y, mean_log_width, eps, h, ce, mi, eps < 0.5, dict(provenance or {}))


# ---------------------------------------------------------------------------
# analytic references for the synthetic generators

def linear_uniform_entropy(w: float, u: float) -> float:
    """Differential entropy of Y = w X + U, X ~ U(0,1), U ~ U(-u, u).

    The density is a trapezoid; for a = |w|, r = 2u (r <= a) the entropy is
    log(a) + r / (2a), and symmetric in the roles of a and r.
    """
    a, r = abs(w), 2.0 * u
    if a == 0 and r == 0:
        return -math.inf
    lo, hi = min(a, r), max(a, r)
    if lo == 0:
        return math.log(hi)
    return math.log(hi) + lo / (2.0 * hi)


def linear_uniform_mi(w: float, u: float) -> float:
    """I = H(Y) - H(Y|X) with H(Y|X) = log(2u)."""
    if u <= 0:
        return math.inf
    return linear_uniform_entropy(w, u) - math.log(2.0 * u)
