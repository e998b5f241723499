"""Closed-form generalization bounds for tubes determined by D samples.

All logarithms are natural.  Hypothesis counts come in two flavours:

``exact``  K = C(n, D) (2^(D-1) - 1), the number of ways to pick D samples
           and split them between the upper and lower boundary
``loose``  K = (2 n e / D)^D, the usual upper estimate of the above

The loose count is the default: it is the one that reproduces the worked
tolerance example (n = 200, D = 3, delta = 0.05 gives 0.1049).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

MODES = ("exact", "loose")
HULL_CONSTANT = 1.5122
HULL_D = 3


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _check_delta(delta):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def log_count_tubes(n: int, D: int, mode: str = "loose") -> float:
    """Natural log of the hypothesis count; ``-inf`` when the count is 0."""
    _check_mode(mode)
    if not 1 <= D <= n:
        raise ValueError(f"need 1 <= D <= n, got D={D}, n={n}")
    if mode == "loose":
        return D * math.log(2.0 * n * math.e / D)
    if D == 1:
        return -math.inf
    log_binom = math.lgamma(n + 1) - math.lgamma(D + 1) - math.lgamma(n - D + 1)
    # log(2^(D-1) - 1) without overflow
    log_split = (D - 1) * math.log(2.0) + math.log1p(-(2.0 ** -(D - 1)))
    return log_binom + log_split


def count_tubes(n: int, D: int, mode: str = "loose") -> float:
    """Number of distinct tubes compressible to D of n samples.

    The exact count uses integer arithmetic when the result fits in a float
    and the log-space value otherwise.
    """
    _check_mode(mode)
    if not 1 <= D <= n:
        raise ValueError(f"need 1 <= D <= n, got D={D}, n={n}")
    if mode == "exact":
        k = math.comb(n, D) * (2 ** (D - 1) - 1)
        try:
            return float(k)
        except OverflowError:
            return math.inf
    logk = log_count_tubes(n, D, mode)
    return math.exp(logk) if logk < 709.0 else math.inf


def compression_epsilon(delta: float, D: int, n: int, mode: str = "loose") -> float:
    """Risk level that a zero-empirical-risk tube exceeds with probability < delta.

    eps = (log K(n, D) + log(1/delta)) / (n - D), clamped to [0, 1].
    """
    _check_delta(delta)
    if n <= D:
        raise ValueError(f"compression bound needs n > D, got n={n}, D={D}")
    logk = log_count_tubes(n, D, mode)
    return _clamp01((logk + math.log(1.0 / delta)) / (n - D))


def _log_tail(eps: float, n: int) -> float:
    """log( n (1-eps)^(n-1) - (n-1) (1-eps)^n ) = log((1-eps)^(n-1) (1 + (n-1) eps))."""
    if eps >= 1.0:
        return -math.inf
    return (n - 1) * math.log1p(-eps) + math.log1p((n - 1) * eps)


def order_stat_confidence(epsilon: float, n: int, D: int, mode: str = "loose") -> float:
    """Union bound over K tubes of the tolerance-interval tail.

    P(risk >= eps) <= K (n (1-eps)^(n-1) - (n-1) (1-eps)^n), clamped to [0, 1].
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    if n < 2:
        raise ValueError("order-statistics bound needs n >= 2")
    logk = log_count_tubes(n, D, mode)
    val = logk + _log_tail(epsilon, n)
    if val == -math.inf:
        return 0.0
    return _clamp01(math.exp(min(val, 1.0)))


def order_stat_epsilon(delta: float, n: int, D: int, mode: str = "loose",
                       tol: float = 1e-10) -> float:
    """Smallest eps with order_stat_confidence(eps) <= delta, by bisection."""
    _check_delta(delta)
    if n < 2:
        raise ValueError("order-statistics bound needs n >= 2")
    logk = log_count_tubes(n, D, mode)
    target = math.log(delta)

    def excess(eps):
        return logk + _log_tail(eps, n) - target

    if excess(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def hull_mass_bound(n: int, delta: float) -> float:
    """Mass outside the planar convex hull of n samples, w.p. >= 1 - delta.

    (3 log n - 1.5122 - log delta) / (n - 3), clamped to [0, 1].
    """
    _check_delta(delta)
    if n <= HULL_D:
        raise ValueError(f"hull bound needs n > 3, got n={n}")
    return _clamp01((3.0 * math.log(n) - HULL_CONSTANT - math.log(delta)) / (n - HULL_D))


def qt_deviation_slack(delta: float, D: int, n: int, variant: str = "corrected-sign") -> float:
    """Deviation term 2 sqrt((2 D log(2ne/D) -/+ 2 log(8/delta)) / n).

    ``verbatim`` subtracts the confidence term as printed (radicand clamped at
    0); ``corrected-sign`` adds it, which is the form that grows with the
    requested confidence.  The value is a slack on a difference of risks and is
    not clamped to [0, 1].  delta may go up to 8, where the log term vanishes.
    """
    if variant not in ("verbatim", "corrected-sign"):
        raise ValueError(f"unknown variant {variant!r}")
    if not 0.0 < delta <= 8.0:
        raise ValueError(f"delta must lie in (0, 8], got {delta}")
    if not 1 <= D < n:
        raise ValueError(f"need 1 <= D < n, got D={D}, n={n}")
    cap = 2.0 * D * math.log(2.0 * n * math.e / D)
    conf = 2.0 * math.log(8.0 / delta)
    rad = cap - conf if variant == "verbatim" else cap + conf
    return 2.0 * math.sqrt(max(rad, 0.0) / n)


@dataclass
class BoundReport:
    kind: str
    epsilon: float
    delta: float
    n: int
    D: int
    counting_mode: str = "loose"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(kind: str, n: int, delta: float, D: int = 3, mode: str = "loose") -> BoundReport:
    """Evaluate one bound family and collect the side values worth reporting."""
    if kind == "compression":
        eps = compression_epsilon(delta, D, n, mode)
        other = "exact" if mode == "loose" else "loose"
        extra = {"epsilon_" + other: compression_epsilon(delta, D, n, other),
                 "count": count_tubes(n, D, mode),
                 "note": "loose counting with natural logs reproduces 0.1049 at "
                         "n=200, D=3, delta=0.05; exact counting gives a smaller value"}
        return BoundReport(kind, eps, delta, n, D, mode, extra)
    if kind == "orderstat":
        eps = order_stat_epsilon(delta, n, D, mode)
        extra = {"compression_epsilon": compression_epsilon(delta, D, n, mode),
                 "confidence_at_epsilon": order_stat_confidence(eps, n, D, mode)}
        return BoundReport(kind, eps, delta, n, D, mode, extra)
    if kind == "hull":
        eps = hull_mass_bound(n, delta)
        extra = {"compression_D3_exact": compression_epsilon(delta, HULL_D, n, "exact"),
                 "compression_D3_loose": compression_epsilon(delta, HULL_D, n, "loose"),
                 "constant": HULL_CONSTANT}
        return BoundReport(kind, eps, delta, n, HULL_D, mode, extra)
    if kind == "qt":
        slack = qt_deviation_slack(delta, D, n, "corrected-sign")
        extra = {"verbatim": qt_deviation_slack(delta, D, n, "verbatim"),
                 "corrected_sign": slack}
        return BoundReport(kind, _clamp01(slack), delta, n, D, "loose", extra)
    raise ValueError(f"unknown bound kind {kind!r}")
