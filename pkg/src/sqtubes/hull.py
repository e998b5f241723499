"""Planar convex hulls, point membership and the tube-intersection witness.

The minimal convex hull of a planar sample equals the intersection of all
zero-risk constant-width tubes ``a + b x +/- t``.  :func:`separating_tube`
produces, for a point outside the hull, one such tube that leaves the point
out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, FeatureMap, GeneratorSpec, parse_generator
from .lp import GE, LE, LinearProgram, solve
from .tubes import TubeModel

ORIENT_TOL = 1e-12
MARGIN_TOL = 1e-9


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class Polygon:
    """Counter-clockwise hull vertices.

    One vertex is a point and two are a segment; both set ``degenerate``.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) == 0:
            raise ValueError("polygon needs at least one vertex")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3

    def __len__(self):
        return len(self.vertices)

    def area(self) -> float:
        if self.degenerate:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def same_as(self, other: "Polygon") -> bool:
        """Equal vertex cycles (starting vertex may differ)."""
        a, b = self.vertices, other.vertices
        if a.shape != b.shape:
            return False
        for k in range(len(b)):
            if np.array_equal(a, np.roll(b, -k, axis=0)):
                return True
        return False


def convex_hull(points) -> Polygon:
    """Andrew's monotone chain; collinear boundary points are dropped."""
    P = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(P) == 0:
        raise ValueError("convex hull of an empty point set")
    if not np.all(np.isfinite(P)):
        raise ValueError("points must be finite")
    P = np.unique(P, axis=0)  # lexicographic sort, duplicates removed
    if len(P) < 3:
        return Polygon(P)
    pts = [tuple(p) for p in P]

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= ORIENT_TOL:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    return Polygon(np.array(lower[:-1] + upper[:-1]))


def contains_many(poly: Polygon, points) -> np.ndarray:
    """Boundary-inclusive membership for an (N, 2) array of points."""
    Q = np.asarray(points, dtype=float).reshape(-1, 2)
    V = poly.vertices
    if len(V) == 1:
        return np.all(np.abs(Q - V[0]) <= ORIENT_TOL, axis=1)
    if len(V) == 2:
        a, b = V
        d = b - a
        rel = Q - a
        cr = d[0] * rel[:, 1] - d[1] * rel[:, 0]
        s = rel @ d
        return (np.abs(cr) <= ORIENT_TOL) & (s >= -ORIENT_TOL) & (s <= d @ d + ORIENT_TOL)
    inside = np.ones(len(Q), dtype=bool)
    E = np.roll(V, -1, axis=0) - V
    for v, e in zip(V, E):
        cr = e[0] * (Q[:, 1] - v[1]) - e[1] * (Q[:, 0] - v[0])
        inside &= cr >= -ORIENT_TOL
    return inside


def contains(poly: Polygon, p) -> bool:
    return bool(contains_many(poly, np.asarray(p, dtype=float).reshape(1, 2))[0])


@dataclass(frozen=True)
class MassEstimate:
    fraction: float
    stderr: float
    N: int

    @property
    def halfwidth(self) -> float:
        return 1.96 * self.stderr

    def interval(self):
        return self.fraction - self.halfwidth, self.fraction + self.halfwidth


def _planar_sampler(sampler):
    if callable(sampler) and not isinstance(sampler, (str, GeneratorSpec)):
        return sampler
    spec = parse_generator(sampler)

    def draw(rng, N):
        return spec.draw(N, rng).points()
    return draw


def mass_outside(poly: Polygon, sampler, N: int, seed: int, chunk: int = 1 << 16) -> MassEstimate:
    """Monte Carlo fraction of N fresh draws that fall outside ``poly``.

    ``sampler`` is a generator name/spec or a callable ``(rng, k) -> (k, 2)``.
    Draws are made in chunks so memory stays flat for large N.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    draw = _planar_sampler(sampler)
    rng = np.random.default_rng(seed)
    outside = 0
    left = N
    while left > 0:
        k = min(chunk, left)
        outside += int(np.count_nonzero(~contains_many(poly, draw(rng, k))))
        left -= k
    p = outside / N
    return MassEstimate(p, float(np.sqrt(p * (1.0 - p) / N)), N)


def _separating_line(x, y, px, py, above: bool):
    """Max vertical margin of p over a line bounding the data (capped at 1).

    Variables (a, b, g): a + b x_i >= y_i and a + b px + g <= py when p is
    above; mirrored when p is below.  Returns (a, b, g).
    """
    n = len(x)
    s = 1.0 if above else -1.0
    A = np.zeros((n + 2, 3))
    A[:n, 0], A[:n, 1] = s, s * x
    A[n] = [s, s * px, 1.0]
    A[n + 1, 2] = 1.0
    b = np.concatenate([s * y, [s * py, 1.0]])
    sense = (GE,) * n + (LE, LE)
    # g is free so the LP stays feasible when p cannot be separated
    lp = LinearProgram(np.array([0.0, 0.0, -1.0]), A, b, sense,
                       np.full(3, -np.inf))
    sol = solve(lp)
    if not sol.optimal:
        raise RuntimeError(f"separating-line LP ended {sol.status}")
    return sol.z


def separating_tube(data: Dataset, p) -> TubeModel | None:
    """Zero-risk affine tube excluding p, or None if p is in the hull.

    The tube's upper (or lower) edge is the separating line; its width is the
    smallest that still covers every sample.
    """
    if data.d != 1:
        raise ValueError("separating tubes need planar data (one covariate)")
    px, py = (float(v) for v in p)
    x, y = data.X[:, 0], data.y
    scale = 1.0 + max(float(np.abs(y).max()), abs(py))
    fm = FeatureMap("affine", 1)
    for above in (True, False):
        a, b, g = _separating_line(x, y, px, py, above)
        if g <= MARGIN_TOL * scale:
            continue
        line = a + b * x
        gap = float(np.max(line - y)) if above else float(np.max(y - line))
        t = 0.5 * max(gap, 0.0)
        center = a - t if above else a + t
        return TubeModel(fm, np.array([center, b]), t)
    return None


def write_polygon_csv(poly: Polygon, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y"])
        for vx, vy in poly.vertices:
            w.writerow([repr(float(vx)), repr(float(vy))])
