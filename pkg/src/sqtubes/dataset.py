"""Samples, CSV ingestion, synthetic generators and feature maps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class DataError(ValueError):
    """Bad input data (unreadable file, malformed CSV, non-finite values)."""


class Sample(NamedTuple):
    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """n paired observations (X_i, Y_i), X_i in R^d.  Immutable."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(f"X has shape {X.shape} but y has {y.shape[0]} entries")
        if y.shape[0] < 1:
            raise DataError("a dataset needs at least one sample")
        if X.shape[1] < 1:
            raise DataError("a dataset needs at least one covariate")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or Inf")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.n

    def __iter__(self):
        for xi, yi in zip(self.X, self.y):
            yield Sample(xi, float(yi))

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(sorted(idx), dtype=int)
        return Dataset(self.X[idx], self.y[idx])

    def points(self) -> np.ndarray:
        """(n, 2) array of planar points (x, y); only for d = 1."""
        if self.d != 1:
            raise DataError(f"planar view needs d = 1, got d = {self.d}")
        return np.column_stack([self.X[:, 0], self.y])

    def equals(self, other: "Dataset") -> bool:
        return (self.X.shape == other.X.shape
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))


# ---------------------------------------------------------------------------
# CSV

def load_csv(path) -> Dataset:
    """Read a ``x1,...,xd,y`` CSV file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, expected header x1,...,xd,y")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"x{k}" for k in range(1, d + 1)] + ["y"]
    if d < 1 or header != expected:
        raise DataError(f"{path}: malformed header {','.join(header)!r}, "
                        f"expected {','.join(expected) if d >= 1 else 'x1,y'}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != d + 1:
            raise DataError(f"{path}: row {lineno} has {len(row)} columns, expected {d + 1}")
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {lineno}, column {col} "
                                f"({header[col - 1]}): non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: row {lineno}, column {col}: non-finite value {cell!r}")
            vals.append(v)
        data.append(vals)
    if not data:
        raise DataError(f"{path}: no data rows")
    arr = np.array(data, dtype=float)
    return Dataset(arr[:, :d], arr[:, d])


def write_csv(data: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{k}" for k in range(1, data.d + 1)] + ["y"])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


# ---------------------------------------------------------------------------
# feature maps

FEATURE_KINDS = ("intercept", "affine", "rbf")


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Map x in R^d to a feature vector whose coordinate 0 is the constant 1.

    * ``intercept``: (1,)
    * ``affine``: (1, x_1, ..., x_d)
    * ``rbf``: (1, exp(-|x - c_k|^2 / (2 h^2)) for each center c_k)
    """

    kind: str
    d: int = 1
    centers: np.ndarray | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("covariate dimension must be >= 1")
        if self.kind == "rbf":
            C = np.array(self.centers, dtype=float)
            if C.ndim == 1:
                C = C[:, None]
            if C.size == 0 or C.shape[1] != self.d:
                raise ValueError("rbf map needs at least one center of dimension d")
            if self.bandwidth is None or not self.bandwidth > 0:
                raise ValueError("rbf bandwidth must be positive")
            C.setflags(write=False)
            object.__setattr__(self, "centers", C)
            object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def p(self) -> int:
        if self.kind == "intercept":
            return 1
        if self.kind == "affine":
            return 1 + self.d
        return 1 + self.centers.shape[0]

    def expand_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.d == 1 else X[None, :]
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d}-dimensional covariates, got {X.shape[1]}")
        ones = np.ones((X.shape[0], 1))
        if self.kind == "intercept":
            return ones
        if self.kind == "affine":
            return np.hstack([ones, X])
        sq = ((X[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        return np.hstack([ones, np.exp(-sq / (2.0 * self.bandwidth ** 2))])

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "rbf":
            out["centers"] = self.centers.tolist()
            out["bandwidth"] = self.bandwidth
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureMap":
        return cls(doc["kind"], int(doc.get("d", 1)), doc.get("centers"), doc.get("bandwidth"))


def expand(fm: FeatureMap, x) -> np.ndarray:
    """Feature vector of a single covariate vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != fm.d:
        raise ValueError(f"expected a covariate of length {fm.d}, got shape {x.shape}")
    return fm.expand_many(x[None, :])[0]


def rbf_grid(X, k: int, bandwidth: float | None = None) -> FeatureMap:
    """k Gaussian bumps equally spaced over the observed x-range (d = 1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError("automatic rbf centers are only defined for d = 1")
        X = X[:, 0]
    if k < 1:
        raise ValueError("need at least one rbf center")
    lo, hi = float(X.min()), float(X.max())
    centers = np.linspace(lo, hi, k) if k > 1 else np.array([(lo + hi) / 2])
    if bandwidth is None:
        spacing = (hi - lo) / (k - 1) if k > 1 else hi - lo
        bandwidth = spacing if spacing > 0 else 1.0
    return FeatureMap("rbf", 1, centers[:, None], bandwidth)


def parse_features(text: str, X=None, d: int = 1) -> FeatureMap:
    """``intercept``, ``affine`` (alias ``linear``) or ``rbf:K``."""
    text = text.strip().lower()
    if text == "intercept":
        return FeatureMap("intercept", d)
    if text in ("affine", "linear"):
        return FeatureMap("affine", d)
    if text.startswith("rbf:"):
        try:
            k = int(text[4:])
        except ValueError:
            raise ValueError(f"bad rbf size in {text!r}") from None
        if X is None:
            raise ValueError("rbf features need data to place the centers")
        return rbf_grid(X, k)
    raise ValueError(f"unknown feature map {text!r}; use intercept, affine or rbf:K")


# ---------------------------------------------------------------------------
# synthetic generators

@dataclass(frozen=True)
class GeneratorSpec:
    """A named synthetic distribution with its parameters.

    linear       x ~ U(0,1), y = b + w x + U(-u, u)
    independent  x ~ U(0,1), y ~ U(0,1) independent of x
    hetero       x ~ U(0,1), y = b + w x + u (0.5 + x) U(-1, 1)
    wave         x ~ U(0,1), y = sin(2 pi x) + (0.1 + 0.3 x) N(0,1); a stand-in
                 for the illustrative curved scatter, not real data
    disk         (x, y) uniform on the unit disk
    square       (x, y) uniform on [0, 1]^2
    """

    name: str
    params: dict = field(default_factory=dict)

    DEFAULTS = {
        "linear": {"w": 2.0, "b": 0.0, "u": 0.25},
        "independent": {},
        "hetero": {"w": 1.0, "b": 0.0, "u": 0.2},
        "wave": {},
        "disk": {},
        "square": {},
    }

    def __post_init__(self):
        if self.name not in self.DEFAULTS:
            raise ValueError(f"unknown generator {self.name!r}; "
                             f"choose from {', '.join(self.DEFAULTS)}")
        allowed = self.DEFAULTS[self.name]
        extra = set(self.params) - set(allowed)
        if extra:
            raise ValueError(f"generator {self.name!r} has no parameter(s) {sorted(extra)}")
        merged = {**allowed, **{k: float(v) for k, v in self.params.items()}}
        if merged.get("u", 0.0) < 0:
            raise ValueError("noise half-width u must be >= 0")
        object.__setattr__(self, "params", merged)

    @property
    def bounded(self) -> bool:
        """Bounded conditional support, so zero-risk support tubes exist."""
        return self.name != "wave"

    def __str__(self):
        if not self.params:
            return self.name
        return self.name + ":" + ",".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))

    def draw(self, n: int, rng: np.random.Generator) -> Dataset:
        if n < 1:
            raise ValueError("n must be >= 1")
        p = self.params
        if self.name == "linear":
            x = rng.uniform(0.0, 1.0, n)
            y = p["b"] + p["w"] * x + rng.uniform(-p["u"], p["u"], n)
        elif self.name == "independent":
            x = rng.uniform(0.0, 1.0, n)
            y = rng.uniform(0.0, 1.0, n)
        elif self.name == "hetero":
            x = rng.uniform(0.0, 1.0, n)
            y = p["b"] + p["w"] * x + p["u"] * (0.5 + x) * rng.uniform(-1.0, 1.0, n)
        elif self.name == "wave":
            x = rng.uniform(0.0, 1.0, n)
            y = np.sin(2 * np.pi * x) + (0.1 + 0.3 * x) * rng.standard_normal(n)
        elif self.name == "disk":
            r = np.sqrt(rng.uniform(0.0, 1.0, n))
            a = rng.uniform(0.0, 2 * np.pi, n)
            x, y = r * np.cos(a), r * np.sin(a)
        else:
            x = rng.uniform(0.0, 1.0, n)
            y = rng.uniform(0.0, 1.0, n)
        return Dataset(x[:, None], y)


def parse_generator(text) -> GeneratorSpec:
    """``name`` or ``name:k=v,k=v`` (e.g. ``linear:w=2,u=0.25``)."""
    if isinstance(text, GeneratorSpec):
        return text
    name, _, rest = str(text).strip().partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq:
                raise ValueError(f"bad generator parameter {item!r} (expected k=v)")
            try:
                params[k.strip()] = float(v)
            except ValueError:
                raise ValueError(f"generator parameter {k.strip()!r} is not a number") from None
    return GeneratorSpec(name.strip(), params)


def generate_synthetic(spec, n: int, seed: int) -> Dataset:
    """Deterministic draw of n samples for a fixed (spec, n, seed)."""
    spec = parse_generator(spec)
    return spec.draw(n, np.random.default_rng(seed))
