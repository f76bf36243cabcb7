"""Empirical laws, estimators and the scaled forest statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

# ------------------------------------------------------------ distributions


@dataclass
class EmpiricalDist:
    """Sorted continuous samples plus an optional register of point masses."""

    samples: np.ndarray
    atoms: dict[float, int] = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=float))
        self.atoms = {float(k): int(v) for k, v in self.atoms.items() if v > 0}

    @classmethod
    def from_values(cls, values, atom_at: float | None = None) -> "EmpiricalDist":
        """Split ``values`` into continuous samples and exact hits of ``atom_at``."""
        v = np.asarray(values, dtype=float)
        if atom_at is None:
            return cls(v)
        hit = v == atom_at
        return cls(v[~hit], {atom_at: int(hit.sum())})

    @property
    def n(self) -> int:
        return len(self.samples) + sum(self.atoms.values())


def empirical_ccdf(d: EmpiricalDist, r) -> np.ndarray | float:
    """Fraction of the sample ``>= r`` (atoms included)."""
    if d.n == 0:
        raise ValueError("empty distribution")
    r = np.asarray(r, dtype=float)
    cnt = len(d.samples) - np.searchsorted(d.samples, r, side="left")
    for a, c in d.atoms.items():
        cnt = cnt + np.where(a >= r, c, 0)
    out = cnt / d.n
    return float(out) if out.ndim == 0 else out


def ks_distance(d: EmpiricalDist, ref_ccdf: Callable) -> float:
    """Kolmogorov distance to a reference CCDF ``r -> P(L >= r)``.

    The supremum is taken over both one-sided limits at every sample point;
    at an atom ``a`` the comparison uses ``P(L >= a)`` and ``P(L > a)``
    separately (the latter as the reference evaluated just above ``a``).
    """
    if d.n == 0:
        raise ValueError("empty distribution")
    pts = np.unique(np.concatenate([d.samples, np.array(list(d.atoms), dtype=float)]))
    above = np.nextafter(pts, np.inf)
    emp_at = np.asarray(empirical_ccdf(d, pts), dtype=float)
    emp_above = np.asarray(empirical_ccdf(d, above), dtype=float)
    ref_at = np.asarray(ref_ccdf(pts), dtype=float)
    ref_above = np.asarray(ref_ccdf(above), dtype=float)
    return float(max(np.max(np.abs(emp_at - ref_at)), np.max(np.abs(emp_above - ref_above))))


def ks_threshold(n: int, delta: float = 1e-3) -> float:
    return max(0.01, 3 * math.sqrt(math.log(2 / delta) / (2 * n)))


# ---------------------------------------------------------------- estimators


@dataclass
class Estimator:
    """Running ``(count, sum, sum of squares)``; merging is exact pooling."""

    count: int = 0
    total: float = 0.0
    sumsq: float = 0.0

    def add(self, v: float) -> None:
        self.count += 1
        self.total += float(v)
        self.sumsq += float(v) ** 2

    def extend(self, values) -> "Estimator":
        v = np.asarray(values, dtype=float)
        self.count += int(v.size)
        self.total += float(v.sum())
        self.sumsq += float((v * v).sum())
        return self

    @classmethod
    def of(cls, values) -> "Estimator":
        return cls().extend(values)

    def merge(self, other: "Estimator") -> "Estimator":
        return Estimator(self.count + other.count, self.total + other.total, self.sumsq + other.sumsq)

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("no samples")
        return self.total / self.count

    @property
    def variance(self) -> float:
        if self.count < 2:
            return math.nan
        m = self.mean
        return max(self.sumsq - self.count * m * m, 0.0) / (self.count - 1)

    @property
    def se(self) -> float:
        return math.sqrt(self.variance / self.count)


@dataclass
class BatchMeans:
    mean: float
    halfwidth: float
    n: int
    n_batches: int

    @property
    def se(self) -> float:
        return self.halfwidth / stats.t.ppf(0.975, self.n_batches - 1)


def batch_means(x, n_batches: int = 40) -> BatchMeans:
    """95% batch-means interval for a serially correlated sequence."""
    x = np.asarray(x, dtype=float)
    if n_batches < 30:
        raise ValueError("use at least 30 batches")
    size = len(x) // n_batches
    if size < 1:
        raise ValueError("sequence shorter than the number of batches")
    b = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    hw = stats.t.ppf(0.975, n_batches - 1) * b.std(ddof=1) / math.sqrt(n_batches)
    return BatchMeans(float(x.mean()), float(hw), len(x), n_batches)


# --------------------------------------------------------- forest statistics


def _require_rst(f) -> None:
    if f.kind != "rst":
        raise ValueError("needs a radial tree")


def _certified_radius(f) -> float:
    w = f.points.window
    if w is None:
        return math.inf
    if hasattr(w, "radius"):
        return w.radius
    return min(-w.xmin, w.xmax, -w.ymin, w.ymax)


def shape_statistic(f, k: int, p: float | None = None, eps: float = 0.0) -> float:
    """``|T(k)| / k^2`` where ``T(k)`` is the set of generations ``<= k``.

    When ``p`` is given the window must contain ``B(O, (1 + eps) k p)``.
    """
    _require_rst(f)
    if k < 1:
        raise ValueError("k must be >= 1")
    if p is not None and (1 + eps) * k * p > _certified_radius(f):
        raise ValueError(f"k = {k} too large for the window")
    return len(f.generation_set(k)) / k ** 2


def sandwich_holds(f, k: int, p: float, eps: float) -> bool:
    """``N ∩ B(O, (1-eps) k p) ⊆ T(k) ⊆ B(O, (1+eps) k p)``."""
    _require_rst(f)
    g = f.generations()
    r = f.points.radii
    inner = r < (1 - eps) * k * p
    member = (g >= 0) & (g <= k)
    return bool(np.all(member[inner]) and np.all(r[member] <= (1 + eps) * k * p))


def spatial_average(f, x: float, alpha: float) -> float:
    """``sum_{|X| <= x} |X - A(X)|^alpha / x^2``; at ``alpha = 0`` every point
    (the origin included) counts once."""
    _require_rst(f)
    if x > _certified_radius(f):
        raise ValueError("x exceeds the window")
    r = f.points.radii
    inside = r <= x
    if alpha == 0:
        return float(np.count_nonzero(inside)) / x ** 2
    ok = inside & f.valid
    return float(np.sum(f.length[ok] ** alpha)) / x ** 2


def crossing_intensity(f, r: float) -> float:
    """``C(r) / (2 pi r)`` for one sample."""
    return f.crossing_count(r) / (2 * math.pi * r)


def crossings_from_degrees(f, radii) -> np.ndarray:
    """``C(x) = D(O) + sum_{0 < |T| <= x} (D(T) - 2)`` at each radius."""
    _require_rst(f)
    deg = f.degrees()
    r = f.points.radii
    order = np.argsort(r[1:], kind="stable") + 1
    cum = deg[0] + np.concatenate([[0], np.cumsum(deg[order] - 2)])
    idx = np.searchsorted(r[order], np.asarray(radii, dtype=float), side="right")
    return cum[idx]
