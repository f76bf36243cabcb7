"""Planar point-process samples.

A :class:`PointSet` is an immutable finite sample with its window, intensity
and provenance (seed, replicate).  Samplers are pure functions of a
:class:`SamplerConfig` and a replicate id.  :class:`PoissonField` realises a
Poisson process on the whole plane lazily, one grid cell at a time, for walks
that are too long for any fixed window.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .rng import stream

SAMPLER_KINDS = ("palm_poisson_disk", "binomial_disk", "radial_chain")


class ConfigError(ValueError):
    """Invalid sampler or run configuration."""


class DuplicatePointError(ValueError):
    """Two points share exact coordinates; the sample must be redrawn."""


def fmt(v: float) -> str:
    """Round-trip safe float formatting (17 significant digits)."""
    return format(float(v), ".17g")


# --------------------------------------------------------------------- windows


@dataclass(frozen=True)
class Disk:
    """Closed disk centred at the origin."""

    radius: float

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.hypot(pts[:, 0], pts[:, 1]) <= self.radius * (1 + 1e-12)

    def ball_inside(self, centers: np.ndarray, r: np.ndarray, norm: str = "l2") -> np.ndarray:
        """Whether the ``norm``-ball of radius ``r`` around each centre fits."""
        c = np.atleast_2d(centers)
        r = np.asarray(r, dtype=float)
        if norm == "l2":
            return np.hypot(c[:, 0], c[:, 1]) + r <= self.radius
        # farthest corner of the square
        return np.hypot(np.abs(c[:, 0]) + r, np.abs(c[:, 1]) + r) <= self.radius

    def shrink(self, guard_margin: float) -> "Disk":
        return Disk(self.radius * (1.0 - guard_margin))


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return ((pts[:, 0] >= self.xmin) & (pts[:, 0] <= self.xmax)
                & (pts[:, 1] >= self.ymin) & (pts[:, 1] <= self.ymax))

    def ball_inside(self, centers: np.ndarray, r: np.ndarray, norm: str = "l2") -> np.ndarray:
        c = np.atleast_2d(centers)
        r = np.asarray(r, dtype=float)
        # an l2 ball and its bounding square have the same extremes along axes
        return ((c[:, 0] - r >= self.xmin) & (c[:, 0] + r <= self.xmax)
                & (c[:, 1] - r >= self.ymin) & (c[:, 1] + r <= self.ymax))


Window = Disk | Rect


# -------------------------------------------------------------------- PointSet


@dataclass(frozen=True, eq=False)
class PointSet:
    """Finite planar sample.

    ``points[0]`` is the origin whenever ``has_origin`` is set.  ``window`` is
    ``None`` for hand-built configurations that represent the whole process.
    """

    points: np.ndarray
    has_origin: bool = False
    window: Window | None = None
    intensity: float = 1.0
    seed: int | None = None
    replicate_id: int = 0
    tiebreak: bool = field(default=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.intensity <= 0:
            raise ConfigError(f"intensity must be positive, got {self.intensity}")
        if self.has_origin and (len(pts) == 0 or pts[0, 0] != 0.0 or pts[0, 1] != 0.0):
            raise ValueError("has_origin requires points[0] == (0, 0)")
        if self.window is not None and len(pts) and not self.window.contains(pts).all():
            raise ValueError("all points must lie inside the window")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def with_point(self, xy) -> "PointSet":
        """Return a copy with ``xy`` appended (its index is ``len(self)``)."""
        pts = np.vstack([self.points, np.asarray(xy, dtype=float).reshape(1, 2)])
        return replace(self, points=pts, tiebreak=False)

    def subset(self, mask: np.ndarray) -> "PointSet":
        mask = np.asarray(mask, dtype=bool)
        keep_origin = self.has_origin and bool(mask[0])
        return replace(self, points=self.points[mask], has_origin=keep_origin, tiebreak=False)

    # ------------------------------------------------------------------ csv

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write("id,x,y,is_origin\n")
        for i, (px, py) in enumerate(self.points):
            origin = int(self.has_origin and i == 0)
            buf.write(f"{i},{fmt(px)},{fmt(py)},{origin}\n")
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    @classmethod
    def from_csv(cls, src, window: Window | None = None, intensity: float = 1.0) -> "PointSet":
        text = Path(src).read_text() if not hasattr(src, "read") else src.read()
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and set(rows[0]) != {"id", "x", "y", "is_origin"}:
            raise ValueError(f"unexpected columns {sorted(rows[0])}; want id,x,y,is_origin")
        rows.sort(key=lambda r: int(r["id"]))
        pts = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
        flags = [int(r["is_origin"]) for r in rows]
        if any(flags[1:]):
            raise ValueError("only row 0 may be flagged as origin")
        return cls(pts, has_origin=bool(flags and flags[0]), window=window, intensity=intensity)


# ---------------------------------------------------------------------- config


@dataclass(frozen=True)
class SamplerConfig:
    kind: str = "palm_poisson_disk"
    intensity: float = 1.0
    window_radius: float = 10.0
    guard_margin: float = 0.2
    count: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SAMPLER_KINDS:
            raise ConfigError(f"kind: unknown sampler {self.kind!r}; expected one of {SAMPLER_KINDS}")
        if not self.intensity > 0:
            raise ConfigError(f"intensity: must be > 0, got {self.intensity}")
        if not self.window_radius > 0:
            raise ConfigError(f"window_radius: must be > 0, got {self.window_radius}")
        if not 0 <= self.guard_margin < 1:
            raise ConfigError(f"guard_margin: must lie in [0, 1), got {self.guard_margin}")
        if self.kind in ("binomial_disk", "radial_chain"):
            if self.count is None or self.count < 0:
                raise ConfigError(f"count: required and >= 0 for {self.kind}")
            if self.kind == "radial_chain" and self.count < 1:
                raise ConfigError("count: radial_chain needs count >= 1")

    @property
    def guard_radius(self) -> float:
        """Radius inside which statistics are collected."""
        return (1.0 - self.guard_margin) * self.window_radius


def _uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def sample_palm_poisson(cfg: SamplerConfig, replicate_id: int = 0) -> PointSet:
    """Poisson process in the closed disk, plus the origin at index 0."""
    if cfg.kind != "palm_poisson_disk":
        raise ConfigError(f"kind: expected palm_poisson_disk, got {cfg.kind}")
    rng = stream(cfg.seed, replicate_id, "palm_poisson_disk")
    n = rng.poisson(cfg.intensity * math.pi * cfg.window_radius ** 2)
    pts = np.vstack([np.zeros((1, 2)), _uniform_disk(rng, n, cfg.window_radius)])
    return PointSet(pts, has_origin=True, window=Disk(cfg.window_radius), intensity=cfg.intensity,
                    seed=cfg.seed, replicate_id=replicate_id)


def sample_binomial_disk(cfg: SamplerConfig, replicate_id: int = 0) -> PointSet:
    """Exactly ``cfg.count`` uniform points in the disk, plus the origin."""
    if cfg.kind != "binomial_disk":
        raise ConfigError(f"kind: expected binomial_disk, got {cfg.kind}")
    rng = stream(cfg.seed, replicate_id, "binomial_disk")
    pts = np.vstack([np.zeros((1, 2)), _uniform_disk(rng, cfg.count, cfg.window_radius)])
    intensity = max(cfg.count, 1) / (math.pi * cfg.window_radius ** 2)
    return PointSet(pts, has_origin=True, window=Disk(cfg.window_radius), intensity=intensity,
                    seed=cfg.seed, replicate_id=replicate_id)


def sample_radial_chain(n: int, intensity: float = 1.0, seed: int = 0, replicate_id: int = 0) -> PointSet:
    """The ``n`` nearest points of a Palm Poisson process, built radially.

    Squared radii are partial sums of Exp(pi * intensity) variables, so the
    k-th squared radius is Gamma(k, pi * intensity); angles are uniform and
    independent.  The origin is stored at index 0 and the window is the
    closed disk through the outermost point.
    """
    if n < 1:
        raise ConfigError(f"n: must be >= 1, got {n}")
    if not intensity > 0:
        raise ConfigError(f"intensity: must be > 0, got {intensity}")
    rng = stream(seed, replicate_id, "radial_chain")
    sq = np.cumsum(rng.exponential(1.0 / (math.pi * intensity), size=n))
    phi = 2 * np.pi * rng.random(n)
    r = np.sqrt(sq)
    pts = np.vstack([np.zeros((1, 2)), np.column_stack([r * np.cos(phi), r * np.sin(phi)])])
    return PointSet(pts, has_origin=True, window=Disk(float(r[-1]) * (1 + 1e-12)),
                    intensity=intensity, seed=seed, replicate_id=replicate_id)


def sample(cfg: SamplerConfig, replicate_id: int = 0) -> PointSet:
    if cfg.kind == "palm_poisson_disk":
        return sample_palm_poisson(cfg, replicate_id)
    if cfg.kind == "binomial_disk":
        return sample_binomial_disk(cfg, replicate_id)
    return sample_radial_chain(cfg.count, cfg.intensity, cfg.seed, replicate_id)


def enforce_nonequidistance(ps: PointSet) -> PointSet:
    """Check for coincident points and mark the (distance, index) tie-break.

    Exact distance ties that survive are resolved downstream by the lower
    point index, so every nearest-point query has a unique answer.
    """
    if ps.tiebreak:
        return ps
    if len(ps) > 1:
        uniq = np.unique(ps.points, axis=0)
        if len(uniq) != len(ps):
            raise DuplicatePointError(f"{len(ps) - len(uniq)} duplicated coordinate(s); resample")
    return replace(ps, tiebreak=True)


# ---------------------------------------------------------------- lazy field


class PoissonField:
    """Homogeneous Poisson process on the whole plane, realised on demand.

    The plane is cut into square cells of side ``1/sqrt(intensity)``; the
    points of cell ``(i, j)`` are drawn from their own counter-based stream,
    so a cell that is dropped from the cache and requested again comes back
    identical.
    """

    def __init__(self, intensity: float = 1.0, seed: int = 0, replicate_id: int = 0,
                 name: str = "field"):
        if not intensity > 0:
            raise ConfigError(f"intensity: must be > 0, got {intensity}")
        self.intensity = intensity
        self.seed = seed
        self.replicate_id = replicate_id
        self.name = name
        self.h = 1.0 / math.sqrt(intensity)
        self._cells: dict[tuple[int, int], np.ndarray] = {}

    def cell(self, i: int, j: int) -> np.ndarray:
        pts = self._cells.get((i, j))
        if pts is None:
            rng = stream(self.seed, self.replicate_id, self.name, i, j)
            m = rng.poisson(1.0)
            pts = (np.array([i, j], dtype=float) + rng.random((m, 2))) * self.h
            self._cells[(i, j)] = pts
        return pts

    def cell_of(self, xy) -> tuple[int, int]:
        return math.floor(xy[0] / self.h), math.floor(xy[1] / self.h)

    def forget(self, keep: Callable[[int, int], bool]) -> None:
        """Drop cached cells for which ``keep(i, j)`` is false."""
        self._cells = {k: v for k, v in self._cells.items() if keep(*k)}

    def __len__(self) -> int:
        return len(self._cells)

    def _ring(self, ci: int, cj: int, k: int) -> Iterable[np.ndarray]:
        if k == 0:
            yield self.cell(ci, cj)
            return
        for i in range(ci - k, ci + k + 1):
            yield self.cell(i, cj - k)
            yield self.cell(i, cj + k)
        for j in range(cj - k + 1, cj + k):
            yield self.cell(ci - k, j)
            yield self.cell(ci + k, j)

    def nearest(self, q, eligible: Callable[[np.ndarray], np.ndarray],
                extra: np.ndarray | None = None, max_rings: int = 10_000):
        """Nearest eligible point to ``q`` (euclidean).

        ``eligible`` maps an (m, 2) array to a boolean mask.  ``extra`` holds
        points that are not part of the field (for example a Palm origin) and
        are always considered.  Returns ``(point, distance)``.
        """
        q = np.asarray(q, dtype=float)
        ci, cj = self.cell_of(q)
        best, best_d = None, math.inf
        if extra is not None and len(extra):
            ok = eligible(extra)
            if ok.any():
                cand = extra[ok]
                d = np.hypot(cand[:, 0] - q[0], cand[:, 1] - q[1])
                a = int(np.argmin(d))
                best, best_d = cand[a], float(d[a])
        for k in range(max_rings):
            chunks = [c for c in self._ring(ci, cj, k) if len(c)]
            if chunks:
                pts = np.concatenate(chunks)
                ok = eligible(pts)
                if ok.any():
                    cand = pts[ok]
                    d = np.hypot(cand[:, 0] - q[0], cand[:, 1] - q[1])
                    a = int(np.argmin(d))
                    if d[a] < best_d:
                        best, best_d = cand[a], float(d[a])
            # distance from q to the outside of the scanned square
            h = self.h
            reach = min(q[0] - (ci - k) * h, (ci + k + 1) * h - q[0],
                        q[1] - (cj - k) * h, (cj + k + 1) * h - q[1])
            if best is not None and best_d < reach:
                return best, best_d
        raise RuntimeError("no eligible point found within the ring limit")
