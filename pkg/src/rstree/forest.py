"""Radial spanning trees, directed spanning forests and their relatives.

Every builder follows the same greedy rule: a vertex links to the point
minimising a cost among the points of strictly smaller level.  The radial
tree uses level ``|Y|``, the directed forest uses the coordinate along a
direction, and the Voronoi variants measure the level from the cluster head
of the vertex's cell.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from . import _grid
from .pointprocess import Disk, PointSet, Window, _uniform_disk, enforce_nonequidistance, fmt
from .rng import stream

FOREST_KINDS = ("rst", "dsf", "greedy", "voronoi_internal", "voronoi_local")
NORMS = ("l2", "linf")
LEVELS = ("radial_l2", "radial_linf", "coordinate_along")
COSTS = ("euclidean", "linf")


@dataclass(frozen=True)
class GreedySpec:
    """Level field and pairwise cost of a greedy forest.

    ``coordinate_along`` with direction ``d`` links a point to one with a
    strictly larger coordinate along ``d`` (so ``d = (-1, 0)`` walks left).
    """

    level: str = "radial_l2"
    cost: str = "euclidean"
    direction: tuple[float, float] | None = None

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")
        if self.cost not in COSTS:
            raise ValueError(f"unknown cost {self.cost!r}")
        if self.level == "coordinate_along":
            if self.direction is None:
                raise ValueError("coordinate_along needs a direction")
            object.__setattr__(self, "direction", _unit(self.direction))

    def levels(self, pts: np.ndarray) -> np.ndarray:
        if self.level == "radial_l2":
            return np.hypot(pts[:, 0], pts[:, 1])
        if self.level == "radial_linf":
            return np.maximum(np.abs(pts[:, 0]), np.abs(pts[:, 1]))
        dx, dy = self.direction
        return -(pts[:, 0] * dx + pts[:, 1] * dy)


def _unit(d) -> tuple[float, float]:
    dx, dy = float(d[0]), float(d[1])
    n = math.hypot(dx, dy)
    if n == 0:
        raise ValueError("direction must be nonzero")
    if abs(n - 1.0) > 1e-12:
        dx, dy = dx / n, dy / n
    return dx, dy


@dataclass(frozen=True, eq=False)
class Forest:
    """Ancestor map over a point set.

    ``ancestor[v] == -1`` marks a root.  ``censored[v]`` flags vertices whose
    ancestor query could not be certified inside the window; their edge (if
    any) is kept for inspection but excluded from every statistic.
    """

    points: PointSet
    ancestor: np.ndarray
    length: np.ndarray
    censored: np.ndarray
    kind: str
    norm: str = "l2"
    direction: tuple[float, float] | None = None
    cell: np.ndarray | None = None

    def __post_init__(self):
        for name in ("ancestor", "length", "censored", "cell"):
            a = getattr(self, name)
            if a is not None:
                a = np.array(a, copy=True)
                a.setflags(write=False)
                object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.ancestor)

    @property
    def censored_set(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.censored).tolist())

    @property
    def valid(self) -> np.ndarray:
        """Mask of vertices carrying a certified edge."""
        return (self.ancestor >= 0) & ~self.censored

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero((self.ancestor < 0) & ~self.censored)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        child = np.flatnonzero(self.valid)
        return child, self.ancestor[child]

    def children_count(self) -> np.ndarray:
        _, parent = self.edges()
        return np.bincount(parent, minlength=len(self))

    def degree(self, v: int) -> int:
        """Number of incident edges: children, plus one for a non-root."""
        self._check_vertex(v)
        return int(self.children_count()[v] + (1 if self.valid[v] else 0))

    def degrees(self) -> np.ndarray:
        return self.children_count() + self.valid.astype(np.int64)

    def generations(self) -> np.ndarray:
        """Hop count to the root; ``-1`` where the chain meets a censored vertex."""
        gen = _generations(self.ancestor.astype(np.int64), self.censored)
        if (gen == -2).any():
            raise RuntimeError("ancestor map contains a cycle")
        return gen

    def generation_set(self, k: int) -> np.ndarray:
        """Vertices at generation at most ``k``."""
        g = self.generations()
        return np.flatnonzero((g >= 0) & (g <= k))

    def crossing_count(self, x: float) -> int:
        """Edges with exactly one endpoint in the closed ball B(O, x)."""
        if self.kind != "rst":
            raise ValueError("crossing_count is defined for radial trees")
        child, parent = self.edges()
        r = self.points.radii
        return int(np.count_nonzero((r[child] <= x) != (r[parent] <= x)))

    def is_acyclic(self, include_censored: bool = True) -> bool:
        anc = self.ancestor.astype(np.int64)
        if not include_censored:
            anc = np.where(self.censored, -1, anc)
        return not _has_cycle(anc)

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < len(self):
            raise IndexError(f"unknown vertex {v}")

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write("child_id,parent_id,length,censored\n")
        for v in range(len(self)):
            a = int(self.ancestor[v])
            ln = float(self.length[v]) if a >= 0 else 0.0
            buf.write(f"{v},{a},{fmt(ln)},{int(self.censored[v])}\n")
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text


@numba.njit(cache=True)
def _generations(anc, censored):
    n = len(anc)
    gen = np.full(n, -3, dtype=np.int64)  # -3 unknown, -2 cycle, -1 censored chain
    stack = np.empty(n + 1, dtype=np.int64)
    for v in range(n):
        if gen[v] != -3:
            continue
        top = 0
        u = v
        steps = 0
        while True:
            if gen[u] != -3:
                base = gen[u]
                break
            if censored[u]:
                base = -1
                gen[u] = -1
                break
            if anc[u] < 0:
                gen[u] = 0
                base = 0
                break
            stack[top] = u
            top += 1
            u = anc[u]
            steps += 1
            if steps > n:
                base = -2
                break
        while top > 0:
            top -= 1
            w = stack[top]
            if base < 0:
                gen[w] = base
            else:
                base += 1
                gen[w] = base
    return gen


@numba.njit(cache=True)
def _has_cycle(anc):
    n = len(anc)
    state = np.zeros(n, dtype=np.int8)  # 0 new, 1 on current chain, 2 finished
    for v in range(n):
        u = v
        while u >= 0 and state[u] == 0:
            state[u] = 1
            u = anc[u]
        if u >= 0 and state[u] == 1:
            return True
        u = v
        while u >= 0 and state[u] == 1:
            state[u] = 2
            u = anc[u]
    return False


# ------------------------------------------------------------------ builders


def _cell_size(ps: PointSet) -> float:
    return 1.0 / math.sqrt(ps.intensity)


def _level_region_inside(window: Window | None, spec: GreedySpec, pts: np.ndarray, lev: np.ndarray) -> np.ndarray:
    """Whether ``{Y : l(Y) < l(X)}`` lies inside the window for each X."""
    n = len(pts)
    if window is None:
        return np.ones(n, dtype=bool)
    zero = np.zeros((n, 2))
    if spec.level == "radial_l2":
        return window.ball_inside(zero, lev, "l2")
    if spec.level == "radial_linf":
        return window.ball_inside(zero, lev, "linf")
    return np.zeros(n, dtype=bool)


def _censor(window: Window | None, pts: np.ndarray, anc: np.ndarray, cost: np.ndarray,
            level_inside: np.ndarray, norm: str) -> np.ndarray:
    if window is None:
        return np.zeros(len(pts), dtype=bool)
    found = anc >= 0
    ball_ok = np.zeros(len(pts), dtype=bool)
    if found.any():
        ball_ok[found] = window.ball_inside(pts[found], cost[found], norm)
    return np.where(found, ~(ball_ok | level_inside), ~level_inside)


def build_greedy(ps: PointSet, spec: GreedySpec, *, kind: str = "greedy") -> Forest:
    """Link every point to ``argmin L(X, Z)`` over ``l(Z) < l(X)``."""
    ps = enforce_nonequidistance(ps)
    pts = ps.points
    lev = spec.levels(pts)
    index = _grid.GridIndex(pts, _cell_size(ps))
    n = len(pts)
    cost_mode = _grid.COST_L2 if spec.cost == "euclidean" else _grid.COST_LINF
    anc, cost = index.search(np.arange(n), pts[:, 0], pts[:, 1], lev=lev, qlev=lev,
                             level_mode=_grid.LEVEL_ARRAY, cost_mode=cost_mode)
    norm = "l2" if spec.cost == "euclidean" else "linf"
    censored = _censor(ps.window, pts, anc, cost, _level_region_inside(ps.window, spec, pts, lev), norm)
    return Forest(ps, anc, np.where(anc >= 0, cost, np.nan), censored, kind=kind, norm=norm,
                  direction=spec.direction)


def build_rst(ps: PointSet, norm: str = "l2") -> Forest:
    """Radial spanning tree rooted at the origin."""
    if not ps.has_origin:
        raise ValueError("the radial spanning tree needs the origin in the point set")
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}")
    spec = GreedySpec("radial_l2", "euclidean") if norm == "l2" else GreedySpec("radial_linf", "linf")
    return build_greedy(ps, spec, kind="rst")


def build_dsf(ps: PointSet, direction=(-1.0, 0.0)) -> Forest:
    """Directed spanning forest: ancestor is the nearest point further along ``direction``."""
    return build_greedy(ps, GreedySpec("coordinate_along", "euclidean", direction), kind="dsf")


# ------------------------------------------------------------------- Voronoi


@dataclass(frozen=True, eq=False)
class ClusterScene:
    """Independent head (``N0``) and node (``N1``) samples in one window."""

    heads: PointSet
    nodes: PointSet

    def __post_init__(self):
        if len(self.heads) == 0:
            raise ValueError("a cluster scene needs at least one head")

    def combined(self) -> PointSet:
        pts = np.vstack([self.heads.points, self.nodes.points])
        return PointSet(pts, has_origin=self.heads.has_origin, window=self.heads.window,
                        intensity=self.heads.intensity + self.nodes.intensity,
                        seed=self.heads.seed, replicate_id=self.heads.replicate_id)


def sample_cluster_scene(head_intensity: float, node_intensity: float, radius: float,
                         seed: int = 0, replicate_id: int = 0, palm_head: bool = False) -> ClusterScene:
    """Two independent Poisson samples in ``Disk(radius)``.

    With ``palm_head`` a head is placed at the origin (index 0), which is the
    Palm view from a typical cluster head.
    """
    rng_h = stream(seed, replicate_id, "heads")
    rng_n = stream(seed, replicate_id, "nodes")
    area = math.pi * radius ** 2
    heads = _uniform_disk(rng_h, rng_h.poisson(head_intensity * area), radius)
    if palm_head:
        heads = np.vstack([np.zeros((1, 2)), heads])
    nodes = _uniform_disk(rng_n, rng_n.poisson(node_intensity * area), radius)
    w = Disk(radius)
    return ClusterScene(
        PointSet(heads, has_origin=palm_head, window=w, intensity=head_intensity, seed=seed,
                 replicate_id=replicate_id),
        PointSet(nodes, window=w, intensity=node_intensity, seed=seed, replicate_id=replicate_id),
    )


def assign_cells(scene: ClusterScene) -> np.ndarray:
    """Nearest head of every node (lower head index on exact ties)."""
    heads = scene.heads.points
    nodes = scene.nodes.points
    index = _grid.GridIndex(heads, 1.0 / math.sqrt(scene.heads.intensity))
    cell, _ = index.search(np.full(len(nodes), -1), nodes[:, 0], nodes[:, 1],
                           level_mode=_grid.LEVEL_NONE)
    return cell


def _build_voronoi(scene: ClusterScene, local: bool) -> Forest:
    ps = enforce_nonequidistance(scene.combined())
    pts = ps.points
    n0 = len(scene.heads)
    n = len(pts)
    node_cell = assign_cells(scene)
    cell = np.concatenate([np.arange(n0), node_cell]).astype(np.int64)
    centers = pts[cell]
    qlev = np.hypot(pts[:, 0] - centers[:, 0], pts[:, 1] - centers[:, 1])
    if local:
        grp = np.concatenate([np.arange(n0), np.full(n - n0, -1)]).astype(np.int64)
        group_mode = _grid.GROUP_NODE_OR_HEAD
    else:
        grp = cell
        group_mode = _grid.GROUP_SAME
    index = _grid.GridIndex(pts, _cell_size(ps))
    q = np.arange(n0, n)
    anc_nodes, cost_nodes = index.search(q, pts[q, 0], pts[q, 1], qlev=qlev[q], qcx=centers[q, 0],
                                         qcy=centers[q, 1], grp=grp, qgrp=cell[q],
                                         level_mode=_grid.LEVEL_CENTER, group_mode=group_mode)
    anc = np.concatenate([np.full(n0, -1), anc_nodes]).astype(np.int64)
    cost = np.concatenate([np.full(n0, np.nan), cost_nodes])
    censored = np.zeros(n, dtype=bool)
    if ps.window is not None:
        # cell membership is certified when B(X, |X - head|) fits in the window
        censored[n0:] = ~ps.window.ball_inside(pts[n0:], qlev[n0:], "l2")
    kind = "voronoi_local" if local else "voronoi_internal"
    return Forest(ps, anc, cost, censored, kind=kind, norm="l2", cell=cell)


def build_voronoi_local(scene: ClusterScene) -> Forest:
    """Local RSTs: a node in the cell of head ``T`` links to the closest point of
    nodes-plus-``T`` strictly nearer to ``T`` than itself; the link may leave the cell."""
    return _build_voronoi(scene, local=True)


def build_voronoi_internal(scene: ClusterScene) -> Forest:
    """Independent RST inside every Voronoi cell, rooted at its head."""
    return _build_voronoi(scene, local=False)


# ----------------------------------------------------------- free functions


def degree(f: Forest, v: int) -> int:
    return f.degree(v)


def generation_set(f: Forest, k: int) -> np.ndarray:
    return f.generation_set(k)


def crossing_count(f: Forest, x: float) -> int:
    return f.crossing_count(x)
