"""Quadratic-time reference implementations.

These scan every pair of points and share no code with the grid search, so
they serve as independent oracles for the accelerated builders.
"""
from __future__ import annotations

import numpy as np

from .forest import ClusterScene, Forest, GreedySpec


def _argmin_eligible(d: np.ndarray, ok: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmin of ``d`` over ``ok`` with ties to the lower column."""
    dd = np.where(ok, d, np.inf)
    # np.argmin returns the first minimum, which is the lower index
    j = np.argmin(dd, axis=1)
    best = dd[np.arange(len(dd)), j]
    j = np.where(np.isfinite(best), j, -1)
    return j, best


def _pairwise(pts: np.ndarray, cost: str) -> np.ndarray:
    dx = pts[:, None, 0] - pts[None, :, 0]
    dy = pts[:, None, 1] - pts[None, :, 1]
    if cost == "euclidean":
        return np.hypot(dx, dy)
    return np.maximum(np.abs(dx), np.abs(dy))


def greedy_ancestors(points: np.ndarray, spec: GreedySpec) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    lev = spec.levels(pts)
    ok = lev[None, :] < lev[:, None]
    return _argmin_eligible(_pairwise(pts, spec.cost), ok)[0]


def rst_ancestors(points: np.ndarray, norm: str = "l2") -> np.ndarray:
    spec = GreedySpec("radial_l2", "euclidean") if norm == "l2" else GreedySpec("radial_linf", "linf")
    return greedy_ancestors(points, spec)


def dsf_ancestors(points: np.ndarray, direction=(-1.0, 0.0)) -> np.ndarray:
    return greedy_ancestors(points, GreedySpec("coordinate_along", "euclidean", direction))


def nearest_head(heads: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    d = np.hypot(nodes[:, None, 0] - heads[None, :, 0], nodes[:, None, 1] - heads[None, :, 1])
    return np.argmin(d, axis=1)


def voronoi_ancestors(scene: ClusterScene, local: bool) -> np.ndarray:
    """Ancestor map over ``heads + nodes`` (heads first, heads are roots)."""
    heads, nodes = scene.heads.points, scene.nodes.points
    n0 = len(heads)
    pts = np.vstack([heads, nodes])
    cell = np.concatenate([np.arange(n0), nearest_head(heads, nodes)])
    center = pts[cell]
    rad = np.hypot(*(pts - center).T)
    d = _pairwise(pts, "euclidean")
    inside = np.hypot(pts[None, :, 0] - center[:, None, 0], pts[None, :, 1] - center[:, None, 1]) < rad[:, None]
    if local:
        is_node = np.arange(len(pts)) >= n0
        member = is_node[None, :] | (np.arange(len(pts))[None, :] == cell[:, None])
    else:
        member = cell[None, :] == cell[:, None]
    ok = inside & member
    np.fill_diagonal(ok, False)
    anc = _argmin_eligible(d, ok)[0]
    anc[:n0] = -1
    return anc


def per_cell_rst(scene: ClusterScene) -> np.ndarray:
    """Internal Voronoi forest assembled from separately built per-cell trees."""
    heads, nodes = scene.heads.points, scene.nodes.points
    n0 = len(heads)
    cell = nearest_head(heads, nodes)
    anc = np.full(n0 + len(nodes), -1, dtype=np.int64)
    for h in range(n0):
        members = np.flatnonzero(cell == h)
        local = np.vstack([heads[h:h + 1], nodes[members]]) - heads[h]
        a = rst_ancestors(local)
        ids = np.concatenate([[h], n0 + members])
        for k in range(1, len(ids)):
            anc[ids[k]] = ids[a[k]]
    return anc


def void_condition_violations(f: Forest) -> list[int]:
    """RST vertices whose lens ``B(O,|X|) ∩ B(X,|X - A(X)|)`` holds a point
    that beats the chosen ancestor under the ``(distance, index)`` order."""
    if f.kind != "rst" or f.norm != "l2":
        raise ValueError("void condition is checked on euclidean radial trees")
    pts = f.points.points
    r = np.hypot(pts[:, 0], pts[:, 1])
    bad = []
    for v in np.flatnonzero(f.valid):
        a = f.ancestor[v]
        dv = np.hypot(pts[:, 0] - pts[v, 0], pts[:, 1] - pts[v, 1])
        da = dv[a]
        idx = np.arange(len(pts))
        beats = (r < r[v]) & ((dv < da) | ((dv == da) & (idx < a)))
        beats[v] = False
        if beats.any():
            bad.append(int(v))
    return bad
