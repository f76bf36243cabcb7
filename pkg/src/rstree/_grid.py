"""Uniform-grid nearest-neighbour search under an eligibility constraint.

The query scans Chebyshev rings of cells outward from its own cell and stops
once the best candidate is strictly closer than anything outside the scanned
square.  Candidates compare by ``(cost, index)``, which is the package-wide
tie-break.
"""
from __future__ import annotations

import math

import numba
import numpy as np

# level modes
LEVEL_ARRAY = 0      # eligible iff lev[j] < qlev[q]
LEVEL_CENTER = 1     # eligible iff |p_j - c_q| < qlev[q]
LEVEL_NONE = 2       # every other point is eligible

# group modes
GROUP_NONE = 0
GROUP_SAME = 1       # grp[j] == qgrp[q]
GROUP_NODE_OR_HEAD = 2  # grp[j] < 0, or j == qgrp[q]

COST_L2 = 0
COST_LINF = 1


class GridIndex:
    """Points bucketed into square cells of side ``cell_size``."""

    def __init__(self, points: np.ndarray, cell_size: float):
        pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
        self.px = np.ascontiguousarray(pts[:, 0])
        self.py = np.ascontiguousarray(pts[:, 1])
        n = len(pts)
        if n:
            self.x0, self.y0 = float(pts[:, 0].min()), float(pts[:, 1].min())
            spanx = float(pts[:, 0].max()) - self.x0
            spany = float(pts[:, 1].max()) - self.y0
        else:
            self.x0 = self.y0 = 0.0
            spanx = spany = 0.0
        h = float(cell_size)
        # keep the cell count proportional to n for sparse hand-built sets
        cap = 16 * n + 1024
        while (math.floor(spanx / h) + 1) * (math.floor(spany / h) + 1) > cap:
            h *= 2.0
        self.h = h
        self.nx = int(math.floor(spanx / h)) + 1
        self.ny = int(math.floor(spany / h)) + 1
        ci = np.minimum(((self.px - self.x0) / h).astype(np.int64), self.nx - 1)
        cj = np.minimum(((self.py - self.y0) / h).astype(np.int64), self.ny - 1)
        cid = ci * self.ny + cj
        self.order = np.argsort(cid, kind="stable").astype(np.int64)
        self.starts = np.searchsorted(cid[self.order], np.arange(self.nx * self.ny + 1)).astype(np.int64)

    def search(self, qidx, qx, qy, *, lev=None, qlev=None, qcx=None, qcy=None,
               grp=None, qgrp=None, level_mode=LEVEL_ARRAY, group_mode=GROUP_NONE,
               cost_mode=COST_L2):
        """Vectorised nearest-eligible query.

        ``qidx`` is the index of each query inside the indexed set (``-1`` for
        external queries); that point is never its own answer.  Returns
        ``(index, cost)`` with index ``-1`` where nothing is eligible.
        """
        nq = len(qx)
        z = np.zeros(nq)
        zi = np.zeros(nq, dtype=np.int64)
        n = len(self.px)
        lev = np.zeros(n) if lev is None else np.ascontiguousarray(lev, dtype=np.float64)
        grp = np.zeros(n, dtype=np.int64) if grp is None else np.ascontiguousarray(grp, dtype=np.int64)
        return _search_many(
            np.ascontiguousarray(qidx, dtype=np.int64),
            np.ascontiguousarray(qx, dtype=np.float64), np.ascontiguousarray(qy, dtype=np.float64),
            z if qlev is None else np.ascontiguousarray(qlev, dtype=np.float64),
            z if qcx is None else np.ascontiguousarray(qcx, dtype=np.float64),
            z if qcy is None else np.ascontiguousarray(qcy, dtype=np.float64),
            zi if qgrp is None else np.ascontiguousarray(qgrp, dtype=np.int64),
            self.px, self.py, lev, grp, level_mode, group_mode, cost_mode,
            self.x0, self.y0, self.h, self.nx, self.ny, self.order, self.starts)


@numba.njit(cache=True, inline="always")
def _cost(ax, ay, bx, by, cost_mode):
    if cost_mode == COST_L2:
        return math.hypot(ax - bx, ay - by)
    return max(abs(ax - bx), abs(ay - by))


@numba.njit(cache=True)
def _scan_cell(c, q, qx, qy, qself, qlev, qcx, qcy, qgrp, px, py, lev, grp,
               level_mode, group_mode, cost_mode, order, starts, best, bestd):
    for t in range(starts[c], starts[c + 1]):
        j = order[t]
        if j == qself:
            continue
        if group_mode == GROUP_SAME:
            if grp[j] != qgrp:
                continue
        elif group_mode == GROUP_NODE_OR_HEAD:
            if grp[j] >= 0 and j != qgrp:
                continue
        if level_mode == LEVEL_ARRAY:
            if not lev[j] < qlev:
                continue
        elif level_mode == LEVEL_CENTER:
            if not math.hypot(px[j] - qcx, py[j] - qcy) < qlev:
                continue
        d = _cost(qx, qy, px[j], py[j], cost_mode)
        if d < bestd or (d == bestd and j < best):
            best = j
            bestd = d
    return best, bestd


@numba.njit(cache=True)
def _search_many(qidx, qx, qy, qlev, qcx, qcy, qgrp, px, py, lev, grp,
                 level_mode, group_mode, cost_mode, x0, y0, h, nx, ny, order, starts):
    nq = len(qx)
    out = np.full(nq, -1, dtype=np.int64)
    outd = np.full(nq, np.inf)
    for q in range(nq):
        ci = int(math.floor((qx[q] - x0) / h))
        cj = int(math.floor((qy[q] - y0) / h))
        best = -1
        bestd = np.inf
        k = 0
        while True:
            ilo = ci - k
            ihi = ci + k
            jlo = cj - k
            jhi = cj + k
            if k == 0:
                if 0 <= ci < nx and 0 <= cj < ny:
                    best, bestd = _scan_cell(ci * ny + cj, q, qx[q], qy[q], qidx[q], qlev[q], qcx[q], qcy[q],
                                             qgrp[q], px, py, lev, grp, level_mode, group_mode, cost_mode,
                                             order, starts, best, bestd)
            else:
                for i in range(max(ilo, 0), min(ihi, nx - 1) + 1):
                    if 0 <= jlo < ny:
                        best, bestd = _scan_cell(i * ny + jlo, q, qx[q], qy[q], qidx[q], qlev[q], qcx[q],
                                                 qcy[q], qgrp[q], px, py, lev, grp, level_mode, group_mode,
                                                 cost_mode, order, starts, best, bestd)
                    if 0 <= jhi < ny:
                        best, bestd = _scan_cell(i * ny + jhi, q, qx[q], qy[q], qidx[q], qlev[q], qcx[q],
                                                 qcy[q], qgrp[q], px, py, lev, grp, level_mode, group_mode,
                                                 cost_mode, order, starts, best, bestd)
                for j in range(max(jlo + 1, 0), min(jhi - 1, ny - 1) + 1):
                    if 0 <= ilo < nx:
                        best, bestd = _scan_cell(ilo * ny + j, q, qx[q], qy[q], qidx[q], qlev[q], qcx[q],
                                                 qcy[q], qgrp[q], px, py, lev, grp, level_mode, group_mode,
                                                 cost_mode, order, starts, best, bestd)
                    if 0 <= ihi < nx:
                        best, bestd = _scan_cell(ihi * ny + j, q, qx[q], qy[q], qidx[q], qlev[q], qcx[q],
                                                 qcy[q], qgrp[q], px, py, lev, grp, level_mode, group_mode,
                                                 cost_mode, order, starts, best, bestd)
            reach = min(qx[q] - (x0 + ilo * h), x0 + (ihi + 1) * h - qx[q],
                        qy[q] - (y0 + jlo * h), y0 + (jhi + 1) * h - qy[q])
            if best >= 0 and bestd < reach:
                break
            if ilo <= 0 and jlo <= 0 and ihi >= nx - 1 and jhi >= ny - 1:
                break
            k += 1
        out[q] = best
        outd[q] = bestd
    return out, outd
