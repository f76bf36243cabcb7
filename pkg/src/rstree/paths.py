"""Ancestor paths: extraction, Markovian times, long-run constants, domination."""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forest import Forest, build_dsf, build_rst
from .pointprocess import Disk, PointSet, PoissonField, SamplerConfig, fmt, sample_palm_poisson
from .statistics import BatchMeans, Estimator, batch_means


@dataclass(frozen=True, eq=False)
class PathTrace:
    """Successive ancestors ``X_0, X_1, ..., X_H`` of a start vertex.

    ``edges[k-1] = X_{k-1} - X_k`` (so they telescope to ``X_0 - X_H``).
    For directed traces ``direction`` is the forest direction and progress is
    measured along it.
    """

    coords: np.ndarray
    kind: str
    vertices: np.ndarray | None = None
    direction: tuple[float, float] | None = None
    censored: bool = False

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1, 2)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if self.kind not in ("rst", "dsf"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if self.kind == "dsf" and self.direction is None:
            object.__setattr__(self, "direction", (-1.0, 0.0))

    @property
    def hop_count(self) -> int:
        return len(self.coords) - 1

    @property
    def edges(self) -> np.ndarray:
        return self.coords[:-1] - self.coords[1:]

    @property
    def lengths(self) -> np.ndarray:
        e = self.edges
        return np.hypot(e[:, 0], e[:, 1])

    @property
    def progress(self) -> np.ndarray:
        c = self.coords
        if self.kind == "rst":
            r = np.hypot(c[:, 0], c[:, 1])
            return r[:-1] - r[1:]
        dx, dy = self.direction
        step = c[1:] - c[:-1]
        return step[:, 0] * dx + step[:, 1] * dy

    @property
    def frame_edges(self) -> np.ndarray:
        """Each edge rotated by ``-arg(X_{k-1})``: radial component first."""
        prev = self.coords[:-1]
        ang = np.arctan2(prev[:, 1], prev[:, 0])
        e = self.edges
        c, s = np.cos(ang), np.sin(ang)
        return np.column_stack([c * e[:, 0] + s * e[:, 1], -s * e[:, 0] + c * e[:, 1]])

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        buf.write("hop,x,y,edge_len,progress\n")
        ln = np.concatenate([[0.0], self.lengths])
        pr = np.concatenate([[0.0], self.progress])
        for k, (x, y) in enumerate(self.coords):
            buf.write(f"{k},{fmt(x)},{fmt(y)},{fmt(ln[k])},{fmt(pr[k])}\n")
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text


def _chain(f: Forest, v: int, max_hops: int | None) -> tuple[list[int], bool]:
    if not 0 <= v < len(f):
        raise IndexError(f"unknown vertex {v}")
    seq = [v]
    u = v
    censored = False
    while max_hops is None or len(seq) - 1 < max_hops:
        if f.censored[u]:
            censored = True
            break
        a = int(f.ancestor[u])
        if a < 0:
            break
        seq.append(a)
        u = a
        if len(seq) > len(f) + 1:
            raise RuntimeError("ancestor map contains a cycle")
    return seq, censored


def radial_path(f: Forest, v: int) -> PathTrace:
    """Path from ``v`` to the origin in a radial tree."""
    if f.kind != "rst":
        raise ValueError("radial_path needs a radial tree")
    seq, cens = _chain(f, v, None)
    return PathTrace(f.points.points[seq], "rst", np.array(seq), censored=cens)


def directed_path(f: Forest, v: int, max_hops: int) -> PathTrace:
    """Directed path from ``v``, stopped at a censored vertex or after ``max_hops``."""
    if f.kind != "dsf":
        raise ValueError("directed_path needs a directed forest")
    seq, cens = _chain(f, v, max_hops)
    return PathTrace(f.points.points[seq], "dsf", np.array(seq), direction=f.direction, censored=cens)


def max_deviation(t: PathTrace) -> float:
    """Largest transverse displacement of the path.

    Radial paths are first rotated so ``X_0`` lies on the positive x-axis.
    Directed paths are measured from the line through ``X_0`` along the
    direction; the polyline maximum is reached at a vertex.
    """
    c = t.coords
    if t.kind == "rst":
        ang = math.atan2(c[0, 1], c[0, 0])
        trans = -math.sin(ang) * c[:, 0] + math.cos(ang) * c[:, 1]
    else:
        dx, dy = t.direction
        rel = c - c[0]
        trans = -dy * rel[:, 0] + dx * rel[:, 1]
    return float(np.max(np.abs(trans))) if len(trans) else 0.0


# ------------------------------------------------------ Markovian times


@dataclass
class XiState:
    """``xi[n-1]`` holds ``xi_n`` for ``n = 1..H``; ``markov_times`` starts with ``tau_0 = 1``."""

    xi: np.ndarray
    markov_times: list[int]
    progress: np.ndarray
    lengths: np.ndarray


def xi_step(xi: float, p: float, length: float) -> float:
    """One step of ``xi' = max(xi - P, L - P)``, floored at 0."""
    return max(xi - p, length - p, 0.0)


def xi_sequence(t: PathTrace) -> XiState:
    """Run the projection recursion along a directed path.

    ``xi_n`` is the extent, past the line through ``T_n`` orthogonal to the
    direction, of the discs ``B(T_k, L_k)``, ``k < n``, already known to be
    empty.  Time ``m >= 2`` is Markovian when ``P_m >= xi_m``.
    """
    if t.kind != "dsf":
        raise ValueError("xi_sequence needs a directed path")
    if t.hop_count < 1:
        raise ValueError("path has no edges")
    p = t.progress
    ln = t.lengths
    h = len(p)
    xi = np.empty(h)
    xi[0] = max(ln[0] - p[0], 0.0)
    for n in range(1, h):
        xi[n] = xi_step(xi[n - 1], p[n], ln[n])
    times = [1] + [m for m in range(2, h) if p[m] >= xi[m - 1]]
    return XiState(xi, times, p, ln)


def markov_times_geometric(t: PathTrace) -> list[int]:
    """Markovian times from the discs directly.

    ``m`` qualifies when no disc ``B(T_k, L_k)`` with ``k <= m - 1`` meets the
    open half-plane beyond ``T_{m+1}``.
    """
    if t.kind != "dsf":
        raise ValueError("needs a directed path")
    dx, dy = t.direction
    c = t.coords
    s = c[:, 0] * dx + c[:, 1] * dy  # coordinate along the direction
    ln = t.lengths
    h = len(ln)
    reach = s[:-1] + ln  # farthest extent of each disc along the direction
    times = [1]
    for m in range(2, h):
        if np.all(reach[:m] <= s[m + 1]):
            times.append(m)
    return times


# ------------------------------------------------------------ long walks


class DSFWalker:
    """Directed path with direction ``-e_x`` on a lazily sampled Poisson field.

    The walk starts at ``start`` (a Palm point) and repeatedly jumps to the
    nearest field point with strictly smaller x-coordinate.  Cells to the
    right of the walker are dropped periodically.
    """

    def __init__(self, field: PoissonField, start=(0.0, 0.0)):
        self.field = field
        self.pos = np.asarray(start, dtype=float)
        self.steps = 0

    def _block(self, ci: int, cj: int, k: int) -> np.ndarray:
        cells = [self.field.cell(i, j) for i in range(ci - k, ci + 1) for j in range(cj - k, cj + k + 1)]
        cells = [c for c in cells if len(c)]
        return np.concatenate(cells) if cells else np.empty((0, 2))

    def step(self) -> np.ndarray:
        tx, ty = float(self.pos[0]), float(self.pos[1])
        h = self.field.h
        ci, cj = self.field.cell_of(self.pos)
        k = 1
        while True:
            pts = self._block(ci, cj, k)
            if len(pts):
                pts = pts[pts[:, 0] < tx]
            if len(pts):
                d = np.hypot(pts[:, 0] - tx, pts[:, 1] - ty)
                a = int(np.argmin(d))
                reach = min(tx - (ci - k) * h, ty - (cj - k) * h, (cj + k + 1) * h - ty)
                if d[a] < reach:
                    nxt = pts[a]
                    break
            k += 1
        self.pos = nxt.copy()
        self.steps += 1
        if self.steps % 500 == 0:
            keep = ci + 2
            self.field.forget(lambda i, j: i <= keep and i >= ci - 60)
        return self.pos

    def walk(self, n: int) -> PathTrace:
        pts = [self.pos.copy()]
        for _ in range(n):
            pts.append(self.step().copy())
        return PathTrace(np.array(pts), "dsf", direction=(-1.0, 0.0))


def simulate_directed_path(n_transitions: int, seed: int = 0, replicate_id: int = 0) -> PathTrace:
    """Directed path of ``n_transitions`` hops from a Palm origin."""
    field_ = PoissonField(1.0, seed, replicate_id, name="dsf_walk")
    return DSFWalker(field_).walk(n_transitions)


@dataclass
class PathConstants:
    p: float
    p_y: float
    l_alpha: dict
    n_transitions: int
    ci_halfwidth: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "p_y": self.p_y,
                           "l_alpha": {repr(float(a)): v for a, v in self.l_alpha.items()},
                           "n": self.n_transitions, "ci": self.ci_halfwidth}, indent=2, sort_keys=True)


def _edge_g(tag: str, edges: np.ndarray, alpha: float = 1.0, box=None) -> np.ndarray:
    """``g`` evaluated on directed edge vectors ``T_{k+1} - T_k`` (direction ``-e_x``)."""
    ux, uy = -edges[:, 0], -edges[:, 1]
    if tag == "progress":
        return -ux
    if tag == "abs_transverse":
        return np.abs(uy)
    if tag == "length":
        return np.hypot(ux, uy) ** alpha
    if tag == "one":
        return np.ones(len(edges))
    if tag == "box":
        if box is None:
            raise ValueError("box needs (xmin, xmax, ymin, ymax)")
        x0, x1, y0, y1 = box
        return ((ux >= x0) & (ux <= x1) & (uy >= y0) & (uy <= y1)).astype(float)
    raise ValueError(f"unknown g {tag!r}; choose from progress, abs_transverse, length, one, box")


G_TAGS = ("progress", "abs_transverse", "length", "one", "box")
MIN_TRANSITIONS = 1000


def estimate_path_constants(n_transitions: int, seed: int = 0, alphas=(1.0,),
                            n_batches: int = 40) -> PathConstants:
    """Cesàro averages of progress, transverse step and ``|U|^alpha`` along one
    long directed path, with batch-means confidence half-widths."""
    if n_transitions < MIN_TRANSITIONS:
        raise ValueError(f"need at least {MIN_TRANSITIONS} transitions, got {n_transitions}")
    t = simulate_directed_path(n_transitions, seed)
    e = t.edges
    prog = batch_means(_edge_g("progress", e), n_batches)
    trans = batch_means(_edge_g("abs_transverse", e), n_batches)
    la = {float(a): batch_means(_edge_g("length", e, a), n_batches) for a in alphas}
    ci = {"p": prog.halfwidth, "p_y": trans.halfwidth}
    ci.update({f"l_{float(a)!r}": v.halfwidth for a, v in la.items()})
    return PathConstants(prog.mean, trans.mean, {a: v.mean for a, v in la.items()}, n_transitions, ci)


def edge_measure_estimate(g: str, n_transitions: int, seed: int = 0, *, alpha: float = 1.0,
                          box=None, n_batches: int = 40) -> BatchMeans:
    """Long-run path average of ``g(T_{k+1} - T_k)``."""
    if g not in G_TAGS:
        raise ValueError(f"unknown g {g!r}; choose from {G_TAGS}")
    t = simulate_directed_path(n_transitions, seed)
    return batch_means(_edge_g(g, t.edges, alpha, box), n_batches)


# ------------------------------------------------------------- radial paths


def palm_with_point(x: float, seed: int, replicate_id: int, radius: float | None = None) -> PointSet:
    """Palm sample in ``Disk(radius)`` with ``X = (x, 0)`` appended last.

    With ``radius = x`` the radial path of ``X`` is exact: every ancestor
    query it needs lies in ``B(O, x)``.
    """
    radius = x if radius is None else radius
    ps = sample_palm_poisson(SamplerConfig(window_radius=radius, seed=seed), replicate_id)
    return ps.with_point((x, 0.0))


@dataclass
class HopRatio:
    radius: float
    ratio: Estimator
    frame_progress: Estimator
    n_paths: int


def hop_ratio_series(radii, n_paths: int, seed: int = 0) -> list[HopRatio]:
    """``H(X)/|X|`` and the frame-averaged progress for ``X = (x, 0)``."""
    out = []
    for x in radii:
        ratio, frame = Estimator(), Estimator()
        for rid in range(n_paths):
            ps = palm_with_point(float(x), seed, rid)
            f = build_rst(ps)
            t = radial_path(f, len(ps) - 1)
            ratio.add(t.hop_count / x)
            frame.add(float(np.mean(t.frame_edges[:, 0])))
        out.append(HopRatio(float(x), ratio, frame, n_paths))
    return out


# ---------------------------------------------------------------- domination


def _upper_envelope(coords: np.ndarray, t: float) -> float:
    """``max(0, sup{y : (t, y) on the polyline})``."""
    best = 0.0
    for (x0, y0), (x1, y1) in zip(coords[:-1], coords[1:]):
        if min(x0, x1) <= t <= max(x0, x1):
            if x1 == x0:
                y = max(y0, y1)
            else:
                y = y0 + (y1 - y0) * (t - x0) / (x1 - x0)
            best = max(best, y)
    return best


def domination_check(ps: PointSet, x: float, tol: float = 1e-9) -> bool:
    """Compare the radial path of ``X = (x, 0)`` with the directed path from
    ``X`` built on the points with ``y >= 0`` only.

    Returns ``True`` when ``y(t) <= yhat(t)`` at every breakpoint of either
    polyline; between breakpoints ``y - yhat`` is convex, so this is
    exhaustive.
    """
    if not ps.has_origin:
        raise ValueError("needs a Palm sample")
    full = ps.with_point((x, 0.0))
    xi = len(full) - 1
    rpath = radial_path(build_rst(full), xi)
    keep = full.points[:, 1] >= 0
    upper = full.subset(keep)
    xu = int(np.count_nonzero(keep)) - 1
    fd = build_dsf(upper, (-1.0, 0.0))
    tmin = float(rpath.coords[:, 0].min())
    seq, cens = [xu], False
    u = xu
    while upper.points[u, 0] >= tmin:
        if fd.censored[u]:
            cens = True
            break
        a = int(fd.ancestor[u])
        if a < 0:
            break
        seq.append(a)
        u = a
    dcoords = upper.points[seq]
    if cens or dcoords[-1, 0] > tmin:
        raise ValueError("directed path left the window before covering the radial path")
    bx = np.unique(np.concatenate([rpath.coords[:, 0], dcoords[:, 0]]))
    bx = bx[(bx >= tmin) & (bx <= x)]
    # directed path is x-monotone (decreasing): interpolate on the reversed arrays
    yhat = np.interp(bx, dcoords[::-1, 0], dcoords[::-1, 1])
    for t, yh in zip(bx, yhat):
        if _upper_envelope(rpath.coords, float(t)) > yh + tol:
            return False
    return True
