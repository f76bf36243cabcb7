"""Closed forms and quadratures for the radial spanning tree at unit intensity.

The void region that decides the edge of a point X with ``|X| = x`` is the
lens ``B(O, x) ∩ B(X, r)``; its area ``M(x, r)`` drives the edge-length law,
the degree integrals and the Voronoi-cell length.  Integrals use
``scipy.integrate.quad``/``dblquad`` and are accepted only when the reported
error estimate meets the requested tolerance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, special

from .pointprocess import fmt

TOL_1D = 1e-9
TOL_2D = 1e-6
LENS_MIN = 2 * math.pi / 3 - math.sqrt(3) / 2  # M(x, x) / x^2, the smallest M(x, r)/r^2
# Gaussian envelopes below 1e-14 are dropped
_LOG_CUT = 14 * math.log(10)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, what: str, achieved: float, requested: float):
        super().__init__(f"{what}: error estimate {achieved:.3g} exceeds tolerance {requested:.3g}")
        self.achieved = achieved
        self.requested = requested


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float


def _quad(f, a, b, what, tol=TOL_1D, **kw) -> QuadResult:
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=0.0, limit=500, **kw)
    if not err <= tol:
        raise QuadratureError(what, err, tol)
    return QuadResult(float(val), float(err))


def _dblquad(f, a, b, glo, ghi, what, tol=TOL_2D) -> QuadResult:
    """``∫_a^b ∫_{glo(t)}^{ghi(t)} f(s, t) ds dt``."""
    val, err = integrate.dblquad(f, a, b, glo, ghi, epsabs=tol * 1e-2, epsrel=0.0)
    if not err <= tol:
        raise QuadratureError(what, err, tol)
    return QuadResult(float(val), float(err))


# ----------------------------------------------------------------------- lens


def _check_lens_args(x, r, rmax_factor=1.0):
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    if np.any(r < 0) or np.any(r > rmax_factor * x * (1 + 1e-12)):
        raise ValueError("need 0 <= r <= x")
    return x, np.minimum(r, rmax_factor * x)


def lens_angle(x, r):
    """``phi = 2 arcsin(r / 2x)``."""
    return 2.0 * np.arcsin(np.asarray(r, dtype=float) / (2.0 * np.asarray(x, dtype=float)))


def _lens(x, r):
    phi = lens_angle(x, r)
    return x ** 2 * (phi - np.sin(2 * phi) / 2) + r ** 2 * (np.pi / 2 - phi / 2 - np.sin(phi) / 2)


def lens_area(x, r):
    """Area of ``B(O, x) ∩ B(X, r)`` for ``|X| = x`` and ``0 <= r <= x``."""
    x, r = _check_lens_args(x, r)
    out = _lens(x, r)
    return float(out) if out.ndim == 0 else out


def lens_area_derivative(x, r):
    """``dM/dr`` obtained by differentiating the closed form through ``phi(r)``."""
    x, r = _check_lens_args(x, r)
    phi = lens_angle(x, r)
    dphi = 1.0 / (x * np.sqrt(1.0 - (r / (2 * x)) ** 2))
    out = (x ** 2 * (1 - np.cos(2 * phi)) * dphi
           + 2 * r * (np.pi / 2 - phi / 2 - np.sin(phi) / 2)
           - r ** 2 * (0.5 + np.cos(phi) / 2) * dphi)
    return float(out) if out.ndim == 0 else out


def lens_area_linf(point, r):
    """Area of the sup-norm lens ``{|Y|_inf < |X|_inf} ∩ {|Y - X|_inf < r}``."""
    px, py = float(point[0]), float(point[1])
    t = math.hypot(px, py)
    r = np.asarray(r, dtype=float)
    big, small = max(abs(px), abs(py)), min(abs(px), abs(py))
    if np.any(r < 0) or np.any(r > big * (1 + 1e-12)):
        raise ValueError("need 0 <= r <= |X|_inf")
    g = (big - small) if t > 0 else 0.0
    out = np.where(r < g, 2 * r ** 2, r ** 2 + r * g)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------- edge-length law


def edge_length_atom(x: float) -> float:
    """Mass of ``{L(X) = |X|}``: the lens ``B(O,x) ∩ B(X,x)`` is empty."""
    return math.exp(-LENS_MIN * x * x)


def edge_length_ccdf(x, r):
    """``P(L(X) >= r) = 1(r <= x) exp(-M(x, r))``."""
    if x <= 0:
        raise ValueError("x must be positive")
    r = np.asarray(r, dtype=float)
    rr = np.clip(r, 0.0, x)
    out = np.where(r <= x, np.exp(-_lens(x, rr)), 0.0)
    out = np.where(r <= 0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def edge_length_density(x, r):
    """Absolutely continuous part of the edge-length law on ``(0, x)``."""
    r = np.asarray(r, dtype=float)
    inside = (r > 0) & (r < x)
    rr = np.clip(r, 0.0, x)
    out = np.where(inside, lens_area_derivative(x, rr) * np.exp(-_lens(x, rr)), 0.0)
    return float(out) if out.ndim == 0 else out


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def joint_density_L_theta(x, r, theta, arg: float = 0.0):
    """Density of ``(L, theta)`` on ``r in (0, x)``.

    Given ``L = r``, the direction of ``A(X) - X`` is uniform on an arc of
    half-width ``psi = arccos(r / 2x)`` centred on ``pi + arg(X)``.  The atom at
    ``(x, pi + arg(X))`` is reported by :func:`edge_length_atom`.
    """
    r = np.asarray(r, dtype=float)
    rr = np.clip(r, 1e-300, x)
    psi = np.arccos(rr / (2 * x))
    inside = (r > 0) & (r < x) & (np.abs(_wrap(np.asarray(theta) - np.pi - arg)) < psi)
    dens = edge_length_density(x, rr) / (2 * psi)
    out = np.where(inside, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def _cut(coef: float) -> float:
    """Radius past which ``exp(-coef r^2)`` is below 1e-14."""
    return math.sqrt(_LOG_CUT / coef)


def joint_density_mass(x: float) -> QuadResult:
    """Total mass of the joint density plus the atom (should be 1)."""
    top = min(x, _cut(LENS_MIN))

    def f(th, r):
        return joint_density_L_theta(x, r, th)

    psi = lambda r: math.acos(min(r / (2 * x), 1.0))
    res = _dblquad(f, 0.0, top, lambda r: math.pi - psi(r), lambda r: math.pi + psi(r),
                   "joint density mass", tol=1e-9)
    atom = edge_length_atom(x) if top == x else 0.0
    return QuadResult(res.value + atom, res.error)


def mean_edge_length(x: float) -> float:
    """``E L(X) = ∫_0^x exp(-M(x, r)) dr`` (the atom is included by the CCDF)."""
    if x <= 0:
        raise ValueError("x must be positive")
    top = min(x, _cut(LENS_MIN))
    return _quad(lambda r: math.exp(-_lens(x, r)), 0.0, top, "mean edge length").value


def mean_progress(x: float) -> float:
    """Mean radial progress ``E(|X| - |A(X)|)`` at ``|X| = x``."""
    if x <= 0:
        raise ValueError("x must be positive")
    top = min(x, _cut(LENS_MIN))

    def f(phi, r):
        # ancestor at angle pi + phi from X = (x, 0)
        dist = math.sqrt(max(x * x + r * r - 2 * x * r * math.cos(phi), 0.0))
        psi = math.acos(r / (2 * x))
        gain = (2 * x * r * math.cos(phi) - r * r) / (x + dist)  # x - dist without cancellation
        return gain * float(edge_length_density(x, r)) / (2 * psi)

    psi = lambda r: math.acos(min(r / (2 * x), 1.0))
    res = _dblquad(f, 0.0, top, lambda r: -psi(r), psi, "mean progress", tol=TOL_2D)
    atom = x * edge_length_atom(x) if top == x else 0.0
    return res.value + atom


# ------------------------------------------------------------------- degrees


def mean_degree_origin() -> float:
    """``E D(O) = pi / (2 pi/3 - sqrt(3)/2)``."""
    return math.pi / LENS_MIN


def mean_degree_origin_quad() -> float:
    """Same constant as ``2 pi ∫_0^inf exp(-r^2 M(1,1)) r dr``, by quadrature."""
    return 2 * math.pi * _quad(lambda r: math.exp(-LENS_MIN * r * r) * r, 0.0, _cut(LENS_MIN) * 1.2,
                               "origin degree", tol=1e-12).value


_D_CAP = 7.5  # children at distance > 7.5 carry mass below exp(-1.2 * 56)


def _child_limits(x: float):
    """Angular limit ``theta(t)`` for ``T = ((x + t) cos theta, (x + t) sin theta)``.

    ``T`` can be a child only when ``|T - X| < |T|``, i.e. ``theta <
    arccos(x / 2 rho)``; the cap ``|T - X| <= 7.5`` trims the negligible rest.
    """
    def hi(t):
        rho = x + t
        full = math.acos(x / (2 * rho))
        c = 1.0 - (_D_CAP ** 2 - t * t) / (2 * rho * x)
        if c <= -1.0:
            return full
        return min(full, math.acos(max(c, -1.0)))
    return hi


def _child_lens(x: float, t: float, th: float) -> float:
    """Void area for ``T = (x + t, th)`` to be a child of ``X = (x, 0)``."""
    rho = x + t
    d = math.sqrt(max(t * t + 2 * rho * x * (1 - math.cos(th)), 0.0))
    return float(_lens(rho, min(d, rho)))


def mean_degree_at_campbell(x: float) -> float:
    """``E D(X)`` from the Campbell integral of the child-void probability,
    using :func:`lens_area` for the void area (independent of the printed form)."""
    if x <= 0:
        raise ValueError("x must be positive")
    hi = _child_limits(x)
    res = _dblquad(lambda th, t: math.exp(-_child_lens(x, t, th)) * (x + t), 0.0, _D_CAP,
                   lambda t: 0.0, hi, "mean degree (campbell)", tol=TOL_2D)
    return 1.0 + 2 * res.value


def _degree_integrand(x: float, u: float, th: float) -> float:
    """Integrand of the ``(u, theta)`` form, ``u = rho / x``, written with the
    lens half-angles ``alpha`` (at ``O``) and ``beta = (pi - alpha) / 2``."""
    ca = (1 - u ** -2) / 2 + math.cos(th) / u
    a = math.acos(min(1.0, max(-1.0, ca)))
    e1 = (u * x) ** 2 / 2 * (2 * a - math.sin(2 * a))
    e2 = x * x / 2 * (1 + u * u - 2 * u * math.cos(th)) * (math.pi - a - math.sin(a))
    return math.exp(-e1 - e2) * u


def mean_degree_at(x: float, tol: float = TOL_2D) -> float:
    """``E D(X)`` at ``|X| = x``; tends to 2 as ``x`` grows.

    The ``(u, theta)`` integral is evaluated after the change of variables
    ``u = 1 + t/x`` so the mass near ``u = 1`` stays resolvable for large
    ``x``.
    """
    if x <= 0:
        raise ValueError("x must be positive")
    hi = _child_limits(x)
    # du = dt / x, so 2 x^2 du = 2 x dt
    res = _dblquad(lambda th, t: _degree_integrand(x, 1.0 + t / x, th), 0.0, _D_CAP,
                   lambda t: 0.0, hi, "mean degree", tol=tol / (2 * x))
    return 1.0 + 2 * x * res.value


def asymptotic_degree_quad() -> float:
    """``1 + ∫_{half plane} exp(-pi |Y|^2 / 2) dY`` by the same 2-D engine."""
    res = _dblquad(lambda th, r: math.exp(-math.pi * r * r / 2) * r, 0.0, _cut(math.pi / 2),
                   lambda r: -math.pi / 2, lambda r: math.pi / 2, "asymptotic degree", tol=1e-9)
    return 1.0 + res.value


# ---------------------------------------------------------------- asymptotic


def asymptotic_length_ccdf(r):
    r = np.asarray(r, dtype=float)
    out = np.where(r <= 0, 1.0, np.exp(-np.pi * r ** 2 / 2))
    return float(out) if out.ndim == 0 else out


def _laplace(s: float, power: int) -> float:
    if s < 0:
        raise ValueError("s must be nonnegative")
    f = lambda th, r: (-r * math.cos(th)) ** power * math.exp(-s * r * math.cos(th) - math.pi * r * r / 2) * r
    return _dblquad(f, 0.0, _cut(math.pi / 2), lambda r: -math.pi / 2, lambda r: math.pi / 2,
                    "progress laplace", tol=1e-9).value


def asymptotic_progress_laplace(s: float) -> float:
    """``E exp(-s P)`` for the limiting progress ``P = r cos(theta)``."""
    return _laplace(s, 0)


def asymptotic_progress_laplace_derivative(s: float) -> float:
    """``d/ds E exp(-s P)``; equals minus the mean progress at ``s = 0``."""
    return _laplace(s, 1)


def lambda_alpha(alpha: float) -> float:
    """``alpha ∫_0^inf r^(alpha-1) exp(-pi r^2/2) dr``; 1 at ``alpha = 0``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return 1.0
    # substitute r = v^(1/alpha) to remove the r^(alpha-1) singularity at 0
    top = _cut(math.pi / 2) ** alpha * 1.5
    return _quad(lambda v: math.exp(-math.pi * v ** (2 / alpha) / 2), 0.0, top, "lambda_alpha").value


def lambda_alpha_closed(alpha: float) -> float:
    return math.gamma(alpha / 2 + 1) * (2 / math.pi) ** (alpha / 2)


# ------------------------------------------------------------------- Voronoi


def voronoi_mean_length(lam0: float, lam1: float) -> float:
    """Mean total edge length per cell for the local Voronoi rule:
    ``2 pi lam1 ∫ exp(-lam0 pi r^2) (∫_0^r exp(-lam1 M(r, u)) du) r dr``."""
    if lam0 <= 0 or lam1 < 0:
        raise ValueError("intensities must be positive")
    if lam1 == 0:
        return 0.0
    rtop = _cut(lam0 * math.pi)
    utop = _cut(lam1 * LENS_MIN)
    res = _dblquad(lambda u, r: math.exp(-lam0 * math.pi * r * r - lam1 * _lens(r, u)) * r,
                   0.0, rtop, lambda r: 0.0, lambda r: min(r, utop), "voronoi mean length",
                   tol=TOL_2D / (2 * math.pi * lam1))
    return 2 * math.pi * lam1 * res.value


# ---------------------------------------------------------------- n-th point


def nth_point_length_ccdf(n: int, r: float, lam: float = 1.0) -> float:
    """``P(L(T_n) >= r)`` for the ``n``-th closest point to the origin.

    Given ``|T_n|^2 = t`` the other ``n - 1`` points are uniform in
    ``B(O, sqrt t)``, so each misses the lens with probability
    ``1 - M(sqrt t, r) / (pi t)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if r <= 0:
        return 1.0
    shape, rate = n, math.pi * lam

    def f(t):
        miss = 1.0 - _lens(math.sqrt(t), r) / (math.pi * t)
        return max(miss, 0.0) ** (n - 1) * math.exp((shape - 1) * math.log(t) + shape * math.log(rate)
                                                    - rate * t - special.gammaln(shape))

    hi = special.gammaincinv(shape, 1 - 1e-15) / rate
    if r * r >= hi:
        return 0.0
    return _quad(f, r * r, hi, "n-th point edge length").value


# -------------------------------------------------------------------- curves


@dataclass
class AnalyticCurve:
    name: str
    abscissae: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)
    tolerance: float | None = None

    def __post_init__(self):
        self.abscissae = np.asarray(self.abscissae, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.abscissae.shape != self.values.shape:
            raise ValueError("abscissae and values differ in length")
        if np.any(np.diff(self.abscissae) <= 0):
            raise ValueError("abscissae must be strictly increasing")

    def to_csv(self, dest=None) -> str:
        lines = ["abscissa,value"] + [f"{fmt(a)},{fmt(v)}" for a, v in zip(self.abscissae, self.values)]
        text = "\n".join(lines) + "\n"
        if dest is not None:
            Path(dest).write_text(text)
        return text

    def sidecar(self) -> dict:
        return {"name": self.name, "params": self.params, "tolerance": self.tolerance,
                "n": int(len(self.abscissae))}

    def write(self, csv_path) -> tuple[Path, Path]:
        csv_path = Path(csv_path)
        self.to_csv(csv_path)
        side = csv_path.with_suffix(".json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")
        return csv_path, side


# name -> (function of abscissa and params, required params, tolerance)
CURVES: dict[str, tuple[Callable, tuple[str, ...], float]] = {
    "lens_area": (lambda r, x: lens_area(x, r), ("x",), 0.0),
    "edge_length_ccdf": (lambda r, x: edge_length_ccdf(x, r), ("x",), 0.0),
    "edge_length_density": (lambda r, x: edge_length_density(x, r), ("x",), 0.0),
    "mean_edge_length": (lambda x: mean_edge_length(x), (), TOL_1D),
    "mean_progress": (lambda x: mean_progress(x), (), TOL_2D),
    "mean_degree_at": (lambda x: mean_degree_at(x), (), TOL_2D),
    "asymptotic_length_ccdf": (lambda r: asymptotic_length_ccdf(r), (), 0.0),
    "asymptotic_progress_laplace": (lambda s: asymptotic_progress_laplace(s), (), 1e-9),
    "lambda_alpha": (lambda a: lambda_alpha(a), (), TOL_1D),
    "voronoi_mean_length": (lambda l1, lam0: voronoi_mean_length(lam0, l1), ("lam0",), TOL_2D),
    "nth_point_length_ccdf": (lambda r, n: nth_point_length_ccdf(int(n), r), ("n",), TOL_1D),
}


def evaluate_curve(name: str, grid, **params) -> AnalyticCurve:
    if name not in CURVES:
        raise KeyError(f"unknown curve {name!r}; choose from {sorted(CURVES)}")
    fn, needed, tol = CURVES[name]
    missing = [p for p in needed if p not in params]
    if missing:
        raise ValueError(f"curve {name} needs parameter(s) {missing}")
    extra = sorted(set(params) - set(needed))
    if extra:
        raise ValueError(f"curve {name} does not take parameter(s) {extra}")
    grid = np.asarray(grid, dtype=float)
    vals = np.array([fn(a, **params) for a in grid], dtype=float)
    return AnalyticCurve(name, grid, vals, dict(params), tol)
