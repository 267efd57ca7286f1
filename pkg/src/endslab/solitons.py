"""Closed-form gradient shrinking soliton profiles and radial quadrature of their functionals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import erfc, gammaincc

from .errors import TailTooFat
from .estimates.alpha import TAIL_FRACTION, limsup_proxy

QUAD_TOL = 1e-9

Radial = Callable[[np.ndarray], np.ndarray]


def sphere_area(k: int) -> float:
    """Area of the unit sphere ``S^k`` in ``R^(k+1)``."""
    return 2 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class SolitonExample:
    """Radial data of a shrinker: potential, scalar curvature, ``|grad f|^2`` and area of the level sets.

    ``tail`` returns an upper bound for ``int_r^inf e^{-f} A`` and is exact for
    the shipped profiles.
    """

    name: str
    n: int
    f: Radial
    S: Radial
    grad_f_sq: Radial
    area: Radial
    tail: Callable[[float], float]
    r_quad_max: float = 14.0
    exact: bool = True
    ball_note: str = "balls are sublevel sets of the distance to the tip"
    params: dict = field(default_factory=dict)

    def describe(self) -> str:
        extra = "" if self.exact else " (identity imposed, not a genuine soliton)"
        return f"{self.name} n={self.n}{extra}"


def _gauss_tail(n: int, r: float) -> float:
    # int_r^inf e^{-s^2/4} s^{n-1} ds, via s^2/4 = t
    return 2 ** (n - 1) * math.gamma(n / 2) * float(gammaincc(n / 2, r * r / 4))


def gaussian(n: int = 3) -> SolitonExample:
    """Flat ``R^n`` with ``f = r^2/4``."""
    a = sphere_area(n - 1)
    return SolitonExample(
        name="gaussian",
        n=n,
        f=lambda r: np.asarray(r, dtype=float) ** 2 / 4,
        S=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        grad_f_sq=lambda r: np.asarray(r, dtype=float) ** 2 / 4,
        area=lambda r: a * np.asarray(r, dtype=float) ** (n - 1),
        tail=lambda r: a * _gauss_tail(n, r),
    )


def cylinder(n: int = 4) -> SolitonExample:
    """Round cylinder ``S^{n-1} x R``; the radial variable is the distance along the axis."""
    if n < 3:
        raise ValueError("the cylinder needs n >= 3")
    radius = math.sqrt(2 * (n - 2))
    a = 2 * sphere_area(n - 1) * radius ** (n - 1)
    s0 = (n - 1) / 2
    return SolitonExample(
        name="cylinder",
        n=n,
        f=lambda t: np.asarray(t, dtype=float) ** 2 / 4 + s0,
        S=lambda t: np.full_like(np.asarray(t, dtype=float), s0),
        grad_f_sq=lambda t: np.asarray(t, dtype=float) ** 2 / 4,
        area=lambda t: np.full_like(np.asarray(t, dtype=float), a),
        tail=lambda t: a * math.exp(-s0) * math.sqrt(math.pi) * float(erfc(t / 2)),
        ball_note="balls are slabs |t| < R around a cross-section; the level-set area is constant",
        params={"sphere_radius": radius},
    )


def conical_toy(n: int = 3, c: float = 1.0) -> SolitonExample:
    """Flat-area profile with curvature ``c/r^2`` outside the unit ball; ``|grad f|^2`` is defined as ``f - S``."""
    a = sphere_area(n - 1)

    def S(r):
        r = np.asarray(r, dtype=float)
        return c / np.maximum(r, 1.0) ** 2

    def f(r):
        return np.asarray(r, dtype=float) ** 2 / 4 + c

    return SolitonExample(
        name="conical_toy",
        n=n,
        f=f,
        S=S,
        grad_f_sq=lambda r: f(r) - S(r),
        area=lambda r: a * np.asarray(r, dtype=float) ** (n - 1),
        tail=lambda r: a * math.exp(-c) * _gauss_tail(n, r),
        exact=False,
        params={"c": c},
    )


SOLITONS: dict[str, Callable[..., SolitonExample]] = {
    "gaussian": gaussian,
    "cylinder": cylinder,
    "conical_toy": conical_toy,
}


def get_soliton(name: str, **kw) -> SolitonExample:
    try:
        return SOLITONS[name](**kw)
    except KeyError:
        raise ValueError(f"unknown soliton {name!r}; choose from {sorted(SOLITONS)}") from None


def perturbed(ex: SolitonExample, df: float) -> SolitonExample:
    """Same example with ``f`` shifted by ``df`` and everything else unchanged."""
    f0 = ex.f
    return replace(ex, name=f"{ex.name}+{df:g}", f=lambda r: f0(r) + df,
                   tail=lambda r: ex.tail(r) * math.exp(-df))


def radius_grid(ex: SolitonExample, points: int = 4001) -> np.ndarray:
    return np.linspace(0.0, ex.r_quad_max, points)


def soliton_identity_residual(ex: SolitonExample, grid: np.ndarray | None = None) -> float:
    """``max |grad_f_sq + S - f|`` over a radius grid."""
    r = radius_grid(ex) if grid is None else np.asarray(grid, dtype=float)
    return float(np.max(np.abs(ex.grad_f_sq(r) + ex.S(r) - ex.f(r))))


@dataclass(frozen=True)
class FBoundsReport:
    c1: float
    c2: float
    lower_ok: bool
    upper_ok: bool
    volume_constant: float
    volume_window: tuple[float, float]

    def to_dict(self) -> dict:
        return dict(self.__dict__, volume_window=list(self.volume_window))


def f_bounds_check(ex: SolitonExample, c1_grid: np.ndarray | None = None, r_min_volume: float = 1.0) -> FBoundsReport:
    """Smallest ``c1 + c2`` on a grid with ``|f - r^2/4| <= c1 r + c2``, and the best ``c`` in ``V(r) <= c r^n``."""
    r = radius_grid(ex)
    dev = ex.f(r) - r**2 / 4
    gap = np.abs(dev)
    c1s = np.linspace(0.0, 5.0, 501) if c1_grid is None else np.asarray(c1_grid, dtype=float)
    c2s = np.array([max(0.0, float(np.max(gap - c1 * r))) for c1 in c1s])
    k = int(np.argmin(c1s + c2s))
    c1, c2 = float(c1s[k]), float(c2s[k])
    slack = 1e-12 * max(1.0, float(np.max(r**2)))
    lower_ok = bool(np.all(r**2 / 4 - c1 * r - c2 <= ex.f(r) + slack))
    upper_ok = bool(np.all(ex.f(r) <= r**2 / 4 + c1 * r + c2 + slack))
    V = cumulative_trapezoid(ex.area(r), r, initial=0.0)
    sel = r >= r_min_volume
    cvol = float(np.max(V[sel] / r[sel] ** ex.n))
    return FBoundsReport(c1, c2, lower_ok, upper_ok, cvol, (float(r[sel][0]), float(r[-1])))


def adaptive_simpson(g: Callable[[float], float], a: float, b: float, tol: float, max_depth: int = 50) -> tuple[float, float]:
    """Adaptive Simpson quadrature; returns ``(value, error estimate)``."""

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) * (fa + 4 * fm + fb) / 6

    fa, fb, fm = g(a), g(b), g((a + b) / 2)
    total, err = 0.0, 0.0
    stack = [(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps, depth = stack.pop()
        mid = (lo + hi) / 2
        lm, rm = (lo + mid) / 2, (mid + hi) / 2
        flm, frm = g(lm), g(rm)
        left = simpson(flo, flm, fmid, lo, mid)
        right = simpson(fmid, frm, fhi, mid, hi)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15 * eps:
            total += left + right + delta / 15
            err += abs(delta) / 15
        else:
            stack.append((lo, mid, flo, flm, fmid, left, eps / 2, depth + 1))
            stack.append((mid, hi, fmid, frm, fhi, right, eps / 2, depth + 1))
    return total, err


@dataclass(frozen=True)
class EntropyResult:
    mu: float
    integral: float
    quad_error: float
    tail: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def entropy(ex: SolitonExample, quad_tol: float = QUAD_TOL) -> EntropyResult:
    """``ln((4 pi)^{-n/2} int e^{-f})`` by radial quadrature plus the analytic tail beyond ``r_quad_max``."""
    tail = float(ex.tail(ex.r_quad_max))
    if tail > quad_tol:
        raise TailTooFat(f"tail beyond r={ex.r_quad_max} is {tail:.3e} > {quad_tol:.1e}")

    def g(r: float) -> float:
        x = np.array([r])
        return float(np.exp(-ex.f(x)[0]) * ex.area(x)[0])

    body, qerr = adaptive_simpson(g, 0.0, ex.r_quad_max, quad_tol)
    total = body + tail
    return EntropyResult(math.log(total / (4 * math.pi) ** (ex.n / 2)), total, qerr, tail)


def ball_alpha_series(ex: SolitonExample, r_max: float = 64.0, points: int = 20001,
                      rungs: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Ball averages of ``(S r^2)^{(n-1)/2}`` at ``rungs`` radii up to ``r_max``."""
    r = np.linspace(0.0, r_max, points)
    A = ex.area(r)
    num = cumulative_trapezoid((ex.S(r) * r**2) ** ((ex.n - 1) / 2) * A, r, initial=0.0)
    V = cumulative_trapezoid(A, r, initial=0.0)
    R = np.linspace(r_max / rungs, r_max, rungs)
    idx = np.searchsorted(r, R)
    return R, num[idx] / V[idx]


def soliton_alpha(ex: SolitonExample, tail_fraction: float = TAIL_FRACTION, r_max: float = 64.0) -> float:
    """Tail proxy of the ball-averaged curvature functional; ``inf`` when it keeps growing."""
    R, vals = ball_alpha_series(ex, r_max)
    return limsup_proxy(R, vals, tail_fraction)[0]
