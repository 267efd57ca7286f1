"""Growth diagnostics for positive solutions: the omega and chi series and power-law fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientLayers, NonPositiveInput
from ..geometry import DiscreteManifold, ProfileSeries
from .alpha import TAIL_FRACTION, compute_alpha_level, limsup_proxy, tail_indices

FIT_TOL = 0.25


def exponent_a(m: float, Upsilon: float) -> float:
    """Positive root of ``a**2 + (4m-1) a - 4 Upsilon = 0``."""
    if m <= 0 or Upsilon < 0:
        raise ValueError("need m > 0 and Upsilon >= 0")
    k = 4 * m - 1
    disc = math.sqrt(k * k + 16 * Upsilon)
    if k > 0:
        # rationalised form avoids cancellation for small Upsilon
        return 8 * Upsilon / (disc + k)
    return (disc - k) / 2


def quadratic_decay_exponent(m: float, Upsilon: float) -> float:
    """Growth exponent ``a + 4m + 1`` used for the quadratic-decay bound."""
    return exponent_a(m, Upsilon) + 4 * m + 1


@dataclass(frozen=True)
class Epsilon:
    value: float
    critical: bool
    in_regime: bool


def epsilon_of(q: float, nu: float) -> Epsilon:
    """``(2q + 1 - 2 nu) / q`` with regime flags (``0 <= eps < 1/2``)."""
    if q < 1 or nu <= 1:
        raise ValueError("need q >= 1 and nu > 1")
    eps = (2 * q + 1 - 2 * nu) / q
    critical = abs(eps) <= 1e-12
    if critical:
        eps = 0.0
    return Epsilon(eps, critical, 0 <= eps < 0.5)


def gamma_bound(C0: float, eps: Epsilon, m: float, alpha_bar: float | None = None) -> float | None:
    """Exponent bound from the induction argument; ``None`` when it does not apply.

    ``C0`` is floored at 1, the range in which the argument operates.
    """
    C0 = max(C0, 1.0)
    if eps.value > 0:
        try:
            return (100 * C0) ** (2 / eps.value) + 4 * m + 1
        except OverflowError:
            return math.inf
    if eps.critical and alpha_bar is not None and alpha_bar <= 1.0 / (100 * C0) ** 2:
        return (100 * C0) ** 2 + 4 * m + 1
    return None


def _require(man: DiscreteManifold, r0: float, need: int = 5) -> np.ndarray:
    radii = man.radii[man.radii >= r0]
    if radii.size < need:
        raise InsufficientLayers(f"only {radii.size} radii in [{r0}, {man.radii[-1]}]")
    return radii


def _sublevel_sum(man: DiscreteManifold, weights: np.ndarray, lo: float, radii: np.ndarray) -> np.ndarray:
    """``sum_{lo <= rho < r} weights`` for each ``r`` in ``radii``."""
    order = np.argsort(man.rho, kind="stable")
    srho = man.rho[order]
    cum = np.concatenate([[0.0], np.cumsum(weights[order])])
    k_lo = np.searchsorted(srho, lo, side="left")
    k = np.searchsorted(srho, radii, side="left")
    return cum[k] - cum[k_lo]


def _level_integral(man: DiscreteManifold, f: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``int_{Sigma(r)} f`` with area element ``mu / h``."""
    return np.array([np.sum(man.measure[ids] * f[ids]) / man.h for ids in map(man.level_set, radii)])


@dataclass(frozen=True)
class OmegaReport:
    omega: ProfileSeries
    residual: ProfileSeries
    max_residual: float
    C_r0: float
    residual_bounded: bool
    a: float
    xi_constant: float
    r0: float

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "a": self.a,
            "max_residual": self.max_residual,
            "C_r0": self.C_r0,
            "residual_bounded": self.residual_bounded,
            "xi_constant": self.xi_constant,
        }


def omega_diagnostics(man: DiscreteManifold, u: np.ndarray, r0: float, m: float, Upsilon: float) -> OmegaReport:
    """Second-order differential inequality for ``omega(r) = int_{D(r)\\D(r0)} u / rho**2``.

    ``|grad rho|`` is 1 on radial edges, so the gradient factor is dropped.
    """
    u = np.asarray(u, dtype=float)
    radii = _require(man, r0)
    w = man.measure * u / man.rho**2
    om = ProfileSeries(radii, _sublevel_sum(man, w, r0, radii), "omega")
    d1, d2 = om.derivative(1), om.derivative(2)
    r = d1.radii
    mid = om.values[1:-1]
    res = r**2 * d2.values - (4 * m - 2) * r * d1.values - 4 * Upsilon * mid
    residual = ProfileSeries(r, res, "omega_residual")
    _, divergent = limsup_proxy(r, np.maximum(res, 0.0) + 1e-300, TAIL_FRACTION)

    a = exponent_a(m, Upsilon) if m > 0 else 0.0
    xi = ProfileSeries(radii, radii**a * om.values, "xi")
    x1, x2 = xi.derivative(1), xi.derivative(2)
    q = (r * x2.values - (2 * a + 4 * m - 2) * x1.values) / r ** (a - 1)
    max_res = float(res.max())
    return OmegaReport(
        omega=om,
        residual=residual,
        max_residual=max_res,
        C_r0=max(0.0, max_res),
        residual_bounded=not divergent,
        a=a,
        xi_constant=float(q.max()),
        r0=r0,
    )


@dataclass(frozen=True)
class ChiReport:
    chi: ProfileSeries
    chi_prime: ProfileSeries
    C0: float
    C0_potential: float
    Lambda0: float
    alpha: float
    alpha_bar: float
    theta: float
    q: float
    nu: float
    chi_monotone: bool
    n_samples: int
    lhs_max: float

    def to_dict(self) -> dict:
        def enc(x):
            return "inf" if math.isinf(x) else x

        return {
            "C0": enc(self.C0),
            "C0_potential": enc(self.C0_potential),
            "Lambda0": self.Lambda0,
            "alpha": enc(self.alpha),
            "alpha_bar": self.alpha_bar,
            "theta": self.theta,
            "q": self.q,
            "nu": self.nu,
            "chi_monotone": self.chi_monotone,
            "n_samples": self.n_samples,
            "lhs_max": self.lhs_max,
        }


def chi_diagnostics(man: DiscreteManifold, u: np.ndarray, r0: float, m: float, q: float, theta: float = 1.0,
                    nu: float = 1.5, alpha: float | None = None) -> ChiReport:
    """Measure the constant in ``r^{4m} chi'' <= (C0 abar / theta^{2nu/q}) int chi^{1/q}((1+theta)t) chi'^{1-1/q} t^{4m-2-1/q} dt + Lambda0``.

    ``chi(r) = int_{D(r)\\D(R0)} u / rho**(4m)``.  ``C0`` is the smallest
    nonnegative constant making the inequality hold at every sampled radius;
    ``C0_potential`` is the same for the potential term alone
    (``int_{D(r)\\D(r0)} sigma u`` on the left).
    """
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    u = np.asarray(u, dtype=float)
    radii = _require(man, r0)
    r_top = man.radii[-1]
    # the outermost layer may carry zero boundary data and is never sampled
    if np.any(~(u[man.rho < r_top] > 0)):
        raise NonPositiveInput("u must be positive below the outermost layer")
    wchi = man.measure * u / man.rho ** (4 * m)
    chi = ProfileSeries(radii, _sublevel_sum(man, wchi, man.R0, radii), "chi")
    chi_p = ProfileSeries(radii, _level_integral(man, u, radii) / radii ** (4 * m), "chi'")
    chi_pp = chi_p.derivative(1)

    ids0 = man.level_set(radii[0])
    grad = man.gradient_magnitude(u)
    Lambda0 = float(np.sum(man.measure[ids0] * (u[ids0] + grad[ids0])) / man.h)

    if alpha is None:
        alpha = compute_alpha_level(man, q)
    abar = min(alpha, 1.0)

    # integrand of the potential term on the grid t_k
    def chi_at(s):
        return _sublevel_sum(man, wchi, man.R0, np.atleast_1d(s))

    ok = (1 + theta) * radii <= r_top + 1e-9
    t = radii[ok]
    if t.size < 3:
        raise InsufficientLayers("not enough radii with (1+theta) r inside the model")
    g = chi_at((1 + theta) * t) ** (1 / q) * chi_p.values[ok] ** (1 - 1 / q) * t ** (4 * m - 2 - 1 / q)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(t))])

    sel = np.isin(chi_pp.radii, t)
    r = chi_pp.radii[sel]
    I = integral[np.searchsorted(t, r)]
    lhs = r ** (4 * m) * chi_pp.values[sel]
    excess = lhs - Lambda0
    sigma_u = _sublevel_sum(man, man.measure * man.sigma * u, r0, r)
    scale = theta ** (2 * nu / q)

    def smallest(numer):
        pos = numer > 0
        if not pos.any():
            return 0.0
        if abar == 0.0 or np.any(I[pos] <= 0):
            return math.inf
        return float(np.max(numer[pos] * scale / (abar * I[pos])))

    return ChiReport(
        chi=chi,
        chi_prime=chi_p,
        C0=smallest(excess),
        C0_potential=smallest(sigma_u),
        Lambda0=Lambda0,
        alpha=float(alpha),
        alpha_bar=abar,
        theta=theta,
        q=q,
        nu=nu,
        chi_monotone=bool(np.all(np.diff(chi.values) >= 0)),
        n_samples=int(r.size),
        lhs_max=float(lhs.max()) if lhs.size else float("nan"),
    )


@dataclass(frozen=True)
class GrowthReport:
    fitted_exponent: float
    intercept: float
    tail_window: tuple[float, float]
    bound_a: float | None
    bound_Gamma: float | None
    a: float | None
    epsilon: float | None
    nu: float | None
    q: float | None
    fit_tol: float
    Lambda0: float | None = None
    bounds: dict = field(default_factory=dict)

    @property
    def bound(self) -> float | None:
        vals = [b for b in (self.bound_a, self.bound_Gamma) if b is not None]
        return min(vals) if vals else None

    @property
    def margin(self) -> float | None:
        return None if self.bound is None else self.bound - self.fitted_exponent

    @property
    def passed(self) -> bool | None:
        return None if self.bound is None else bool(self.fitted_exponent <= self.bound + self.fit_tol)

    def to_dict(self) -> dict:
        def enc(x):
            return "inf" if isinstance(x, float) and math.isinf(x) else x

        return {
            "fitted_exponent": self.fitted_exponent,
            "Lambda": math.exp(self.intercept),
            "tail_window": list(self.tail_window),
            "bound_a": self.bound_a,
            "bound_Gamma": enc(self.bound_Gamma),
            "a": self.a,
            "epsilon": self.epsilon,
            "nu": self.nu,
            "q": self.q,
            "Lambda0": self.Lambda0,
            "fit_tol": self.fit_tol,
            "margin": enc(self.margin),
            "pass": self.passed,
        }


def growth_fit(man: DiscreteManifold, u: np.ndarray, tail_fraction: float = TAIL_FRACTION, *,
               m: float | None = None, Upsilon: float | None = None, C0: float | None = None,
               q: float | None = None, nu: float | None = None, alpha_bar: float | None = None,
               Lambda0: float | None = None, fit_tol: float = FIT_TOL) -> GrowthReport:
    """Least-squares slope of ``log max_{Sigma(r)} u`` against ``log r`` over the tail.

    The slope is compared with ``a + 4m + 1`` when ``Upsilon`` is given and with
    the induction bound when ``C0``, ``q`` and ``nu`` are given.
    """
    u = np.asarray(u, dtype=float)
    radii = man.radii[man.radii >= man.R0]
    idx = tail_indices(radii.size, tail_fraction)
    if idx.size < 5:
        raise InsufficientLayers("growth fit needs at least 5 tail layers")
    r = radii[idx]
    top = np.array([np.max(u[man.level_set(x)]) for x in r])
    if np.any(top <= 0) or not np.all(np.isfinite(top)):
        raise NonPositiveInput("growth fit needs positive values on the tail")
    b, c = np.polyfit(np.log(r), np.log(top), 1)
    m = man.m if m is None else m
    a = bound_a = None
    if Upsilon is not None:
        a = exponent_a(m, Upsilon)
        bound_a = a + 4 * m + 1
    eps = bound_G = None
    if C0 is not None and q is not None and nu is not None:
        e = epsilon_of(q, nu)
        eps = e.value
        bound_G = gamma_bound(C0, e, m, alpha_bar)
    return GrowthReport(
        fitted_exponent=float(b),
        intercept=float(c),
        tail_window=(float(r[0]), float(r[-1])),
        bound_a=bound_a,
        bound_Gamma=bound_G,
        a=a,
        epsilon=eps,
        nu=nu,
        q=q,
        fit_tol=fit_tol,
        Lambda0=Lambda0,
    )
