"""Mean-value constants, trial-function Sobolev ratios and the dimension bound."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainTooSmall, EmptyTrialSet, NotSubsolution
from ..geometry import DiscreteManifold, gamma_of_m

THETAS = (1.0, 0.5, 0.25, 0.125)
THETA_FIT_TOL = 0.3


@dataclass(frozen=True)
class MeanValueReport:
    R: float
    nu: float
    A0: float
    A0_by_theta: dict
    theta_exponent: float
    localized_end: int | None
    subsolution_defect: float

    @property
    def passed(self) -> bool:
        return bool(self.theta_exponent <= 2 * self.nu + THETA_FIT_TOL)

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "nu": self.nu,
            "A0": self.A0,
            "A0_by_theta": {str(k): v for k, v in self.A0_by_theta.items()},
            "theta_exponent": self.theta_exponent,
            "localized_end": self.localized_end,
            "subsolution_defect": self.subsolution_defect,
            "pass": self.passed,
        }


def subsolution_defect(man: DiscreteManifold, u: np.ndarray, ids: np.ndarray) -> float:
    """Largest relative shortfall of ``Lu - sigma u >= 0`` over ``ids`` (0 when it holds)."""
    Lu = man.laplacian(u)
    scale = np.max(np.abs(u[ids])) * np.max(man.degree[ids] / man.measure[ids] + man.sigma[ids])
    gap = -(Lu[ids] - man.sigma[ids] * u[ids])
    return float(max(0.0, gap.max()) / scale) if scale > 0 else 0.0


def moser_verify(man: DiscreteManifold, u: np.ndarray, R: float, theta=THETAS, nu: float = 1.5,
                 localized_end: int | None = None, sub_tol: float = 1e-8) -> MeanValueReport:
    """Smallest mean-value constant for ``u`` at radius ``R`` for each ``theta``.

    Global form: ``max_{Sigma(R)} u <= A0 theta^{-2nu} V((1+theta)R)^{-1} int_{D((1+theta)R) minus D(R0)} u``.
    With ``localized_end`` the level set and integral are restricted to that
    end, the integral starts at ``R/4`` and the normalisation is ``V(2R)``.
    """
    u = np.asarray(u, dtype=float)
    thetas = tuple(float(t) for t in theta)
    if any(not 0 < t <= 1 for t in thetas):
        raise ValueError("theta values must lie in (0, 1]")
    if R < 4 * man.R0:
        raise DomainTooSmall(f"R={R} is below 4*R0")
    r_top = man.radii[-1]
    if 2 * R > r_top + 1e-9:
        raise DomainTooSmall(f"2R={2 * R} exceeds the model radius {r_top}")
    region = np.flatnonzero((man.rho >= man.R0) & (man.rho < 2 * R))
    region = region[man.rho[region] < r_top - 1e-9]
    defect = subsolution_defect(man, u, region)
    if defect > sub_tol:
        raise NotSubsolution(f"Lu >= sigma u fails by {defect:.3e} (relative)")

    level = man.level_set(R)
    if localized_end is not None:
        level = level[man.end_index[level] == localized_end]
        mask = man.end_index == localized_end
        lo = R / 4
    else:
        mask = np.ones(man.n_vertices, dtype=bool)
        lo = man.R0
    lhs = float(np.max(u[level]))
    by_theta, ratios = {}, []
    for t in thetas:
        sel = mask & (man.rho >= lo) & (man.rho < (1 + t) * R)
        vol = man.volume(2 * R) if localized_end is not None else man.volume((1 + t) * R)
        mean = float(np.sum(man.measure[sel] * u[sel]) / vol)
        ratios.append(lhs / mean)
        by_theta[t] = lhs * t ** (2 * nu) / mean
    if len(thetas) > 1:
        slope = np.polyfit(np.log(thetas), np.log(ratios), 1)[0]
        exponent = float(-slope)
    else:
        exponent = 0.0
    return MeanValueReport(
        R=float(R),
        nu=nu,
        A0=max(by_theta.values()),
        A0_by_theta=by_theta,
        theta_exponent=exponent,
        localized_end=localized_end,
        subsolution_defect=defect,
    )


def dirichlet_energy(man: DiscreteManifold, phi: np.ndarray) -> float:
    d = phi[man.edges[:, 0]] - phi[man.edges[:, 1]]
    return float(np.sum(man.weights * d * d))


def sobolev_ratio(man: DiscreteManifold, R: float, phi: np.ndarray, mu: float) -> float:
    """``(avg phi^{2mu})^{1/mu}`` divided by ``R^2 avg(|grad phi|^2 + sigma phi^2)`` on ``D(R)``."""
    V = man.volume(R)
    inside = man.rho < R
    lhs = (np.sum(man.measure[inside] * np.abs(phi[inside]) ** (2 * mu)) / V) ** (1 / mu)
    rhs = R**2 * (dirichlet_energy(man, phi) + np.sum(man.measure * man.sigma * phi**2)) / V
    return float(lhs / rhs) if rhs > 0 else math.inf


def default_trials(man: DiscreteManifold, R: float, seed: int = 0, n_random: int = 8,
                   smoothing: int = 5) -> list[np.ndarray]:
    """Radial ramps at three widths plus smoothed random nonnegative functions, all zero off ``D(R)``."""
    inside = man.rho < R
    trials = []
    for width in (0.25, 0.5, 1.0):
        trials.append(np.where(inside, np.clip((R - man.rho) / (width * R), 0.0, 1.0), 0.0))
    rng = np.random.default_rng(seed)
    W = man.W
    deg = np.where(man.degree > 0, man.degree, 1.0)
    for _ in range(n_random):
        phi = np.where(inside, rng.random(man.n_vertices), 0.0)
        for _ in range(smoothing):
            phi = np.where(inside, (W @ phi) / deg, 0.0)
        trials.append(phi)
    return trials


def sobolev_measure(man: DiscreteManifold, R: float, trial_functions=None, mu: float = 3.0,
                    seed: int = 0) -> float:
    """Lower bound for the best Sobolev constant on ``D(R)`` from a set of trial functions."""
    if mu <= 1:
        raise ValueError("mu must exceed 1")
    if trial_functions is None:
        trial_functions = default_trials(man, R, seed)
    outside = man.rho >= R
    ratios = []
    for phi in trial_functions:
        phi = np.asarray(phi, dtype=float)
        if np.any(phi[outside] != 0):
            raise ValueError("trial functions must vanish on and beyond Sigma(R)")
        if np.any(phi != 0):
            ratios.append(sobolev_ratio(man, R, phi, mu))
    if not ratios:
        raise EmptyTrialSet("no nonzero trial function supported in D(R)")
    return max(ratios)


def dimension_bound(m: float, d: float, A0: float, mu: float) -> tuple[float, float]:
    """``(2^{gamma(m)+2d+1}, A0 * 2^{gamma(m)+2d+1})``."""
    if m <= 0 or d < 0 or A0 <= 0 or mu <= 1:
        raise ValueError("need m > 0, d >= 0, A0 > 0, mu > 1")
    g = 2.0 ** (gamma_of_m(m) + 2 * d + 1)
    return g, A0 * g
