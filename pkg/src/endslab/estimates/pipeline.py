"""End-count pipeline: end functions, independence, growth, mean value and the dimension bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from ..errors import DomainTooSmall, InsufficientLayers, ModelError
from ..geometry import DiscreteManifold
from ..solver import (RANK_TOL, TOL_LIMIT, TOL_LIN, EndFunction, SeparationReport, comparison_margin,
                      construct_all, gram_matrix, verify_separation)
from .alpha import TAIL_FRACTION, AlphaReport, alpha_report
from .growth import FIT_TOL, ChiReport, GrowthReport, chi_diagnostics, growth_fit
from .meanvalue import MeanValueReport, dimension_bound, moser_verify

STABILITY_TOL = 0.2


@dataclass(frozen=True)
class PipelineConfig:
    r0: float | None = None
    tol_lin: float = TOL_LIN
    tol_limit: float = TOL_LIMIT
    rank_tol: float = RANK_TOL
    fit_tol: float = FIT_TOL
    separation_tol: float = 1e-6
    tail_fraction: float = TAIL_FRACTION
    q: float = 2.0
    nu: float = 1.5
    theta: float = 1.0
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown pipeline settings: {sorted(extra)}")
        return cls(**d)


def potential_decay_constant(man: DiscreteManifold) -> float:
    """``sup rho^2 sigma`` outside ``D(R0)``, below the outermost layer."""
    sel = (man.rho >= man.R0) & (man.rho < man.radii[-1])
    return float(np.max(man.rho[sel] ** 2 * man.sigma[sel])) if sel.any() else 0.0


def moser_radii(man: DiscreteManifold) -> list[float]:
    """The two largest ladder radii ``r_max/4`` and ``r_max/2`` snapped to layers."""
    grid = man.layer_radii[0]
    top = float(grid[-1])
    out = []
    for frac in (0.25, 0.5):
        cand = grid[grid <= frac * top + 1e-9]
        if cand.size and cand[-1] >= 4 * man.R0:
            out.append(float(cand[-1]))
    return out


def relative_spread(values) -> float:
    v = np.asarray(list(values), dtype=float)
    if v.size and np.all(v == v[0]):
        return 0.0
    return float((v.max() - v.min()) / v.min()) if v.size and v.min() > 0 else math.inf


@dataclass(frozen=True, eq=False)
class EndCountReport:
    k: int
    rank: int
    singular_values: tuple[float, ...]
    separation: SeparationReport
    comparison_margin: float
    alpha: AlphaReport
    growth: tuple[GrowthReport, ...]
    chi: tuple[ChiReport | None, ...]
    moser: tuple[tuple[MeanValueReport, ...], ...]
    Upsilon: float
    degree: int
    Gamma_bar: float
    dim_bound: float
    config: PipelineConfig
    end_functions: tuple[EndFunction, ...] = field(repr=False, default=())

    @property
    def moser_spread(self) -> tuple[float, ...]:
        return tuple(relative_spread(r.A0 for r in reps) for reps in self.moser)

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "rank_equals_ends": self.rank == self.k,
            "separation": self.separation.ok,
            "comparison": self.comparison_margin <= 1e-9,
            "converged": all(ef.converged for ef in self.end_functions),
            "growth_within_bound": all(g.passed is not False for g in self.growth),
            "mean_value_theta_exponent": all(r.passed for reps in self.moser for r in reps),
            "mean_value_stable": all(s <= STABILITY_TOL for s in self.moser_spread),
            "ends_within_dimension_bound": self.k <= self.dim_bound,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def advisories(self) -> list[str]:
        out = []
        for ef in self.end_functions:
            if not ef.converged:
                out.append(
                    f"NotConverged: end {ef.end_index}: ladder gap {ef.convergence_gap:.3e} exceeds tol_limit "
                    f"{ef.tol_limit:.1e}; enlarge r_max or relax tol_limit"
                )
        return out

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rank": self.rank,
            "singular_values": list(self.singular_values),
            "checks": self.checks,
            "pass": self.passed,
            "separation": self.separation.to_dict(),
            "comparison_margin": self.comparison_margin,
            "end_functions": [
                {
                    "end_index": ef.end_index,
                    "ladder": [{"R": R, "C_R": C} for R, C in ef.history],
                    "convergence_gap": ef.convergence_gap,
                    "converged": ef.converged,
                }
                for ef in self.end_functions
            ],
            "alpha": self.alpha.to_dict(),
            "Upsilon": self.Upsilon,
            "growth": [g.to_dict() for g in self.growth],
            "chi": [c.to_dict() if c is not None else None for c in self.chi],
            "mean_value": [[r.to_dict() for r in reps] for reps in self.moser],
            "mean_value_spread": list(self.moser_spread),
            "dimension": {"d": self.degree, "Gamma_bar": self.Gamma_bar, "bound": self.dim_bound},
            "advisories": self.advisories(),
        }


def end_count_pipeline(man: DiscreteManifold, config: PipelineConfig | None = None) -> EndCountReport:
    """Construct one end function per end and run every check that applies to it."""
    cfg = PipelineConfig() if config is None else config
    k = man.n_ends
    if k < 2:
        raise ModelError("the end-count pipeline needs at least two ends")
    efs = construct_all(man, cfg.r0, cfg.tol_limit, jobs=cfg.jobs, tol_lin=cfg.tol_lin)
    G = gram_matrix(efs, man, math.inf)
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > cfg.rank_tol * s[0])) if s[0] > 0 else 0
    sep = verify_separation(efs, man, cfg.separation_tol)
    margin = comparison_margin(efs, man)
    ups = potential_decay_constant(man)
    alpha = alpha_report(man, cfg.q, cfg.tail_fraction)
    abar = min(alpha.alpha_level, 1.0)

    r_diag = 4 * man.R0
    growth, chis, mosers = [], [], []
    for ef in efs:
        try:
            chi = chi_diagnostics(man, ef.values, r_diag, man.m, cfg.q, cfg.theta, cfg.nu, alpha.alpha_level)
        except (InsufficientLayers, DomainTooSmall):
            chi = None
        chis.append(chi)
        growth.append(
            growth_fit(man, ef.values, cfg.tail_fraction, m=man.m, Upsilon=ups,
                       C0=None if chi is None else chi.C0, q=cfg.q, nu=cfg.nu, alpha_bar=abar,
                       Lambda0=None if chi is None else chi.Lambda0, fit_tol=cfg.fit_tol)
        )
        mosers.append(tuple(moser_verify(man, ef.values, R, nu=cfg.nu) for R in moser_radii(man)))

    # polynomial degree of the solution space, read off the fits within their tolerance
    degree = max(0, math.ceil(max(g.fitted_exponent for g in growth) - cfg.fit_tol))
    A0 = max((r.A0 for reps in mosers for r in reps), default=1.0)
    mu = cfg.nu / (cfg.nu - 1) if cfg.nu > 1 else math.inf
    gbar, bound = dimension_bound(man.m, degree, A0, mu)
    return EndCountReport(
        k=k,
        rank=rank,
        singular_values=tuple(float(x) for x in s),
        separation=sep,
        comparison_margin=margin,
        alpha=alpha,
        growth=tuple(growth),
        chi=tuple(chis),
        moser=tuple(mosers),
        Upsilon=ups,
        degree=degree,
        Gamma_bar=gbar,
        dim_bound=bound,
        config=cfg,
        end_functions=tuple(efs),
    )
