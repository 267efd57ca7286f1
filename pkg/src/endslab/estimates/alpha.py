"""Decay functionals of the potential: level-set, per-end and ball averages."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import EmptyLayer
from ..geometry import DiscreteManifold

TAIL_FRACTION = 0.3
DIVERGENCE_RATIO = 1.1


def tail_indices(n: int, tail_fraction: float = TAIL_FRACTION) -> np.ndarray:
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    k = max(2, int(math.ceil(tail_fraction * n)))
    return np.arange(max(0, n - k), n)


def limsup_proxy(radii: np.ndarray, values: np.ndarray, tail_fraction: float = TAIL_FRACTION) -> tuple[float, bool]:
    """Tail maximum of a sampled quantity, or ``inf`` when it keeps growing.

    Divergence means the tail increases strictly and grows by more than 10%
    between each of three geometrically spaced rungs.
    """
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = tail_indices(radii.size, tail_fraction)
    r, v = radii[idx], values[idx]
    rungs = np.geomspace(r[0], r[-1], 3)
    probe = np.array([v[int(np.argmin(np.abs(r - x)))] for x in rungs])
    divergent = bool(np.all(np.diff(v) > 0) and probe[0] > 0
                     and np.all(probe[1:] > DIVERGENCE_RATIO * probe[:-1]))
    return (math.inf if divergent else float(v.max())), divergent


def _outer_radii(man: DiscreteManifold) -> np.ndarray:
    return man.radii[man.radii >= man.R0]


def alpha_level_series(man: DiscreteManifold, q: float, end_index: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(R**(2q) * int_{S} sigma**q / A(R))**(1/q)`` for each outer radius.

    ``S`` is the whole level set, or only its part in one end; the
    normalisation always uses the full level-set area.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    radii = _outer_radii(man)
    out = np.empty(radii.size)
    for k, R in enumerate(radii):
        ids = man.level_set(R)
        if ids.size == 0:
            raise EmptyLayer(f"no vertices at radius {R}")
        mu = man.measure[ids]
        sq = man.sigma[ids] ** q
        if end_index is not None:
            sq = np.where(man.end_index[ids] == end_index, sq, 0.0)
        out[k] = (R ** (2 * q) * np.sum(mu * sq) / np.sum(mu)) ** (1.0 / q)
    return radii, out


def compute_alpha_level(man: DiscreteManifold, q: float, tail_fraction: float = TAIL_FRACTION) -> float:
    radii, vals = alpha_level_series(man, q)
    return limsup_proxy(radii, vals, tail_fraction)[0]


def compute_alpha_end(man: DiscreteManifold, end_index: int, q: float, tail_fraction: float = TAIL_FRACTION) -> float:
    radii, vals = alpha_level_series(man, q, end_index)
    return limsup_proxy(radii, vals, tail_fraction)[0]


@dataclass(frozen=True)
class RadialProfile:
    """Radial data sampled on a grid; cell ``k`` carries measure ``area[k] * dr``."""

    radii: np.ndarray
    area: np.ndarray
    sigma: np.ndarray
    R0: float = 1.0

    def cells(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.asarray(self.radii, dtype=float)
        dr = np.gradient(r) if r.size > 1 else np.ones(1)
        return r, np.asarray(self.area, dtype=float) * dr, np.asarray(self.sigma, dtype=float)


def ball_series(rho: np.ndarray, measure: np.ndarray, sigma: np.ndarray, radii: np.ndarray,
                n: int, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Ball averages of ``(rho**q sigma)**((n-1)/q)`` and ``V(R)/R**n`` at each ``R``."""
    order = np.argsort(rho, kind="stable")
    srho = rho[order]
    integrand = (srho**q * sigma[order]) ** ((n - 1) / q) * measure[order]
    cum_i = np.concatenate([[0.0], np.cumsum(integrand)])
    cum_v = np.concatenate([[0.0], np.cumsum(measure[order])])
    k = np.searchsorted(srho, radii, side="left")
    V = cum_v[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(V > 0, cum_i[k] / V, 0.0)
    return avg, V / radii**n


def compute_ball_functionals(obj: DiscreteManifold | RadialProfile, q: float = 2.0, n: int | None = None,
                             tail_fraction: float = TAIL_FRACTION) -> tuple[float, float]:
    """Ball-averaged decay functional and the asymptotic volume ratio, as tail proxies."""
    if isinstance(obj, DiscreteManifold):
        rho, mu, sig = obj.rho, obj.measure, obj.sigma
        radii = _outer_radii(obj)
        n = obj.n_dim if n is None else n
    else:
        rho, mu, sig = obj.cells()
        radii = rho[rho >= obj.R0]
        if n is None:
            raise ValueError("n is required for a radial profile")
    avg, vratio = ball_series(rho, mu, sig, radii, n, q)
    alpha, _ = limsup_proxy(radii, avg, tail_fraction)
    v_inf, _ = limsup_proxy(radii, vratio, tail_fraction)
    return alpha, v_inf


@dataclass(frozen=True)
class AlphaReport:
    q: float
    alpha_level: float
    alpha_end: tuple[float, ...]
    alpha_ball: float
    V_infinity: float
    tail_window: tuple[float, float]
    holder_ok: bool

    def to_dict(self) -> dict:
        def enc(x):
            return "inf" if math.isinf(x) else x

        return {
            "q": self.q,
            "alpha_level": enc(self.alpha_level),
            "alpha_end": [enc(a) for a in self.alpha_end],
            "alpha_ball": enc(self.alpha_ball),
            "V_infinity": enc(self.V_infinity),
            "tail_window": list(self.tail_window),
            "holder_ok": self.holder_ok,
        }


def alpha_report(man: DiscreteManifold, q: float, tail_fraction: float = TAIL_FRACTION,
                 holder_tol: float = 1e-9) -> AlphaReport:
    radii = _outer_radii(man)
    idx = tail_indices(radii.size, tail_fraction)
    a = compute_alpha_level(man, q, tail_fraction)
    a_next = compute_alpha_level(man, q + 1, tail_fraction)
    ball, vinf = compute_ball_functionals(man, q, tail_fraction=tail_fraction)
    return AlphaReport(
        q=q,
        alpha_level=a,
        alpha_end=tuple(compute_alpha_end(man, i, q, tail_fraction) for i in range(man.n_ends)),
        alpha_ball=ball,
        V_infinity=vinf,
        tail_window=(float(radii[idx[0]]), float(radii[idx[-1]])),
        holder_ok=bool(math.isinf(a_next) if math.isinf(a) else a_next >= a - holder_tol * max(1.0, a)),
    )
