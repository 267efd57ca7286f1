"""Discrete model manifolds: a complete-graph core with radial end tubes.

Each end is a stack of layers at radii ``r_core + j*h``.  Layer ``j`` of end
``i`` carries ``N_i`` vertices of measure ``A_i(r_j) h / N_i`` and consecutive
layers are joined vertex-to-vertex with weight ``A_i(r_{j+1/2}) / (h N_i)``,
which makes the weighted graph Laplacian the finite-volume discretisation of
``u'' + (A'/A) u'`` on a warped product.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ModelError

_SIGMA_KINDS = ("zero", "quadratic_decay", "bump", "constant")


@dataclass(frozen=True)
class SigmaLaw:
    """Potential as a function of the exhaustion value.

    ``zero``: 0.  ``quadratic_decay``: ``Upsilon / rho**2``.
    ``bump``: ``c`` on ``r_lo <= rho <= r_hi``, else 0.  ``constant``: ``c``.
    """

    kind: str = "zero"
    Upsilon: float = 0.0
    c: float = 0.0
    r_lo: float = 0.0
    r_hi: float = 0.0

    def __post_init__(self):
        if self.kind not in _SIGMA_KINDS:
            raise ModelError(f"unknown sigma law {self.kind!r}; expected one of {_SIGMA_KINDS}")
        if self.Upsilon < 0 or self.c < 0:
            raise ModelError("sigma must be nonnegative")
        if self.kind == "bump" and self.r_hi < self.r_lo:
            raise ModelError("bump requires r_lo <= r_hi")

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(rho)
        if self.kind == "quadratic_decay":
            return self.Upsilon / rho**2
        if self.kind == "constant":
            return np.full_like(rho, self.c)
        eps = 1e-12 * max(1.0, abs(self.r_hi))
        inside = (rho >= self.r_lo - eps) & (rho <= self.r_hi + eps)
        return np.where(inside, self.c, 0.0)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SigmaLaw":
        d = dict(d)
        kind = d.pop("law", d.pop("kind", "zero"))
        d.pop("per_end", None)
        return cls(kind=kind, **{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        out = {"law": self.kind}
        if self.kind == "quadratic_decay":
            out["Upsilon"] = self.Upsilon
        elif self.kind == "constant":
            out["c"] = self.c
        elif self.kind == "bump":
            out.update(c=self.c, r_lo=self.r_lo, r_hi=self.r_hi)
        return out


@dataclass(frozen=True)
class EndSpec:
    omega: float = 1.0
    p: float = 0.0
    N: int = 1

    def area(self, r):
        """Cross-sectional area ``omega * r**p``."""
        return self.omega * np.asarray(r, dtype=float) ** self.p


@dataclass(frozen=True)
class ModelSpec:
    n_dim: int
    ends: tuple[EndSpec, ...]
    core_size: int = 1
    r_core: float = 1.0
    R0: float = 2.0
    r_max: float = 64.0
    h: float = 1.0
    sigma: SigmaLaw = field(default_factory=SigmaLaw)
    sigma_per_end: tuple[tuple[int, SigmaLaw], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ends", tuple(self.ends))
        object.__setattr__(self, "sigma_per_end", tuple(sorted(dict(self.sigma_per_end).items())))
        self.validate()

    @property
    def n_layers(self) -> int:
        return int(round((self.r_max - self.r_core) / self.h)) + 1

    @property
    def m(self) -> float:
        """Declared constant in ``Delta rho <= m / rho``."""
        return float(max([self.n_dim - 1] + [e.p for e in self.ends]))

    def sigma_for_end(self, i: int) -> SigmaLaw:
        return dict(self.sigma_per_end).get(i, self.sigma)

    def validate(self) -> None:
        if self.n_dim < 2:
            raise ModelError("n_dim must be >= 2")
        if not self.ends:
            raise ModelError("at least one end is required")
        for e in self.ends:
            if e.omega <= 0 or e.p < 0 or e.N < 1:
                raise ModelError(f"invalid end {e}")
        if self.core_size < 1:
            raise ModelError("core_size must be >= 1")
        if self.h <= 0 or self.R0 <= 0 or self.r_core <= 0:
            raise ModelError("h, R0 and r_core must be positive")
        ratio = self.r_max / self.h
        if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 8:
            raise ModelError(f"r_max/h must be an integer >= 8 (got {ratio})")
        steps = (self.r_max - self.r_core) / self.h
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or steps < 1:
            raise ModelError("(r_max - r_core)/h must be a positive integer")
        if not (self.r_core < self.R0 and 4 * self.R0 < self.r_max):
            raise ModelError("require r_core < R0 and 4*R0 < r_max")
        for i, _ in self.sigma_per_end:
            if not 0 <= i < len(self.ends):
                raise ModelError(f"sigma override for nonexistent end {i}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        d = dict(d)
        try:
            ends = tuple(
                EndSpec(omega=float(e.get("omega", 1.0)), p=float(e.get("p", 0.0)), N=int(e.get("N", 1)))
                for e in d.pop("ends")
            )
            sig = dict(d.pop("sigma", {"law": "zero"}))
            per_end = tuple((int(k), SigmaLaw.from_dict(v)) for k, v in sig.pop("per_end", {}).items())
            kw = dict(
                n_dim=int(d.pop("n_dim")),
                ends=ends,
                core_size=int(d.pop("core_size", 1)),
                r_core=float(d.pop("r_core", 1.0)),
                R0=float(d.pop("R0", 2.0)),
                r_max=float(d.pop("r_max", 64.0)),
                h=float(d.pop("h", 1.0)),
                sigma=SigmaLaw.from_dict(sig),
                sigma_per_end=per_end,
            )
        except KeyError as exc:
            raise ModelError(f"model is missing required field {exc}") from None
        except TypeError as exc:
            raise ModelError(str(exc)) from None
        if d:
            raise ModelError(f"unknown model fields {sorted(d)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        sig = self.sigma.to_dict()
        if self.sigma_per_end:
            sig["per_end"] = {str(i): law.to_dict() for i, law in self.sigma_per_end}
        return {
            "n_dim": self.n_dim,
            "ends": [{"omega": e.omega, "p": e.p, "N": e.N} for e in self.ends],
            "core_size": self.core_size,
            "r_core": self.r_core,
            "R0": self.R0,
            "r_max": self.r_max,
            "h": self.h,
            "sigma": sig,
        }


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteManifold:
    """Weighted graph with vertex measures, exhaustion ``rho`` and potential ``sigma``.

    ``end_index`` is -1 on the core.  ``layers[i][j]`` lists the vertices of
    end ``i`` at radius ``layer_radii[i][j]``.
    """

    measure: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    end_index: np.ndarray
    layer_index: np.ndarray
    edges: np.ndarray
    weights: np.ndarray
    h: float
    R0: float
    m: float
    n_dim: int
    layers: tuple
    layer_radii: tuple
    spec: ModelSpec | None = None

    def __post_init__(self):
        for name in ("measure", "rho", "sigma", "weights"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        for name in ("end_index", "layer_index"):
            object.__setattr__(self, name, _frozen(getattr(self, name), int))
        object.__setattr__(self, "edges", _frozen(np.asarray(self.edges).reshape(-1, 2), int))
        object.__setattr__(self, "layers", tuple(tuple(_frozen(v, int) for v in end) for end in self.layers))
        object.__setattr__(self, "layer_radii", tuple(_frozen(r) for r in self.layer_radii))
        if np.any(self.measure <= 0) or np.any(self.weights <= 0):
            raise ModelError("measures and edge weights must be strictly positive")
        if np.any(self.sigma < 0):
            raise ModelError("sigma must be nonnegative")

    @property
    def n_vertices(self) -> int:
        return self.measure.size

    @property
    def n_ends(self) -> int:
        return len(self.layers)

    @cached_property
    def W(self) -> sp.csr_matrix:
        """Symmetric weight matrix."""
        n = self.n_vertices
        i, j = self.edges[:, 0], self.edges[:, 1]
        W = sp.coo_matrix(
            (np.concatenate([self.weights, self.weights]), (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(n, n),
        ).tocsr()
        W.sum_duplicates()
        return W

    @cached_property
    def degree(self) -> np.ndarray:
        return np.asarray(self.W.sum(axis=1)).ravel()

    @cached_property
    def radii(self) -> np.ndarray:
        """Distinct values of ``rho``, ascending."""
        return np.unique(self.rho)

    @cached_property
    def _sorted(self):
        order = np.argsort(self.rho, kind="stable")
        return self.rho[order], np.concatenate([[0.0], np.cumsum(self.measure[order])])

    def laplacian(self, u: np.ndarray) -> np.ndarray:
        """``(Lu)(x) = (1/mu(x)) * sum_y w_xy (u(y) - u(x))``."""
        u = np.asarray(u, dtype=float)
        return (self.W @ u - self.degree * u) / self.measure

    def volume(self, r: float) -> float:
        """Measure of the sublevel set ``{rho < r}``."""
        srho, cum = self._sorted
        return float(cum[np.searchsorted(srho, r, side="left")])

    def level_set(self, r: float) -> np.ndarray:
        return np.flatnonzero(np.abs(self.rho - r) <= 1e-9 * max(self.h, 1.0))

    def sublevel(self, r: float) -> np.ndarray:
        return np.flatnonzero(self.rho < r)

    def end_vertices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.end_index == i)

    def gradient_magnitude(self, u: np.ndarray) -> np.ndarray:
        """Largest incident edge difference divided by ``h``, per vertex."""
        u = np.asarray(u, dtype=float)
        i, j = self.edges[:, 0], self.edges[:, 1]
        d = np.abs(u[i] - u[j]) / self.h
        g = np.zeros(self.n_vertices)
        np.maximum.at(g, i, d)
        np.maximum.at(g, j, d)
        return g

    def scaled(self, lam: float) -> "DiscreteManifold":
        """Copy with every measure and edge weight multiplied by ``lam``; the operator is unchanged."""
        return DiscreteManifold(
            measure=self.measure * lam,
            rho=self.rho,
            sigma=self.sigma,
            end_index=self.end_index,
            layer_index=self.layer_index,
            edges=self.edges,
            weights=self.weights * lam,
            h=self.h,
            R0=self.R0,
            m=self.m,
            n_dim=self.n_dim,
            layers=self.layers,
            layer_radii=self.layer_radii,
            spec=self.spec,
        )

    def swap_ends(self, i: int, j: int) -> np.ndarray:
        """Vertex permutation exchanging ends ``i`` and ``j`` layer by layer."""
        perm = np.arange(self.n_vertices)
        if len(self.layers[i]) != len(self.layers[j]):
            raise ModelError("ends have different layer counts")
        for a, b in zip(self.layers[i], self.layers[j]):
            if a.size != b.size:
                raise ModelError("ends have different cross sections")
            perm[a] = b
            perm[b] = a
        return perm

    def components_without_core(self) -> int:
        keep = np.flatnonzero(self.end_index >= 0)
        sub = self.W[keep][:, keep]
        return int(connected_components(sub, directed=False)[0])

    def is_connected(self) -> bool:
        return connected_components(self.W, directed=False)[0] == 1


def build_manifold(spec: ModelSpec, *, allow_zero_sigma: bool = False) -> DiscreteManifold:
    """Assemble the layered graph described by ``spec``."""
    spec.validate()
    L = spec.n_layers
    h = spec.h
    radii = spec.r_core + h * np.arange(L)

    measure: list[float] = [1.0] * spec.core_size
    rho: list[float] = [spec.r_core] * spec.core_size
    end_index: list[int] = [-1] * spec.core_size
    layer_index: list[int] = [-1] * spec.core_size
    edges: list[tuple[int, int]] = []
    weights: list[float] = []

    for a in range(spec.core_size):
        for b in range(a + 1, spec.core_size):
            edges.append((a, b))
            weights.append(1.0)

    layers = []
    nxt = spec.core_size
    for i, end in enumerate(spec.ends):
        N = end.N
        area = end.area(radii)
        mid_area = end.area(radii[:-1] + 0.5 * h)
        end_layers = []
        for j in range(L):
            ids = np.arange(nxt, nxt + N)
            nxt += N
            end_layers.append(ids)
            mu = area[j] * h / N
            measure += [mu] * N
            rho += [radii[j]] * N
            end_index += [i] * N
            layer_index += [j] * N
            if N > 1:
                ring = [(ids[k], ids[(k + 1) % N]) for k in range(N if N > 2 else 1)]
                edges += ring
                weights += [mu / h**2] * len(ring)
            if j == 0:
                w0 = end.area(spec.r_core) / (h * N * spec.core_size)
                for c in range(spec.core_size):
                    for v in ids:
                        edges.append((c, int(v)))
                        weights.append(float(w0))
            else:
                w = mid_area[j - 1] / (h * N)
                for u_, v in zip(end_layers[j - 1], ids):
                    edges.append((int(u_), int(v)))
                    weights.append(float(w))
        layers.append(end_layers)

    rho_arr = np.array(rho)
    end_arr = np.array(end_index)
    sigma = spec.sigma(rho_arr)
    for i, law in spec.sigma_per_end:
        mask = end_arr == i
        sigma[mask] = law(rho_arr[mask])
    if not allow_zero_sigma and not np.any(sigma > 0):
        raise ModelError("sigma is identically zero; positive solutions need a nonzero potential")

    man = DiscreteManifold(
        measure=np.array(measure),
        rho=rho_arr,
        sigma=sigma,
        end_index=end_arr,
        layer_index=np.array(layer_index),
        edges=np.array(edges, dtype=int).reshape(-1, 2),
        weights=np.array(weights),
        h=h,
        R0=spec.R0,
        m=spec.m,
        n_dim=spec.n_dim,
        layers=layers,
        layer_radii=[radii] * len(spec.ends),
        spec=spec,
    )
    return man


@dataclass(frozen=True)
class ProfileSeries:
    """Sampled radial series with centred finite differences."""

    radii: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.shape != v.shape or r.ndim != 1:
            raise ValueError("radii and values must be 1-d arrays of equal length")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radii must be strictly increasing")
        object.__setattr__(self, "radii", _frozen(r))
        object.__setattr__(self, "values", _frozen(v))

    def __len__(self):
        return self.radii.size

    def derivative(self, order: int = 1) -> "ProfileSeries":
        """Centred 3-point derivative on interior radii (endpoints dropped)."""
        r, v = self.radii, self.values
        if r.size < 3:
            raise ValueError("need at least 3 samples")
        hl = r[1:-1] - r[:-2]
        hr = r[2:] - r[1:-1]
        if order == 1:
            d = (hl**2 * v[2:] - hr**2 * v[:-2] + (hr**2 - hl**2) * v[1:-1]) / (hl * hr * (hl + hr))
        elif order == 2:
            d = 2 * (hl * v[2:] - (hl + hr) * v[1:-1] + hr * v[:-2]) / (hl * hr * (hl + hr))
        else:
            raise ValueError("order must be 1 or 2")
        return ProfileSeries(r[1:-1], d, self.name + "'" * order)

    def at(self, r: float) -> float:
        return float(np.interp(r, self.radii, self.values))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["radius", "value"])
            for r, v in zip(self.radii, self.values):
                w.writerow([f"{r:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path: str | Path, name: str = "") -> "ProfileSeries":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        return cls(np.array([float(a) for a, _ in rows]), np.array([float(b) for _, b in rows]), name)


def volume_area_profiles(man: DiscreteManifold) -> tuple[ProfileSeries, ProfileSeries]:
    """``V(r) = mu{rho < r}`` and ``A(r) = mu(Sigma(r)) / h`` on the radius grid."""
    radii = man.radii
    V = np.array([man.volume(r) for r in radii])
    A = np.array([man.measure[man.level_set(r)].sum() / man.h for r in radii])
    return ProfileSeries(radii, V, "V"), ProfileSeries(radii, A, "A")


@dataclass(frozen=True)
class RhoReport:
    m_measured: float
    grad_lo: float
    grad_hi: float
    m_declared: float
    tolerance: float
    violation: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_rho_conditions(man: DiscreteManifold, tol: float | None = None) -> RhoReport:
    """Discrete check of ``1/2 <= |grad rho| <= 1`` and ``rho * Lap rho <= m`` on ``rho >= R0``."""
    i, j = man.edges[:, 0], man.edges[:, 1]
    slope = np.abs(man.rho[i] - man.rho[j]) / man.h
    grad_hi = float(slope.max())
    outer = man.rho >= man.R0
    # drop the truncation layer: it has no outward neighbour
    outer &= man.rho < man.radii[-1]
    g = man.gradient_magnitude(man.rho)
    grad_lo = float(g[outer].min()) if outer.any() else float("nan")
    lap = man.laplacian(man.rho)
    m_measured = float(np.max(man.rho[outer] * lap[outer])) if outer.any() else float("nan")
    if tol is None:
        # the midpoint stencil on area r^p overshoots p by C(p, 3)/4 (h/r)^2, largest at R0
        m = man.m
        tol = 0.05 * max(1.0, m) + max(0.0, m * (m - 1) * (m - 2)) / 24 * (man.h / man.R0) ** 2
    return RhoReport(
        m_measured=m_measured,
        grad_lo=grad_lo,
        grad_hi=grad_hi,
        m_declared=man.m,
        tolerance=tol,
        violation=bool(m_measured > man.m + tol or grad_hi > 1 + 1e-12 or grad_lo < 0.5),
    )


THETAS = (0.25, 0.5, 1.0)


def c_of_m(m: float) -> float:
    """Implemented constant for the area/volume comparison."""
    return 4.0 * m + 1.0


def gamma_of_m(m: float) -> float:
    return 4.0 * m + 1.0


@dataclass(frozen=True)
class AreaVolumeReport:
    m: float
    c: float
    gamma: float
    area_ratio_max: float
    doubling_exponent_max: float
    growth_exponent_max: float
    area_ok: bool
    doubling_ok: bool
    growth_ok: bool
    n_radii: int

    @property
    def ok(self) -> bool:
        return self.area_ok and self.doubling_ok and self.growth_ok

    def to_dict(self) -> dict:
        return {**self.__dict__, "ok": self.ok}


def check_area_volume(man: DiscreteManifold, m: float | None = None) -> AreaVolumeReport:
    """Check ``A r <= c V``, volume doubling and ``V(r) <= r**gamma V(R0)`` for sampled ``r >= R0``.

    The tightest observed constants are reported alongside the pass flags.
    """
    m = man.m if m is None else float(m)
    if m <= 0:
        raise ValueError("m must be positive")
    c, gam = c_of_m(m), gamma_of_m(m)
    V, A = volume_area_profiles(man)
    r_top = man.radii[-1]
    sel = V.radii >= man.R0
    rs = V.radii[sel]
    Vs = V.values[sel]
    As = A.values[sel]
    area_ratio = As * rs / Vs
    dbl = []
    for th in THETAS:
        for r, v in zip(rs, Vs):
            if (1 + th) * r <= r_top:
                dbl.append(math.log(man.volume((1 + th) * r) / v) / math.log(1 + th))
    V0 = man.volume(man.R0)
    grow = [math.log(v / V0) / math.log(r) for r, v in zip(rs, Vs) if r > 1.0]
    area_max = float(area_ratio.max())
    dbl_max = float(max(dbl)) if dbl else 0.0
    grow_max = float(max(grow)) if grow else 0.0
    return AreaVolumeReport(
        m=m,
        c=c,
        gamma=gam,
        area_ratio_max=area_max,
        doubling_exponent_max=dbl_max,
        growth_exponent_max=grow_max,
        area_ok=area_max <= c,
        doubling_ok=dbl_max <= c,
        growth_ok=all(v <= r**gam * V0 for r, v in zip(rs, Vs)),
        n_radii=int(rs.size),
    )


def small_path_manifold(
    n: int,
    sigma: Sequence[float],
    *,
    h: float = 1.0,
) -> DiscreteManifold:
    """Path on ``2n+1`` vertices with unit weights and measures, centre as core.

    Used for hand-checkable examples; the two halves are ends 0 and 1.
    """
    size = 2 * n + 1
    center = n
    rho = np.array([1.0 + abs(k - center) * h for k in range(size)])
    end_index = np.array([-1 if k == center else (0 if k > center else 1) for k in range(size)])
    layer_index = np.array([abs(k - center) - 1 for k in range(size)])
    layers = [[np.array([center + j + 1]) for j in range(n)], [np.array([center - j - 1]) for j in range(n)]]
    radii = 1.0 + h * np.arange(1, n + 1)
    edges = np.array([(k, k + 1) for k in range(size - 1)])
    return DiscreteManifold(
        measure=np.ones(size),
        rho=rho,
        sigma=np.asarray(sigma, dtype=float),
        end_index=end_index,
        layer_index=layer_index,
        edges=edges,
        weights=np.ones(size - 1),
        h=h,
        R0=1.0 + h * 0.5,
        m=1.0,
        n_dim=2,
        layers=layers,
        layer_radii=[radii, radii],
    )
