"""Exhaustion Dirichlet problems for ``L u = sigma u`` and the end functions they produce."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DomainTooSmall, MaximumPrincipleViolation, NonPositiveInput, SingularSystem
from .geometry import DiscreteManifold

TOL_LIN = 1e-10
TOL_LIMIT = 1e-6
RANK_TOL = 1e-8


def pcg(A, b: np.ndarray, diag: np.ndarray, x0: np.ndarray | None = None, rtol: float = TOL_LIN,
        maxiter: int | None = None) -> tuple[np.ndarray, int, float]:
    """Conjugate gradients with a diagonal (Jacobi) preconditioner.

    Stops when ``||b - A x|| <= rtol * ||b||``.  Returns ``(x, iterations, relative residual)``.
    """
    n = b.size
    maxiter = 10 * n + 100 if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    if np.linalg.norm(r) <= rtol * bnorm:
        return x, 0, float(np.linalg.norm(r) / bnorm)
    minv = 1.0 / diag
    z = minv * r
    d = z.copy()
    rz = r @ z
    for k in range(1, maxiter + 1):
        Ad = A @ d
        dAd = d @ Ad
        if dAd <= 0:
            raise SingularSystem("matrix is not positive definite along the search direction")
        step = rz / dAd
        x += step * d
        r -= step * Ad
        if k % 50 == 0:
            # guard against drift of the recursive residual
            r = b - A @ x
        res = np.linalg.norm(r)
        if res <= rtol * bnorm:
            res = np.linalg.norm(b - A @ x)
            if res <= rtol * bnorm:
                return x, k, float(res / bnorm)
        z = minv * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise SingularSystem(f"CG stagnated after {maxiter} iterations (residual {res / bnorm:.3e})")


@dataclass(frozen=True, eq=False)
class SchrodingerSystem:
    """``(D - W + diag(mu sigma))`` restricted to the interior, with Dirichlet data moved to the rhs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    boundary_values: np.ndarray

    @property
    def size(self) -> int:
        return self.interior.size

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def assemble(man: DiscreteManifold, interior: np.ndarray, boundary: np.ndarray,
             boundary_values: np.ndarray) -> SchrodingerSystem:
    interior = np.asarray(interior, dtype=int)
    boundary = np.asarray(boundary, dtype=int)
    W = man.W
    domain = np.concatenate([interior, boundary])
    W_ID = W[interior][:, domain]
    deg = np.asarray(W_ID.sum(axis=1)).ravel()
    W_II = W[interior][:, interior]
    diag = deg + man.measure[interior] * man.sigma[interior]
    K = (sp.diags(diag) - W_II).tocsr()
    rhs = W[interior][:, boundary] @ np.asarray(boundary_values, dtype=float)
    return SchrodingerSystem(K, np.asarray(rhs).ravel(), interior, boundary, np.asarray(boundary_values, float))


def solve_system(system: SchrodingerSystem, method: str = "cg", tol_lin: float = TOL_LIN,
                 x0: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    if method == "dense":
        x = np.linalg.solve(system.dense(), system.rhs)
        res = np.linalg.norm(system.rhs - system.matrix @ x) / max(np.linalg.norm(system.rhs), 1e-300)
        return x, 0, float(res)
    if method != "cg":
        raise ValueError(f"unknown method {method!r}")
    return pcg(system.matrix, system.rhs, system.matrix.diagonal(), x0=x0, rtol=tol_lin)


@dataclass(frozen=True, eq=False)
class DirichletSolution:
    """Solution on the closed domain; ``values`` is NaN outside it."""

    values: np.ndarray
    R: float
    end_index: int
    interior: np.ndarray
    boundary: np.ndarray
    iterations: int
    residual: float


def dirichlet_domain(man: DiscreteManifold, end_index: int, R: float):
    """Interior ``{rho < R}``, boundary layers at radius ``R`` with their values (1 on the chosen end)."""
    if man.n_ends < 2:
        raise ValueError("the end construction needs at least two ends")
    if not 0 <= end_index < man.n_ends:
        raise IndexError(f"end {end_index} does not exist")
    if R <= man.R0:
        raise DomainTooSmall(f"R={R} must exceed R0={man.R0}")
    tol = 1e-9 * max(man.h, 1.0)
    boundary, values = [], []
    for i in range(man.n_ends):
        j = np.flatnonzero(np.abs(man.layer_radii[i] - R) <= tol)
        if j.size != 1:
            raise DomainTooSmall(f"end {i} has no layer at radius {R}")
        ids = man.layers[i][j[0]]
        boundary.append(ids)
        values.append(np.full(ids.size, 1.0 if i == end_index else 0.0))
    interior = np.flatnonzero(man.rho < R - tol)
    return interior, np.concatenate(boundary), np.concatenate(values)


def dirichlet_solve(man: DiscreteManifold, end_index: int, R: float, *, method: str = "cg",
                    tol_lin: float = TOL_LIN, x0: np.ndarray | None = None) -> DirichletSolution:
    """Solve ``Lv = sigma v`` on ``{rho < R}``, ``v = 1`` on the chosen end's layer at ``R``, 0 on the others."""
    interior, boundary, bvals = dirichlet_domain(man, end_index, R)
    system = assemble(man, interior, boundary, bvals)
    x, its, res = solve_system(system, method, tol_lin, x0=None if x0 is None else x0[interior])
    if method == "cg" and not (x.min() > 0.0 and x.max() < 1.0):
        # a relative residual can hide tiny far-field values; tighten once before giving up
        x, more, res = solve_system(system, method, tol_lin * 1e-4, x0=x)
        its += more
    if not (x.min() > 0.0 and x.max() < 1.0):
        raise MaximumPrincipleViolation(
            f"interior values span [{x.min():.3e}, {x.max():.3e}] for end {end_index}, R={R}"
        )
    v = np.full(man.n_vertices, np.nan)
    v[interior] = x
    v[boundary] = bvals
    return DirichletSolution(v, float(R), end_index, interior, boundary, its, res)


def normalize(v: DirichletSolution | np.ndarray, man: DiscreteManifold, r0: float) -> tuple[np.ndarray, float]:
    """Scale so that the maximum over ``D(r0)`` is exactly 1; returns ``(u, C_R)``."""
    vals = v.values if isinstance(v, DirichletSolution) else np.asarray(v, dtype=float)
    inner = man.rho < r0
    if not np.any(inner & np.isfinite(vals)):
        raise DomainTooSmall(f"D({r0}) is empty")
    # first index wins on ties; only the value matters
    k = int(np.flatnonzero(inner)[np.nanargmax(vals[inner])])
    C = 1.0 / vals[k]
    u = vals * C
    u[k] = 1.0
    return u, float(C)


@dataclass(frozen=True, eq=False)
class EndFunction:
    end_index: int
    values: np.ndarray
    history: tuple[tuple[float, float], ...]
    convergence_gap: float
    r0: float
    tol_limit: float
    ladder: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.convergence_gap <= self.tol_limit

    @property
    def radii(self) -> tuple[float, ...]:
        return tuple(R for R, _ in self.history)


def radius_ladder(man: DiscreteManifold, r0: float, rungs: int = 3) -> list[float]:
    """Layer radii nearest below ``r_max / 2**j``, ascending and ending at ``r_max``."""
    grid = man.layer_radii[0]
    r_top = float(grid[-1])
    out = []
    for j in range(rungs - 1, -1, -1):
        target = r_top / 2**j
        cand = grid[grid <= target + 1e-9 * max(man.h, 1.0)]
        if cand.size:
            out.append(float(cand[-1]))
    out = sorted(set(out))
    lo = max(r0, man.R0)
    if len(out) < rungs or out[0] <= lo:
        raise DomainTooSmall(f"r_max={r_top} too small for a {rungs}-rung ladder above {lo}")
    return out


def construct_end_function(man: DiscreteManifold, end_index: int, r0: float | None = None,
                           tol_limit: float = TOL_LIMIT, *, ladder: list[float] | None = None,
                           method: str = "cg", tol_lin: float = TOL_LIN) -> EndFunction:
    """Normalised Dirichlet solutions over an increasing radius ladder; the last rung is the end function."""
    r0 = man.R0 if r0 is None else float(r0)
    ladder = radius_ladder(man, r0) if ladder is None else sorted(ladder)
    history, us = [], []
    for R in ladder:
        sol = dirichlet_solve(man, end_index, R, method=method, tol_lin=tol_lin)
        u, C = normalize(sol, man, r0)
        history.append((R, C))
        us.append(u)
    inner = man.rho < r0
    gap = float(np.max(np.abs(us[-1][inner] - us[-2][inner])))
    return EndFunction(end_index, us[-1], tuple(history), gap, r0, tol_limit, tuple(us))


def construct_all(man: DiscreteManifold, r0: float | None = None, tol_limit: float = TOL_LIMIT,
                  jobs: int = 1, **kw) -> list[EndFunction]:
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(construct_end_function, man, i, r0, tol_limit, **kw) for i in range(man.n_ends)]
            return [f.result() for f in futs]
    return [construct_end_function(man, i, r0, tol_limit, **kw) for i in range(man.n_ends)]


def _layer_max(u: np.ndarray, layers) -> np.ndarray:
    return np.array([np.max(u[ids]) for ids in layers])


@dataclass(frozen=True)
class EndSeparation:
    end_index: int
    off_end_min: float
    off_end_max: float
    off_end_ok: bool
    increasing_margin: float
    increasing_ok: bool
    other_nonincreasing_margin: float
    other_ok: bool
    sup: float
    sup_on_own_end: bool
    sup_ok: bool
    converged: bool
    convergence_gap: float

    @property
    def ok(self) -> bool:
        return self.off_end_ok and self.increasing_ok and self.other_ok and self.sup_ok

    def to_dict(self) -> dict:
        return {**self.__dict__, "ok": self.ok}


@dataclass(frozen=True)
class SeparationReport:
    ends: tuple[EndSeparation, ...]
    tol: float

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.ends)

    def to_dict(self) -> dict:
        return {"tol": self.tol, "ok": self.ok, "ends": [e.to_dict() for e in self.ends]}


def verify_separation(end_fns: list[EndFunction], man: DiscreteManifold, tol: float = 1e-6) -> SeparationReport:
    """Check ``0 < u_i <= 1`` off ``E_i``, monotone layer maxima and ``sup u_i > 1``."""
    out = []
    for ef in end_fns:
        i, u = ef.end_index, ef.values
        # the truncation layer carries Dirichlet data (0 off E_i), not solution values
        off = (man.end_index != i) & (man.rho < ef.radii[-1] - 1e-9 * max(man.h, 1.0))
        own = _layer_max(u, man.layers[i])
        inc = float(np.min(np.diff(own)))
        # level maxima over the other ends, radius by radius
        others = [j for j in range(man.n_ends) if j != i]
        n_lay = min(len(man.layers[j]) for j in others)
        other = np.array([max(np.max(u[man.layers[j][k]]) for j in others) for k in range(n_lay)])
        dec = float(np.min(other[:-1] - other[1:])) if n_lay > 1 else 0.0
        k = int(np.argmax(u))
        out.append(
            EndSeparation(
                end_index=i,
                off_end_min=float(u[off].min()),
                off_end_max=float(u[off].max()),
                off_end_ok=bool(u[off].min() > 0 and u[off].max() <= 1 + tol),
                increasing_margin=inc,
                increasing_ok=inc > 0,
                other_nonincreasing_margin=dec,
                other_ok=dec >= -tol,
                sup=float(u[k]),
                sup_on_own_end=bool(man.end_index[k] == i),
                sup_ok=bool(u[k] > 1 and man.end_index[k] == i),
                converged=ef.converged,
                convergence_gap=ef.convergence_gap,
            )
        )
    return SeparationReport(tuple(out), tol)


def comparison_margin(end_fns: list[EndFunction], man: DiscreteManifold) -> float:
    """Largest value of ``u_i - C_j (S_j - u_j)`` on ``E_j`` over ``i != j``; nonpositive when the comparison holds."""
    worst = -math.inf
    for ej in end_fns:
        j, uj = ej.end_index, ej.values
        S = float(np.max(uj))
        gap = S - uj[man.rho < ej.r0]
        C = 1.0 / float(np.min(gap))
        on_end = man.end_index == j
        for ei in end_fns:
            if ei.end_index == j:
                continue
            worst = max(worst, float(np.max(ei.values[on_end] - C * (S - uj[on_end]))))
    return worst


def gram_matrix(end_fns: list[EndFunction], man: DiscreteManifold, domain_radius: float) -> np.ndarray:
    sel = man.rho < domain_radius
    U = np.array([ef.values[sel] for ef in end_fns])
    return (U * man.measure[sel]) @ U.T


def gram_rank(end_fns: list[EndFunction], man: DiscreteManifold, domain_radius: float | None = None,
              rank_tol: float = RANK_TOL) -> int:
    """Numerical rank of the measure-weighted Gram matrix of the end functions."""
    if domain_radius is None:
        domain_radius = math.inf
    s = np.linalg.svd(gram_matrix(end_fns, man, domain_radius), compute_uv=False)
    return int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0


def harnack_check(man: DiscreteManifold, u: np.ndarray, r: float) -> float:
    """``max |ln u(x) - ln u(y)| / h`` over edges inside ``D(r)``."""
    u = np.asarray(u, dtype=float)
    near = (man.rho < 2 * r) & np.isfinite(u)
    if np.any(u[near] <= 0):
        raise NonPositiveInput("u must be positive on D(2r)")
    i, j = man.edges[:, 0], man.edges[:, 1]
    inside = (man.rho[i] < r) & (man.rho[j] < r)
    if not inside.any():
        return 0.0
    lu = np.log(u[i[inside]]) - np.log(u[j[inside]])
    return float(np.max(np.abs(lu)) / man.h)


def harnack_ladder(man: DiscreteManifold, ef: EndFunction, r: float | None = None) -> list[float]:
    """Harnack quantity of each rung ``u_R`` on a fixed ball, ``r`` defaulting to half the first rung."""
    if r is None:
        r = ef.radii[0] / 2
    return [harnack_check(man, u, r) for u in ef.ladder]


def dump_end_function(ef: EndFunction, man: DiscreteManifold, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "rho", "end_label", "value"])
        for k in range(man.n_vertices):
            lab = "core" if man.end_index[k] < 0 else f"E{man.end_index[k]}:{man.layer_index[k]}"
            w.writerow([k, f"{man.rho[k]:.17g}", lab, f"{ef.values[k]:.17g}"])
