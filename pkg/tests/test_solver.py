import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endslab import solver
from endslab.errors import DomainTooSmall, MaximumPrincipleViolation, NonPositiveInput, SingularSystem
from endslab.geometry import small_path_manifold
from endslab.solver import (assemble, comparison_margin, construct_all, dirichlet_domain,
                            dirichlet_solve, dump_end_function, gram_matrix, gram_rank, harnack_check,
                            harnack_ladder, normalize, pcg, radius_ladder, verify_separation)

from conftest import shipped_end_functions, shipped_manifold


def test_path_without_potential_interpolates_linearly():
    man = small_path_manifold(2, [0, 0, 0, 0, 0])
    sol = dirichlet_solve(man, 0, 3.0)
    assert np.allclose(sol.values, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
    assert np.allclose(dirichlet_solve(man, 1, 3.0).values, [1.0, 0.75, 0.5, 0.25, 0.0], atol=1e-12)


def test_path_with_unit_potential_at_the_junction():
    # 2 v1 = v2, (2 + 1) v2 = v1 + v3, 2 v3 = v2 + 1  =>  v = (1/8, 1/4, 5/8)
    man = small_path_manifold(2, [0, 0, 1, 0, 0])
    for method in ("cg", "dense"):
        sol = dirichlet_solve(man, 0, 3.0, method=method)
        assert np.allclose(sol.values[1:4], [0.125, 0.25, 0.625], atol=1e-12)


def test_three_unknown_system_matches_hand_matrix():
    man = small_path_manifold(2, [0, 0, 1, 0, 0])
    interior, boundary, bvals = dirichlet_domain(man, 0, 3.0)
    sys_ = assemble(man, interior, boundary, bvals)
    assert np.array_equal(sys_.dense(), [[2, -1, 0], [-1, 3, -1], [0, -1, 2]])
    assert np.array_equal(sys_.rhs, [0, 0, 1])


def test_domain_errors():
    man = shipped_manifold("two_end_cone")
    with pytest.raises(DomainTooSmall):
        dirichlet_solve(man, 0, man.R0)
    with pytest.raises(DomainTooSmall):
        dirichlet_solve(man, 0, 10.5)
    with pytest.raises(IndexError):
        dirichlet_solve(man, 5, 16.0)


def test_pcg_matches_dense_on_random_spd():
    rng = np.random.default_rng(3)
    B = rng.normal(size=(40, 40))
    A = B @ B.T + 40 * np.eye(40)
    b = rng.normal(size=40)
    x, its, res = pcg(A, b, np.diag(A).copy())
    assert res <= 1e-10
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-9, atol=1e-12)


def test_pcg_reports_singular_systems():
    A = np.array([[1.0, -1.0], [-1.0, 1.0]])
    with pytest.raises(SingularSystem):
        pcg(A, np.array([1.0, 1.0]), np.ones(2))


def test_pcg_zero_rhs():
    x, its, res = pcg(np.eye(3), np.zeros(3), np.ones(3))
    assert its == 0 and not x.any()


@pytest.mark.parametrize("name", ["two_end_path", "two_end_cone", "four_end_star"])
def test_iterative_and_dense_solves_agree(name):
    man = shipped_manifold(name)
    for R in radius_ladder(man, man.R0):
        a = dirichlet_solve(man, 0, R).values
        b = dirichlet_solve(man, 0, R, method="dense").values
        assert np.nanmax(np.abs(a - b)) <= 1e-8 * np.nanmax(np.abs(b))


def test_resolving_from_the_solution_is_idempotent():
    man = shipped_manifold("three_end_mixed")
    first = dirichlet_solve(man, 2, 32.0)
    again = dirichlet_solve(man, 2, 32.0, x0=first.values)
    assert again.iterations <= 1
    assert np.nanmax(np.abs(again.values - first.values)) <= 1e-10


def test_maximum_principle_violation_is_raised(monkeypatch):
    man = small_path_manifold(2, [0, 0, 1, 0, 0])
    monkeypatch.setattr(solver, "solve_system", lambda system, *a, **k: (np.array([0.5, -0.1, 0.5]), 1, 0.0))
    with pytest.raises(MaximumPrincipleViolation):
        dirichlet_solve(man, 0, 3.0)


def test_normalisation_puts_the_inner_maximum_at_one():
    man = shipped_manifold("two_end_cone")
    sol = dirichlet_solve(man, 1, 32.0)
    u, C = normalize(sol, man, 4.0)
    assert np.nanmax(u[man.rho < 4.0]) == 1.0
    assert C == pytest.approx(1.0 / np.nanmax(sol.values[man.rho < 4.0]))


def test_radius_ladder_rungs():
    man = shipped_manifold("two_end_cone")
    assert radius_ladder(man, man.R0) == [16.0, 32.0, 64.0]
    with pytest.raises(DomainTooSmall):
        radius_ladder(man, 20.0)


def test_mirror_symmetric_model_gives_mirrored_end_functions():
    man = shipped_manifold("two_end_cone")
    u0, u1 = (ef.values for ef in shipped_end_functions("two_end_cone"))
    perm = man.swap_ends(0, 1)
    assert np.max(np.abs(u0 - u1[perm])) <= 1e-10


@pytest.mark.parametrize("name", ["two_end_path", "two_end_cone", "three_end_cone", "three_end_mixed",
                                  "four_end_star", "cone_quadratic"])
def test_end_functions_separate_and_are_independent(name):
    man = shipped_manifold(name)
    efs = shipped_end_functions(name)
    rep = verify_separation(list(efs), man)
    assert rep.ok, rep.to_dict()
    assert gram_rank(list(efs), man) == man.n_ends
    assert comparison_margin(list(efs), man) <= 1e-12
    assert all(ef.converged for ef in efs)


def test_tiny_model_does_not_converge():
    efs = shipped_end_functions("tiny_rmax")
    assert not any(ef.converged for ef in efs)
    assert all(ef.convergence_gap > ef.tol_limit for ef in efs)


def test_parallel_construction_is_bitwise_identical():
    man = shipped_manifold("four_end_star")
    a = construct_all(man, tol_limit=1.0, jobs=1)
    b = construct_all(man, tol_limit=1.0, jobs=4)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)
        assert x.history == y.history


def test_gram_rank_drops_for_duplicated_functions():
    man = shipped_manifold("two_end_cone")
    ef = shipped_end_functions("two_end_cone")[0]
    assert gram_rank([ef, ef], man) == 1
    G = gram_matrix([ef], man, 10.0)
    assert G[0, 0] == pytest.approx(np.sum(man.measure[man.rho < 10] * ef.values[man.rho < 10] ** 2))


def test_gram_rank_is_scale_invariant():
    man = shipped_manifold("three_end_cone")
    big = man.scaled(1e3)
    efs = construct_all(big, tol_limit=1.0)
    assert gram_rank(efs, big) == 3


def test_harnack_quantity_on_hand_values():
    man = small_path_manifold(2, [0, 0, 0, 0, 0])
    u = np.array([0.1, 0.25, 0.5, 0.75, 1.0])
    assert harnack_check(man, u, 2.5) == pytest.approx(math.log(2.0))
    assert harnack_check(man, np.ones(5), 2.5) == 0.0
    with pytest.raises(NonPositiveInput):
        harnack_check(man, np.array([0.0, 0.25, 0.5, 0.75, 1.0]), 2.5)


def test_harnack_quantity_stabilises_along_the_ladder():
    man = shipped_manifold("two_end_cone")
    ef = shipped_end_functions("two_end_cone")[0]
    vals = harnack_ladder(man, ef)
    assert len(vals) == 3
    assert abs(vals[-1] - vals[-2]) <= 0.05 * vals[-1]


def test_end_function_dump(tmp_path):
    man = shipped_manifold("two_end_path")
    ef = shipped_end_functions("two_end_path")[0]
    dump_end_function(ef, man, tmp_path / "u.csv")
    rows = list(csv.reader(open(tmp_path / "u.csv")))
    assert rows[0] == ["vertex_id", "rho", "end_label", "value"]
    assert rows[1][2] == "core"
    assert rows[2][2] == "E0:0"
    assert len(rows) == man.n_vertices + 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_self_adjoint_stiffness(seed):
    man = shipped_manifold("three_end_mixed")
    interior, boundary, bvals = dirichlet_domain(man, 0, 16.0)
    K = assemble(man, interior, boundary, bvals).matrix
    assert abs(K - K.T).max() == 0.0
    rng = np.random.default_rng(seed)
    x = rng.normal(size=interior.size)
    assert x @ (K @ x) > 0
