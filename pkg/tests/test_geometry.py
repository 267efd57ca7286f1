import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endslab.errors import ModelError
from endslab.geometry import (ModelSpec, ProfileSeries, SigmaLaw, build_manifold, check_area_volume,
                              small_path_manifold, verify_rho_conditions, volume_area_profiles)

from conftest import BUMP, CONE, MODEL_NAMES, cone_spec, shipped_manifold


def test_sigma_laws_evaluate_pointwise():
    r = np.array([1.0, 2.0, 4.0])
    assert np.allclose(SigmaLaw("quadratic_decay", Upsilon=2.0)(r), [2.0, 0.5, 0.125])
    assert np.allclose(SigmaLaw("bump", c=3.0, r_lo=1.5, r_hi=2.0)(r), [0.0, 3.0, 0.0])
    assert np.allclose(SigmaLaw("constant", c=0.5)(r), 0.5)
    assert not SigmaLaw()(r).any()


def test_sigma_law_rejects_negative_and_unknown():
    with pytest.raises(ModelError):
        SigmaLaw("constant", c=-1.0)
    with pytest.raises(ModelError):
        SigmaLaw("wiggle")


@pytest.mark.parametrize("bad", [
    {"r_max": 64.5},
    {"r_max": 7, "R0": 1.5},
    {"R0": 16},
    {"h": 0.0},
])
def test_model_validation(bad):
    d = cone_spec().to_dict()
    d.update(bad)
    with pytest.raises(ModelError):
        ModelSpec.from_dict(d)


def test_model_dict_round_trip_and_unknown_fields():
    spec = cone_spec(3, dict(BUMP, per_end={"1": {"law": "constant", "c": 0.5}}))
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ModelError, match="unknown"):
        ModelSpec.from_dict({**spec.to_dict(), "radius": 3})
    with pytest.raises(ModelError, match="missing"):
        ModelSpec.from_dict({"ends": [CONE]})


def test_zero_potential_is_rejected_unless_allowed():
    spec = cone_spec(2, {"law": "zero"})
    with pytest.raises(ModelError):
        build_manifold(spec)
    assert build_manifold(spec, allow_zero_sigma=True).n_ends == 2


def test_cone_measures_match_area_law():
    man = build_manifold(cone_spec(2, r_max=16))
    radii = 1.0 + np.arange(16)
    # core has unit measure, each end contributes r^2 h per layer
    assert man.volume(math.inf) == pytest.approx(1.0 + 2 * np.sum(radii**2))
    V, A = volume_area_profiles(man)
    assert A.at(5.0) == pytest.approx(2 * 25.0)
    assert np.all(np.diff(V.values) > 0)


def test_removing_core_separates_the_ends():
    for name in ("two_end_cone", "four_end_star"):
        man = shipped_manifold(name)
        assert man.is_connected()
        assert man.components_without_core() == man.n_ends


def test_ring_layers_stay_connected_within_an_end():
    man = build_manifold(ModelSpec.from_dict(
        {"n_dim": 3, "ends": [{"omega": 1.0, "p": 2, "N": 5}] * 3, "R0": 2.0, "r_max": 16, "sigma": BUMP}))
    assert man.components_without_core() == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_laplacian_is_self_adjoint(seed):
    man = shipped_manifold("three_end_mixed")
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, man.n_vertices))
    lhs = np.sum(man.measure * man.laplacian(u) * v)
    rhs = np.sum(man.measure * u * man.laplacian(v))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)


def test_laplacian_kills_constants_and_is_scale_free():
    man = shipped_manifold("two_end_cone")
    assert np.allclose(man.laplacian(np.ones(man.n_vertices)), 0.0)
    u = np.sin(man.rho)
    assert np.allclose(man.scaled(3.5).laplacian(u), man.laplacian(u))
    assert man.scaled(3.5).volume(10.0) == pytest.approx(3.5 * man.volume(10.0))


def test_swap_ends_is_an_involution_preserving_rho():
    man = shipped_manifold("four_end_star")
    perm = man.swap_ends(0, 3)
    assert np.array_equal(perm[perm], np.arange(man.n_vertices))
    assert np.array_equal(man.rho[perm], man.rho)
    assert set(man.end_index[perm[man.end_vertices(0)]]) == {3}


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_exhaustion_conditions_on_shipped_models(name):
    man = shipped_manifold(name)
    rep = verify_rho_conditions(man)
    assert not rep.violation
    assert rep.grad_hi == pytest.approx(1.0)
    assert rep.m_measured <= man.m + rep.tolerance


def test_cone_laplacian_of_rho_matches_dimension():
    # interior layers of a cone with area r^2: rho * Lap rho = 2 up to the midpoint rule
    man = shipped_manifold("two_end_cone")
    lap = man.laplacian(man.rho)
    sel = (man.rho > 4) & (man.rho < 60)
    assert np.allclose(man.rho[sel] * lap[sel], 2.0, atol=1e-9)


def test_rho_check_flags_fast_area_growth():
    spec = ModelSpec.from_dict({"n_dim": 2, "ends": [{"omega": 1.0, "p": 4, "N": 1}] * 2, "R0": 2.0,
                                "r_max": 32, "sigma": BUMP})
    man = build_manifold(spec)
    assert man.m == 4.0
    assert not verify_rho_conditions(man).violation
    # declaring m = 1 for quartic area growth must be caught
    assert verify_rho_conditions(dataclasses.replace(man, m=1.0)).violation


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_area_volume_bounds_on_shipped_models(name):
    rep = check_area_volume(shipped_manifold(name))
    assert rep.ok, rep
    assert rep.area_ratio_max <= rep.c


def test_profile_derivatives_exact_on_quadratics():
    r = np.array([1.0, 1.5, 2.5, 3.0, 4.5, 6.0])
    s = ProfileSeries(r, 3 * r**2 - r + 2, "q")
    assert np.allclose(s.derivative(1).values, 6 * r[1:-1] - 1)
    assert np.allclose(s.derivative(2).values, 6.0)
    assert s.derivative(2).name == "q''"


def test_profile_csv_round_trip(tmp_path):
    s = ProfileSeries(np.array([1.0, 2.0, 3.5]), np.array([0.1, 1 / 3, -2e-17]), "v")
    s.to_csv(tmp_path / "v.csv")
    back = ProfileSeries.from_csv(tmp_path / "v.csv")
    assert np.array_equal(back.values, s.values)
    assert (tmp_path / "v.csv").read_text().splitlines()[0] == "radius,value"


def test_profile_rejects_unsorted_radii():
    with pytest.raises(ValueError):
        ProfileSeries(np.array([1.0, 1.0]), np.array([0.0, 1.0]))


def test_small_path_layout():
    man = small_path_manifold(2, [0, 0, 1, 0, 0])
    assert list(man.rho) == [3, 2, 1, 2, 3]
    assert list(man.end_index) == [1, 1, -1, 0, 0]
    assert man.R0 == 1.5


def test_manifold_arrays_are_read_only():
    man = shipped_manifold("two_end_cone")
    with pytest.raises(ValueError):
        man.measure[0] = 2.0
