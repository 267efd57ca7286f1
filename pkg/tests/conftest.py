from functools import lru_cache

import pytest

from endslab.config import load_config
from endslab.geometry import ModelSpec, build_manifold
from endslab.solver import construct_all

CONE = {"omega": 1.0, "p": 2, "N": 1}
BUMP = {"law": "bump", "c": 1.0, "r_lo": 0.0, "r_hi": 1.5}
QUADRATIC = {"law": "quadratic_decay", "Upsilon": 2.0}
MODEL_NAMES = ("two_end_path", "two_end_cone", "three_end_cone", "three_end_mixed", "four_end_star",
               "cone_quadratic", "tiny_rmax")


def cone_spec(k=2, sigma=BUMP, r_max=64, h=1.0, n_dim=3, **kw):
    return ModelSpec.from_dict({"n_dim": n_dim, "ends": [CONE] * k, "R0": 2.0, "r_max": r_max, "h": h,
                                "sigma": sigma, **kw})


@lru_cache(maxsize=None)
def shipped_manifold(name):
    return build_manifold(load_config(name).model)


@lru_cache(maxsize=None)
def shipped_end_functions(name):
    return tuple(construct_all(shipped_manifold(name), tol_limit=load_config(name).tolerances["tol_limit"]))


@lru_cache(maxsize=None)
def quadratic_cone(r_max=64, h=1.0):
    return build_manifold(cone_spec(2, QUADRATIC, r_max=r_max, h=h))


@lru_cache(maxsize=None)
def quadratic_end_functions(r_max=64):
    return tuple(construct_all(quadratic_cone(r_max), tol_limit=1.0))


@pytest.fixture
def bump_cone():
    return shipped_manifold("two_end_cone")
