"""Numerical laboratory for ends of manifolds carrying a Schrödinger operator ``Delta - sigma``."""

from .geometry import DiscreteManifold, EndSpec, ModelSpec, SigmaLaw, build_manifold
from .solver import construct_all, construct_end_function, dirichlet_solve, gram_rank, verify_separation

__version__ = "0.1.0"

__all__ = [
    "DiscreteManifold", "EndSpec", "ModelSpec", "SigmaLaw", "build_manifold",
    "construct_all", "construct_end_function", "dirichlet_solve", "gram_rank", "verify_separation",
]
