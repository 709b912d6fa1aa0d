"""Singular symplectic reduction of linear Hamiltonian actions: invariants, strata and reduced flows."""
from .errors import AmbiguityError, ConfigError, DimensionError, NotExpressibleError, PreconditionError, SymredError
from .groups import FiniteMatrixGroup, MatrixLieAlgebra, Torus, momentum_map
from .invariants import (
    express_in_generators,
    generator_relations,
    invariant_generators,
    molien_series,
    reduced_structure_matrix,
    reynolds,
)
from .model import Model, load_model
from .poly import Poly, poisson_bracket
from .symplin import SymplecticSpace, Subspace, adapted_complex_structure, constant_rank_split

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "ConfigError",
    "DimensionError",
    "FiniteMatrixGroup",
    "MatrixLieAlgebra",
    "Model",
    "NotExpressibleError",
    "Poly",
    "PreconditionError",
    "SymplecticSpace",
    "Subspace",
    "SymredError",
    "Torus",
    "adapted_complex_structure",
    "constant_rank_split",
    "express_in_generators",
    "generator_relations",
    "invariant_generators",
    "load_model",
    "molien_series",
    "momentum_map",
    "poisson_bracket",
    "reduced_structure_matrix",
    "reynolds",
]
