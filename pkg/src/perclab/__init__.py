"""Exact and Monte Carlo tools for percolation on nonunimodular quasi-transitive graphs."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    AddressError,
    ConfigError,
    ConstructionError,
    NumericError,
    ParameterError,
    PerclabError,
    PreconditionError,
    ResourceError,
    UnsupportedFamilyError,
)
from .graphs import OrbitWeights, VertexRef, Window, ball, build_family, slab_component

__all__ = [
    "AddressError",
    "ConfigError",
    "ConstructionError",
    "NumericError",
    "OrbitWeights",
    "ParameterError",
    "PerclabError",
    "PreconditionError",
    "ResourceError",
    "UnsupportedFamilyError",
    "VertexRef",
    "Window",
    "__version__",
    "ball",
    "build_family",
    "slab_component",
]
