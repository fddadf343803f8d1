"""Bi-orthogonal polynomial systems on the unit circle.

Modules
-------
weight
    Weight specifications, Fourier tables and rational modifications.
bops
    The bi-orthogonal system, its associated functions and recurrences.
cgu
    Systems of rationally modified weights from the unmodified one.
semiclassical
    Spectral and deformation data of weights with finitely many singular points.
schlesinger
    Integer shifts of the singular-point exponents.
tau
    Toeplitz determinants as tau functions and their bilinear relations.
suites
    Residual checks used by the ``verify`` command.
"""

from .bops import BopsSystem, build_system
from .cgu import CguShift, transform_system
from .errors import (
    ArtifactError,
    ConsistencyError,
    DegeneracyError,
    ExistenceError,
    InputError,
    NumericalError,
)
from .semiclassical import SemiClassicalData
from .tau import TauLattice
from .weight import WeightFactor, WeightSpec, fourier_coefficients, modify_weight

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "BopsSystem",
    "CguShift",
    "ConsistencyError",
    "DegeneracyError",
    "ExistenceError",
    "InputError",
    "NumericalError",
    "SemiClassicalData",
    "TauLattice",
    "WeightFactor",
    "WeightSpec",
    "build_system",
    "fourier_coefficients",
    "modify_weight",
    "transform_system",
]
