"""Spectral homogenization engine for non-self-adjoint elliptic operators on a cylinder.

The domain is R^{d1} x T^{d2}: coefficients are periodic in the first d1 variables and
live on a torus in the remaining d2.  The package solves the periodic cell problems,
assembles the effective coefficients, builds the Bloch fiber operators and measures
the homogenization errors across an eps sweep.
"""

from .coefficients import CoefficientSet, CoercivityError, coercivity_constants
from .config import ConfigError, RunConfig, load_config, parse_config
from .effective import EffectiveCoefficients, homogenize
from .fiber import FiberBasis, FiberEngine, FiberSet, Quasimomentum, build_engine
from .geometry import DomainGeometry
from .trigfield import TrigField

__all__ = [
    "CoefficientSet", "CoercivityError", "ConfigError", "DomainGeometry",
    "EffectiveCoefficients", "FiberBasis", "FiberEngine", "FiberSet", "Quasimomentum",
    "RunConfig", "TrigField", "build_engine", "coercivity_constants", "homogenize",
    "load_config", "parse_config",
]
