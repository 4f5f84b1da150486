"""Caustics of 3D contact sub-Riemannian structures in normal form.

Integrates the normal geodesic flow, builds horizontal slices of the
conjugate locus with their cusp and self-intersection symbols, and predicts
the singularity regime from the algebraic invariants of the normal form.
"""

from .model import ConfigError, NormalFormCoefficients, heisenberg
from .flow import FlowSettings, exp_map, integrate, conjugate_points
from .caustic import (CausticSlice, Symbol, canonical_symbol, conjugate_time,
                      extract_symbol, slice, symbol_name)
from .classifier import ClassifierReport, Regime, classify
from .fitseries import SuspensionFit, fit_suspension, wedge_residual
from .scenario import ScenarioConfig

__all__ = [
    "CausticSlice", "ClassifierReport", "ConfigError", "FlowSettings",
    "NormalFormCoefficients", "Regime", "ScenarioConfig", "SuspensionFit", "Symbol",
    "canonical_symbol", "classify", "conjugate_points", "conjugate_time", "exp_map",
    "extract_symbol", "fit_suspension", "heisenberg", "integrate", "slice",
    "symbol_name", "wedge_residual",
]
__version__ = "0.1.0"
