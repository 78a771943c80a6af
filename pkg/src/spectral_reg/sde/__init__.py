"""Coupled singular-value diffusions with a compiled integration kernel."""
from ._backend import BACKEND
from .coupling import (
    CollisionError,
    CoupledPaths,
    KSReport,
    StepFloorError,
    couple_evolve,
    drift_complex,
    drift_real_wishart,
    lift_initial,
    marginal_law_check,
    quasi_monotone_check,
    sde_endpoints,
)

__all__ = [
    "BACKEND",
    "CollisionError",
    "CoupledPaths",
    "KSReport",
    "StepFloorError",
    "couple_evolve",
    "drift_complex",
    "drift_real_wishart",
    "lift_initial",
    "marginal_law_check",
    "quasi_monotone_check",
    "sde_endpoints",
]
