"""Barzilai-Borwein gradient method over weighted inner-product spaces,
with synthetic spectral quadratics and PDE-constrained control back-ends."""

from .bb import (
    BBConfig,
    BBTrace,
    DefaultInit,
    GradientProblem,
    InitC1,
    InitC2,
    Safeguard,
    StepRule,
    bb_step,
    k_star,
    run,
)
from .linalg import WeightedSpace, build_sparse, solve_general, solve_spd, wdot, wnorm
from .spectral import (
    SpectralOperator,
    component_trace,
    empirical_half_life,
    half_life_bound,
    make_clustered_problem,
    rate_constants,
)

__all__ = [
    "BBConfig",
    "BBTrace",
    "DefaultInit",
    "GradientProblem",
    "InitC1",
    "InitC2",
    "Safeguard",
    "SpectralOperator",
    "StepRule",
    "WeightedSpace",
    "bb_step",
    "build_sparse",
    "component_trace",
    "empirical_half_life",
    "half_life_bound",
    "k_star",
    "make_clustered_problem",
    "rate_constants",
    "run",
    "solve_general",
    "solve_spd",
    "wdot",
    "wnorm",
]

__version__ = "0.1.0"
