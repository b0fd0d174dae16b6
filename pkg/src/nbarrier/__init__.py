"""Bounds on linear combinations of traveling-wave profiles for 2- and 3-species competition-diffusion systems."""

from .geometry import Region, fit_region, sample_nullclines
from .hypotheses import HypothesisOptions, verify_hypotheses
from .model import (
    BoundaryState,
    LotkaVolterraParams,
    ReactionSystem,
    WaveProblem,
    classify_boundary_state,
    make_lotka_volterra,
)
from .nbmp import Weights, bounds, bounds_three, bounds_two, chi_indicator
from .solver import solve_bvp, solve_bvp_free_speed, time_march
from .verify import check_bounds, sweep_weights

__version__ = "0.1.0"

__all__ = [
    "BoundaryState",
    "HypothesisOptions",
    "LotkaVolterraParams",
    "ReactionSystem",
    "Region",
    "WaveProblem",
    "Weights",
    "bounds",
    "bounds_three",
    "bounds_two",
    "check_bounds",
    "chi_indicator",
    "classify_boundary_state",
    "fit_region",
    "make_lotka_volterra",
    "sample_nullclines",
    "solve_bvp",
    "solve_bvp_free_speed",
    "sweep_weights",
    "time_march",
    "verify_hypotheses",
]
