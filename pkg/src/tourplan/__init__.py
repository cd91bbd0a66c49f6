"""Reward-optimal tour planning over points of interest with learning curves."""

from .core import CurveSpec, Instance, InstanceError, Itinerary, Poi, Problem
from .curves import PWLCurve, approximate
from .model import BuildOptions, build, extract_itinerary, extract_tours, validate_assignment
from .oracle import oracle_bmt, oracle_rmt
from .pipeline import PlanConfig, PlanResult, plan
from .solver import SolveConfig, solve_lp, solve_mip

__version__ = "0.1.0"

__all__ = [
    "BuildOptions",
    "CurveSpec",
    "Instance",
    "InstanceError",
    "Itinerary",
    "PWLCurve",
    "PlanConfig",
    "PlanResult",
    "Poi",
    "Problem",
    "SolveConfig",
    "approximate",
    "build",
    "extract_itinerary",
    "extract_tours",
    "oracle_bmt",
    "oracle_rmt",
    "plan",
    "solve_lp",
    "solve_mip",
    "validate_assignment",
]
