"""Numerical laboratory for quasi-adiabatic eigenstate preparation."""

from ._validation import GapError, ValidationError
from .estimators import EigenstateTracker, GapAdaptiveScheduler, GroundStatePreparer
from .family import InterpolationFamily, gap, scan_gap, spectrum
from .gaps import (GapProfile, Schedule, check_segment_bounds, greedy_schedule, grover_gap,
                   level_sets)
from .ground_state import prepare_ground_state
from .models import generate_model
from .propagation import prepare_eigenstate
from .qac import QacParams, choose_parameters
from .resources import (CostReport, estimate_eigenstate_cost, estimate_gap_adaptive,
                        estimate_generator_oracle, estimate_ground_state_cost)

__version__ = "0.1.0"

__all__ = [
    "CostReport", "EigenstateTracker", "GapAdaptiveScheduler", "GapError", "GapProfile",
    "GroundStatePreparer", "InterpolationFamily", "QacParams", "Schedule", "ValidationError",
    "check_segment_bounds", "choose_parameters", "estimate_eigenstate_cost", "estimate_gap_adaptive",
    "estimate_generator_oracle", "estimate_ground_state_cost", "gap", "generate_model",
    "greedy_schedule", "grover_gap", "level_sets", "prepare_eigenstate", "prepare_ground_state",
    "scan_gap", "spectrum",
]
