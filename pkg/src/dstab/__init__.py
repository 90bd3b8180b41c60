"""Numerical tools for stability of Euler discretizations of subgradient inclusions."""

from .catalog import PROBLEM_NAMES, ProblemSpec, get_problem, orthogonal_conjugate, rotation
from .core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, ProbeReport, SetDescriptor, StepSchedule,
                   make_constant_schedule, make_power_schedule, make_random_schedule)
from .euler import Selector, Trajectory, simulate, simulate_batch
from .fields import Field, bouligand_field, normalized_field

__all__ = [
    "COUNTEREXAMPLE", "NO_VIOLATION_FOUND", "PROBLEM_NAMES", "Field", "ProbeReport",
    "ProblemSpec", "Selector", "SetDescriptor", "StepSchedule", "Trajectory",
    "bouligand_field", "get_problem", "make_constant_schedule", "make_power_schedule",
    "make_random_schedule", "normalized_field", "orthogonal_conjugate", "rotation",
    "simulate", "simulate_batch",
]
