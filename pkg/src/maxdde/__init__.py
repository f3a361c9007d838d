"""Numerics for u'(t) = a u(t) + b max_{[t-h,t]} u + f(t) with periodic forcing."""

from ._accel import USING_JIT
from .core import (
    NormalizedProblem,
    Parameters,
    ProblemError,
    load_problem,
    preset,
    problem_from_dict,
    stability_check,
)
from .integrator import QualifiedMax, Trajectory, integrate, window_max

__version__ = "0.1.0"

__all__ = [
    "USING_JIT",
    "NormalizedProblem",
    "Parameters",
    "ProblemError",
    "QualifiedMax",
    "Trajectory",
    "integrate",
    "load_problem",
    "preset",
    "problem_from_dict",
    "stability_check",
    "window_max",
]
