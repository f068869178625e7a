"""Sample-augmented prophet inequalities: MRS rules, streaming, secretary and control problems."""

from .core import (Adversarial, Empirical, Exponential, ProblemInstance, RunOutcome, TieBreaker,
                   TwoPoint, Uniform01, expected_max, parse_distribution, sample_value)
from .profiles import (Constrained, DiscreteSchedule, InfeasibleSchedule, UnconstrainedOpt,
                       discretize, parse_profile, three_step)

__version__ = "0.1.0"

__all__ = [
    "Adversarial", "Constrained", "DiscreteSchedule", "Empirical", "Exponential",
    "InfeasibleSchedule", "ProblemInstance", "RunOutcome", "TieBreaker", "TwoPoint",
    "UnconstrainedOpt", "Uniform01", "discretize", "expected_max", "parse_distribution",
    "parse_profile", "sample_value", "three_step",
]
