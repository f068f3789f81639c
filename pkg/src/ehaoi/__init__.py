"""Age-optimal threshold policies for an energy-harvesting sensor with a finite battery.

Energy arrives as a Poisson process into a battery of ``B`` units; the sensor
sends a status update (spending one unit) once the age of information reaches
a threshold that depends on the current battery level. This package evaluates
the long-run average age of such policies exactly, optimises the thresholds,
and checks both against an event-driven simulator.
"""

from .chain import ChainModel, StationaryError, build_transition, chain_model, stationary_distribution
from .erlang import ErlangSpec, erlang_cdf, erlang_survival, poisson_head, survival_partial_moment
from .optimize import OptimizationReport, OptimizerOptions, SweepRow, optimize_thresholds, sweep
from .policy import (
    InvalidThresholdError,
    LengthMismatchError,
    MonotonicityError,
    PolicyError,
    PolicyEvaluation,
    SystemParams,
    ThresholdPolicy,
    validate_policy,
)
from .renewal import (
    all_conditional_moments,
    average_age,
    average_age_b2_closed,
    conditional_moments,
    interupdate_cdf,
    moment_derivative_residual,
)
from .simulate import SimulationConfig, SimulationResult, simulate

__version__ = "0.1.0"

__all__ = [
    "ChainModel",
    "ErlangSpec",
    "InvalidThresholdError",
    "LengthMismatchError",
    "MonotonicityError",
    "OptimizationReport",
    "OptimizerOptions",
    "PolicyError",
    "PolicyEvaluation",
    "SimulationConfig",
    "SimulationResult",
    "StationaryError",
    "SweepRow",
    "SystemParams",
    "ThresholdPolicy",
    "all_conditional_moments",
    "average_age",
    "average_age_b2_closed",
    "build_transition",
    "chain_model",
    "conditional_moments",
    "erlang_cdf",
    "erlang_survival",
    "interupdate_cdf",
    "moment_derivative_residual",
    "optimize_thresholds",
    "poisson_head",
    "simulate",
    "stationary_distribution",
    "survival_partial_moment",
    "sweep",
    "validate_policy",
]
