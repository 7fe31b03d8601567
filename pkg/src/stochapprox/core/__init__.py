"""Core stochastic approximation engine: constants, schedules, stopping rules and SA-SPIDER."""

from .constants import derive_constants, epsilon_budget
from .engine import run_replicates, run_sa
from .models import (
    UNBOUNDED,
    ConstantStep,
    DerivedConstants,
    EpsilonBudget,
    HorizonTunedStep,
    PolynomialStep,
    Record,
    RegimeConstants,
    StoppingRule,
    TrajectoryLog,
)
from .presets import PRESETS, get_preset
from .rng import make_rng
from .schedules import check_ratio_condition, fast_rate_schedule, gammas, schedule_gamma
from .spider import SpiderConfig, quadratic_components, run_spider
from .stopping import select_output, stopping_weights, weighted_average

__all__ = [
    "derive_constants",
    "epsilon_budget",
    "run_replicates",
    "run_sa",
    "UNBOUNDED",
    "ConstantStep",
    "DerivedConstants",
    "EpsilonBudget",
    "HorizonTunedStep",
    "PolynomialStep",
    "Record",
    "RegimeConstants",
    "StoppingRule",
    "TrajectoryLog",
    "PRESETS",
    "get_preset",
    "make_rng",
    "check_ratio_condition",
    "fast_rate_schedule",
    "gammas",
    "schedule_gamma",
    "SpiderConfig",
    "quadratic_components",
    "run_spider",
    "select_output",
    "stopping_weights",
    "weighted_average",
]
