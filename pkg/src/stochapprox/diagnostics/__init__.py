"""Assumption certification, bound curves and rate fits."""

from .bounds import (
    BOUND_STATISTICS,
    Aggregate,
    CurveCheck,
    aggregate,
    bound_curve,
    check_curve,
    statistic_weights,
    summation_identity,
)
from .certify import (
    AssumptionReport,
    DriftCheck,
    PointCertificate,
    certify_assumption_A1,
    robbins_siegmund_check,
)
from .rates import RateFit, fit_rate

__all__ = [
    "BOUND_STATISTICS",
    "Aggregate",
    "CurveCheck",
    "aggregate",
    "bound_curve",
    "check_curve",
    "statistic_weights",
    "summation_identity",
    "AssumptionReport",
    "DriftCheck",
    "PointCertificate",
    "certify_assumption_A1",
    "robbins_siegmund_check",
    "RateFit",
    "fit_rate",
]
