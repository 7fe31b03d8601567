"""Stopping rules: last iterate, random stopping and weighted averaging."""

from typing import Optional, Union

import numpy as np

from ..errors import DimensionMismatchError, MissingIteratesError, NonPositiveWeightError
from .models import DerivedConstants, StoppingRule, TrajectoryLog


def stopping_omegas(dc: DerivedConstants, steps: np.ndarray) -> np.ndarray:
    """Return omega_{k+1} = 2(rho - b1) - gamma_{k+1} L_V eta1 for each step."""
    return 2.0 * dc.rho_margin - np.asarray(steps, dtype=float) * dc.L_V * dc.eta1


def stopping_weights(steps: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    """
    Probability mass function proportional to gamma_{k+1} omega_{k+1}.

    Args:
        steps: Step sizes (gamma_1, ..., gamma_T)
        omegas: Matching omega values

    Returns:
        Normalized weights summing to one

    Raises:
        NonPositiveWeightError: If some product is not strictly positive
            (typically a step at or above gamma_max)
    """
    steps = np.asarray(steps, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if steps.shape != omegas.shape:
        raise DimensionMismatchError(
            f"steps and omegas differ in shape: {steps.shape} vs {omegas.shape}"
        )
    if steps.size == 0:
        raise NonPositiveWeightError("No weights to normalize")
    products = steps * omegas
    bad = np.nonzero(~(products > 0.0))[0]
    if bad.size:
        k = int(bad[0])
        raise NonPositiveWeightError(
            f"Weight gamma*omega at index {k} is not positive: {products[k]}"
        )
    return products / products.sum()


def weighted_average(iterates: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Return sum_k weights_k w_k for iterates stacked as rows."""
    iterates = np.asarray(iterates, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if iterates.ndim != 2 or iterates.shape[0] != weights.shape[0]:
        raise DimensionMismatchError(
            f"Iterates {iterates.shape} do not match weights {weights.shape}"
        )
    return weights @ iterates


def select_output(
    log: TrajectoryLog,
    rule: Union[StoppingRule, str],
    rng: np.random.Generator,
    omegas: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Pick the output iterate of a run.

    Args:
        log: Run log; random and averaged rules need stored iterates
        rule: Stopping rule
        rng: Generator used by the random rule
        omegas: omega_{k+1} values; uniform when omitted

    Returns:
        w_T for LAST, w_{R_T} for RANDOM_WEIGHTED, the weighted mean for WEIGHTED_AVERAGE
    """
    rule = StoppingRule(rule)
    if not log.records:
        raise MissingIteratesError("Log has no records")
    if rule is StoppingRule.LAST:
        return log.final_w.copy()
    if log.iterates is None:
        raise MissingIteratesError(f"Rule '{rule.value}' needs stored iterates")

    steps = log.column("gamma")
    weights = stopping_weights(steps, np.ones_like(steps) if omegas is None else omegas)
    if rule is StoppingRule.RANDOM_WEIGHTED:
        index = int(rng.choice(weights.size, p=weights))
        return log.iterates[index].copy()
    return weighted_average(log.iterates, weights)
