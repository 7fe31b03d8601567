"""Step-size schedules."""

import math
from typing import Optional

import numpy as np

from ..errors import InvalidScheduleError
from ..logger import setup_logger
from .models import (
    ConstantStep,
    DerivedConstants,
    Extended,
    HorizonTunedStep,
    PolynomialStep,
    StepSchedule,
    ext_half,
    ext_min,
    is_unbounded,
)

logger = setup_logger(__name__)

# Prefix length used when a diminishing schedule is checked at construction
RATIO_CHECK_PREFIX: int = 10_000


def _validate_schedule(s: StepSchedule) -> None:
    """Raise InvalidScheduleError for a non-positive or out-of-range parameter."""
    if isinstance(s, ConstantStep):
        if not s.gamma > 0.0:
            raise InvalidScheduleError(f"Constant step must be positive, got {s.gamma}")
    elif isinstance(s, HorizonTunedStep):
        if not s.V_bar >= 0.0 or not s.eta0 >= 0.0:
            raise InvalidScheduleError(
                f"V_bar and eta0 must be non-negative, got {s.V_bar}, {s.eta0}"
            )
        if not s.L_V > 0.0:
            raise InvalidScheduleError(f"L_V must be positive, got {s.L_V}")
        if s.T < 1:
            raise InvalidScheduleError(f"Horizon T must be at least 1, got {s.T}")
        if not is_unbounded(s.gamma_max) and not float(s.gamma_max) > 0.0:  # type: ignore[arg-type]
            raise InvalidScheduleError(f"gamma_max must be positive, got {s.gamma_max}")
    elif isinstance(s, PolynomialStep):
        if not s.gamma_tilde > 0.0:
            raise InvalidScheduleError(f"gamma_tilde must be positive, got {s.gamma_tilde}")
        if s.T0 < 0:
            raise InvalidScheduleError(f"T0 must be non-negative, got {s.T0}")
        if not 0.0 < s.beta <= 1.0:
            raise InvalidScheduleError(f"beta must lie in (0, 1], got {s.beta}")
    else:
        raise InvalidScheduleError(f"Unsupported schedule: {type(s).__name__}")


def schedule_gamma(s: StepSchedule, k: int) -> float:
    """
    Return gamma_{k+1}, the step used to leave iterate w_k.

    Args:
        s: Step schedule
        k: Iteration index (k >= 0)

    Returns:
        Strictly positive step size

    Raises:
        InvalidScheduleError: On a non-positive parameter or a schedule that
            would emit a non-positive or unbounded step
    """
    if k < 0:
        raise InvalidScheduleError(f"Iteration index must be non-negative, got {k}")
    _validate_schedule(s)

    if isinstance(s, ConstantStep):
        return s.gamma

    if isinstance(s, HorizonTunedStep):
        tuned: Extended = ext_half(s.gamma_max)
        if s.eta0 > 0.0:
            tuned = ext_min(math.sqrt(2.0 * s.V_bar / (s.eta0 * s.L_V * s.T)), tuned)
        if is_unbounded(tuned):
            raise InvalidScheduleError("Horizon-tuned step is unbounded (eta0 = 0 and gamma_max = inf)")
        gamma = float(tuned)  # type: ignore[arg-type]
        if not gamma > 0.0:
            raise InvalidScheduleError(f"Horizon-tuned step is not positive (V_bar={s.V_bar})")
        return gamma

    return s.gamma_tilde / (k + 1 + s.T0) ** s.beta  # type: ignore[union-attr]


def gammas(s: StepSchedule, T: int) -> np.ndarray:
    """Return the vector (gamma_1, ..., gamma_T)."""
    if T < 1:
        raise InvalidScheduleError(f"Horizon T must be at least 1, got {T}")
    if isinstance(s, PolynomialStep):
        _validate_schedule(s)
        k = np.arange(T, dtype=float)
        return s.gamma_tilde / (k + 1.0 + s.T0) ** s.beta
    return np.full(T, schedule_gamma(s, 0), dtype=float)


def check_ratio_condition(
    steps: np.ndarray,
    rho_margin: float,
    gamma_max: Extended,
    atol: float = 1e-12,
) -> None:
    """
    Verify gamma_k / gamma_{k+1} <= 1 + gamma_{k+1} (rho - b1)/4 and gamma_k <= gamma_max/2.

    Raises:
        InvalidScheduleError: Naming the first offending index
    """
    steps = np.asarray(steps, dtype=float)
    if not is_unbounded(gamma_max):
        cap = float(gamma_max) / 2.0  # type: ignore[arg-type]
        over = np.nonzero(steps > cap + atol)[0]
        if over.size:
            k = int(over[0])
            raise InvalidScheduleError(
                f"Step gamma_{k + 1}={steps[k]} exceeds gamma_max/2={cap}"
            )
    if steps.size < 2:
        return
    lhs = steps[:-1] / steps[1:]
    rhs = 1.0 + steps[1:] * rho_margin / 4.0
    bad = np.nonzero(lhs > rhs + atol)[0]
    if bad.size:
        k = int(bad[0])
        raise InvalidScheduleError(
            f"Ratio condition fails at k={k + 1}: {lhs[k]} > {rhs[k]}"
        )


def fast_rate_schedule(
    dc: DerivedConstants,
    gamma_tilde: Optional[float] = None,
    T0: Optional[int] = None,
) -> PolynomialStep:
    """
    Diminishing schedule gamma_tilde/(k + 1 + T0) for the last-iterate rate with V = W.

    Defaults to gamma_tilde = 6/(rho - b1) and the smallest T0 >= 1 with
    T0 >= 2 gamma_tilde/gamma_max.

    Raises:
        InvalidScheduleError: If the resulting schedule violates the ratio condition
    """
    g = 6.0 / dc.rho_margin if gamma_tilde is None else gamma_tilde
    if g < 6.0 / dc.rho_margin * (1.0 - 1e-12):
        raise InvalidScheduleError(
            f"gamma_tilde={g} is below 6/(rho - b1)={6.0 / dc.rho_margin}"
        )
    if T0 is None:
        T0 = 1
        if not is_unbounded(dc.gamma_max):
            T0 = max(T0, math.ceil(round(2.0 * g / float(dc.gamma_max), 9)))  # type: ignore[arg-type]

    schedule = PolynomialStep(gamma_tilde=g, T0=T0, beta=1.0)
    check_ratio_condition(gammas(schedule, RATIO_CHECK_PREFIX), dc.rho_margin, dc.gamma_max)
    logger.info(f"fast rate schedule gamma_tilde:{g};T0:{T0}")
    return schedule


def fast_rate_lambdas(dc: DerivedConstants, steps: np.ndarray) -> np.ndarray:
    """Return lambda_k = 1 - gamma_k (rho - b1) + gamma_k^2 L_V eta1/2 for each step."""
    steps = np.asarray(steps, dtype=float)
    return 1.0 - steps * dc.rho_margin + steps**2 * dc.L_V * dc.eta1 / 2.0


def fast_rate_offsets(dc: DerivedConstants, steps: np.ndarray) -> np.ndarray:
    """Return b_k = gamma_k b0 + gamma_k^2 L_V eta0/2 for each step."""
    steps = np.asarray(steps, dtype=float)
    return steps * dc.b0 + steps**2 * dc.L_V * dc.eta0 / 2.0
