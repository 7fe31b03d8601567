"""Log-log rate fitting over horizon sweeps."""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from ..config import RATE_FIT_MIN_DECADES, RATE_FIT_MIN_POINTS, RATE_FIT_MIN_R2
from ..logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class RateFit:
    """
    Least-squares fit of log(value) = intercept + slope log(T).

    Attributes:
        slope: Fitted exponent
        intercept: Fitted log-constant
        r2: Coefficient of determination of the reported fit
        n_points: Points used by the reported fit
        final_decade: True when the fit was restricted to the final decade
    """

    slope: float
    intercept: float
    r2: float
    n_points: int
    final_decade: bool = False


def _fit(T: np.ndarray, values: np.ndarray) -> Tuple[float, float, float]:
    result = linregress(np.log(T), np.log(values))
    return float(result.slope), float(result.intercept), float(result.rvalue**2)


def fit_rate(points: Sequence[Tuple[float, float]]) -> RateFit:
    """
    Fit a power law to (T, value) points.

    When r^2 falls below RATE_FIT_MIN_R2 the fit is redone on the points
    with T in the final decade, where initial-condition transients have died out.

    Raises:
        ValueError: With fewer than RATE_FIT_MIN_POINTS points, a range under
            RATE_FIT_MIN_DECADES decades or a non-positive coordinate
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < RATE_FIT_MIN_POINTS:
        raise ValueError(f"Rate fit needs at least {RATE_FIT_MIN_POINTS} (T, value) points")
    order = np.argsort(data[:, 0])
    T, values = data[order, 0], data[order, 1]
    if np.any(T <= 0.0) or np.any(values <= 0.0):
        raise ValueError("Rate fit needs positive horizons and values")
    decades = math.log10(T[-1] / T[0])
    if decades < RATE_FIT_MIN_DECADES - 1e-9:
        raise ValueError(f"Rate fit needs {RATE_FIT_MIN_DECADES} decades, got {decades:.3f}")

    slope, intercept, r2 = _fit(T, values)
    fit = RateFit(slope=slope, intercept=intercept, r2=r2, n_points=int(T.size))
    if r2 < RATE_FIT_MIN_R2:
        tail = T >= T[-1] / 10.0 * (1.0 - 1e-12)
        if np.count_nonzero(tail) >= 2:
            slope, intercept, r2 = _fit(T[tail], values[tail])
            fit = RateFit(
                slope=slope,
                intercept=intercept,
                r2=r2,
                n_points=int(np.count_nonzero(tail)),
                final_decade=True,
            )

    logger.info(f"rate fit slope:{fit.slope};r2:{fit.r2};points:{fit.n_points};final_decade:{fit.final_decade}")
    return fit
