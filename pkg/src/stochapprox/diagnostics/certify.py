"""Monte Carlo certification of the oracle assumptions and the one-step drift inequality."""

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..config import IDENTITY_RTOL, SE_MULTIPLIER
from ..core.models import DerivedConstants, RegimeConstants
from ..errors import DimensionMismatchError
from ..logger import setup_logger
from ..problems.base import FieldOracle

logger = setup_logger(__name__)


@dataclass(frozen=True)
class PointCertificate:
    """
    Bias and variance estimates of the oracle at one test point.

    Attributes:
        index: Position of the point in the test set
        W: W at the point
        bias2: Squared norm of the estimated conditional bias
        bias2_lower: Squared norm of the bias after shrinking each coordinate
            by its confidence half-width (the smallest bias the samples allow)
        bias_bound: tau0 + tau1 W
        variance: Estimated E||H - E[H]||^2
        variance_se: Standard error of the variance estimate
        variance_bound: sigma2_0 + sigma2_1 W
        passed: Both estimates are consistent with their bounds
    """

    index: int
    W: float
    bias2: float
    bias2_lower: float
    bias_bound: float
    variance: float
    variance_se: float
    variance_bound: float
    passed: bool


@dataclass
class AssumptionReport:
    """
    Certification outcome over a set of test points.

    Attributes:
        samples: Oracle draws per point
        points: One certificate per test point
    """

    samples: int
    points: List[PointCertificate] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.points)

    @property
    def failures(self) -> List[int]:
        """Indices of the points whose estimates exceed the bounds."""
        return [p.index for p in self.points if not p.passed]


def _draw(oracle: FieldOracle, w: np.ndarray, N: int, rng: np.random.Generator) -> np.ndarray:
    samples = np.array([oracle.sample(w, rng) for _ in range(N)], dtype=float)
    if samples.shape != (N, w.size):
        raise DimensionMismatchError(f"Samples have shape {samples.shape}, expected ({N}, {w.size})")
    return samples


def _tolerance(bound: float) -> float:
    return IDENTITY_RTOL * max(1.0, abs(bound))


def certify_assumption_A1(
    oracle: FieldOracle,
    rc: RegimeConstants,
    test_points: Sequence[np.ndarray],
    N: int,
    rng: np.random.Generator,
    multiplier: float = SE_MULTIPLIER,
) -> AssumptionReport:
    """
    Estimate the conditional bias and variance of an oracle at fixed points.

    The bias check passes when the smallest bias within the per-coordinate
    confidence box satisfies ||bias||^2 <= tau0 + tau1 W; the variance check
    passes when the estimate is at most sigma2_0 + sigma2_1 W plus
    multiplier standard errors. Failures are recorded, never raised.

    Args:
        oracle: Random-field oracle; W is taken from oracle.lyapunov_W
        rc: Constant bundle to certify
        test_points: Points at which the oracle is sampled
        N: Samples per point (at least 2)
        rng: Generator driving the oracle
        multiplier: Width of the acceptance band in standard errors

    Returns:
        AssumptionReport with one certificate per point
    """
    if N < 2:
        raise ValueError(f"Certification needs at least 2 samples, got {N}")
    report = AssumptionReport(samples=N)
    for index, point in enumerate(test_points):
        w = np.asarray(point, dtype=float)
        W = oracle.lyapunov_W(w)
        samples = _draw(oracle, w, N, rng)
        centre = samples.mean(axis=0)

        bias = centre - oracle.mean_field(w)
        half_width = multiplier * samples.std(axis=0, ddof=1) / math.sqrt(N)
        shrunk = np.maximum(np.abs(bias) - half_width, 0.0)
        bias2 = float(bias @ bias)
        bias2_lower = float(shrunk @ shrunk)
        bias_bound = rc.tau0 + rc.tau1 * W

        spread = np.sum((samples - centre) ** 2, axis=1) * N / (N - 1)
        variance = float(spread.mean())
        variance_se = float(spread.std(ddof=1)) / math.sqrt(N)
        variance_bound = rc.sigma2_0 + rc.sigma2_1 * W

        passed = bool(
            bias2_lower <= bias_bound + _tolerance(bias_bound)
            and variance <= variance_bound + multiplier * variance_se + _tolerance(variance_bound)
        )
        report.points.append(
            PointCertificate(
                index=index,
                W=W,
                bias2=bias2,
                bias2_lower=bias2_lower,
                bias_bound=bias_bound,
                variance=variance,
                variance_se=variance_se,
                variance_bound=variance_bound,
                passed=passed,
            )
        )
        logger.debug(
            f"certify point index:{index};bias2:{bias2};bias_bound:{bias_bound};"
            f"variance:{variance};variance_bound:{variance_bound};passed:{passed}"
        )

    logger.info(
        f"certification finished pair:{rc.pair or 'unset'};points:{len(report.points)};"
        f"passed:{report.passed}"
    )
    return report


@dataclass(frozen=True)
class DriftCheck:
    """
    One-step drift inequality at a fixed point.

    Attributes:
        lhs: Monte Carlo estimate of E V(w + gamma H)
        se: Standard error of lhs
        rhs: V(w) - gamma omega W(w)/2 + gamma b0 + gamma^2 L_V eta0/2
        passed: lhs <= rhs + multiplier * se
    """

    lhs: float
    se: float
    rhs: float
    passed: bool


def robbins_siegmund_check(
    oracle: FieldOracle,
    rc: RegimeConstants,
    dc: DerivedConstants,
    w: np.ndarray,
    gamma: float,
    N: int,
    rng: np.random.Generator,
    variant: str = "general",
    multiplier: float = SE_MULTIPLIER,
) -> DriftCheck:
    """
    Check E V(w + gamma H) <= V(w) - gamma omega W(w)/2 + gamma b0 + gamma^2 L_V eta0/2.

    The conditional inequality is tested in expectation at the fixed point w.
    The general variant uses omega = 2(rho - b1) - gamma L_V eta1; the gradient
    variant (grad V = -h) uses omega = 2 rho - gamma L_V eta1.

    Args:
        oracle: Random-field oracle providing V and W
        rc: Field constants
        dc: Derived constants of rc
        w: Conditioning point
        gamma: Step size
        N: Number of oracle draws
        rng: Generator driving the oracle
        variant: "general" or "gradient"
        multiplier: Width of the acceptance band in standard errors
    """
    if variant == "general":
        omega = dc.omega(gamma)
    elif variant == "gradient":
        omega = 2.0 * rc.rho - gamma * dc.L_V * dc.eta1
    else:
        raise ValueError(f"Unsupported variant: {variant}. Supported variants: general, gradient")
    if N < 1:
        raise ValueError(f"Drift check needs at least 1 sample, got {N}")

    w = np.asarray(w, dtype=float)
    values = np.array([oracle.lyapunov_V(w + gamma * H) for H in _draw(oracle, w, N, rng)])
    lhs = float(values.mean())
    se = float(values.std(ddof=1)) / math.sqrt(N) if N > 1 else 0.0
    rhs = (
        oracle.lyapunov_V(w)
        - 0.5 * gamma * omega * oracle.lyapunov_W(w)
        + gamma * dc.b0
        + gamma**2 * dc.L_V * dc.eta0 / 2.0
    )
    passed = lhs <= rhs + multiplier * se + _tolerance(rhs)
    logger.debug(f"drift check variant:{variant};gamma:{gamma};lhs:{lhs};rhs:{rhs};passed:{passed}")
    return DriftCheck(lhs=lhs, se=se, rhs=rhs, passed=passed)
