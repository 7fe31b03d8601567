"""Data models for stochastic approximation runs."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np


class Unbounded:
    """
    Sentinel for an unbounded constant (c_V or gamma_max equal to +inf).

    Never enters float arithmetic: helpers below resolve it before any
    product or quotient is formed.
    """

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Unbounded)

    def __hash__(self) -> int:
        return hash("UNBOUNDED")


UNBOUNDED = Unbounded()

Extended = Union[float, Unbounded]


def is_unbounded(x: object) -> bool:
    """Return True when x is the unbounded sentinel."""
    return isinstance(x, Unbounded)


def ext_min(a: Extended, b: Extended) -> Extended:
    """Minimum where the sentinel acts as +inf."""
    if is_unbounded(a):
        return b
    if is_unbounded(b):
        return a
    return min(float(a), float(b))  # type: ignore[arg-type]


def ext_half(x: Extended) -> Extended:
    """Return x/2, keeping the sentinel unbounded."""
    return x if is_unbounded(x) else float(x) / 2.0  # type: ignore[arg-type]


def ext_str(x: Extended) -> str:
    """Render an extended value for logs and CSV files."""
    return "inf" if is_unbounded(x) else repr(float(x))  # type: ignore[arg-type]


@dataclass(frozen=True)
class RegimeConstants:
    """
    Constant bundle for the field and Lyapunov assumptions.

    Attributes:
        c_h0: Mean-field growth constant, ||h||^2 <= c_h0 + c_h1 W
        c_h1: Mean-field growth constant multiplying W
        tau0: Bias constant, ||E[H|F] - h||^2 <= tau0 + tau1 W
        tau1: Bias constant multiplying W
        sigma2_0: Variance constant, E||H - E[H|F]||^2 <= sigma2_0 + sigma2_1 W
        sigma2_1: Variance constant multiplying W
        L_V: Smoothness constant of V
        rho: Drift constant, <grad V, h> <= -rho W
        c_V: Constant with ||grad V|| <= c_V sqrt(W), possibly UNBOUNDED
        V_star: Lower bound of V
        pair: Tag describing the (V, W) pair the constants refer to
    """

    c_h0: float
    c_h1: float
    tau0: float
    tau1: float
    sigma2_0: float
    sigma2_1: float
    L_V: float
    rho: float
    c_V: Extended
    V_star: float = 0.0
    pair: str = ""

    @property
    def is_unbiased(self) -> bool:
        """Return True for an unbiased oracle (tau0 = tau1 = 0)."""
        return self.tau0 == 0.0 and self.tau1 == 0.0


@dataclass(frozen=True)
class DerivedConstants:
    """
    Constants derived from a RegimeConstants bundle.

    Attributes:
        b0: Bias term c_V sqrt(tau0)/2
        b1: Bias term c_V (sqrt(tau0)/2 + sqrt(tau1))
        eta0: Second-moment constant for the offset
        eta1: Second-moment constant multiplying W
        gamma_max: Largest admissible step, UNBOUNDED when eta1 = 0
        B: Non-vanishing bias floor 2 b0/(rho - b1)
        V_bar: Initial Lyapunov gap E V(w0) - V_star
        rho_margin: rho - b1 (strictly positive)
        L_V: Smoothness constant of V
    """

    b0: float
    b1: float
    eta0: float
    eta1: float
    gamma_max: Extended
    B: float
    V_bar: float
    rho_margin: float
    L_V: float

    def omega(self, gamma: float) -> float:
        """Return 2(rho - b1) - gamma L_V eta1."""
        return 2.0 * self.rho_margin - gamma * self.L_V * self.eta1

    def fast_lambda(self, gamma: float) -> float:
        """Return the contraction factor 1 - gamma(rho - b1) + gamma^2 L_V eta1/2."""
        return 1.0 - gamma * self.rho_margin + gamma**2 * self.L_V * self.eta1 / 2.0

    def fast_offset(self, gamma: float) -> float:
        """Return the additive term gamma b0 + gamma^2 L_V eta0/2."""
        return gamma * self.b0 + gamma**2 * self.L_V * self.eta0 / 2.0


@dataclass(frozen=True)
class ConstantStep:
    """Constant step size gamma."""

    gamma: float


@dataclass(frozen=True)
class HorizonTunedStep:
    """
    Constant step tuned to the horizon T.

    Attributes:
        V_bar: Initial Lyapunov gap
        eta0: Second-moment offset constant
        L_V: Smoothness constant of V
        gamma_max: Largest admissible step (may be UNBOUNDED)
        T: Horizon
    """

    V_bar: float
    eta0: float
    L_V: float
    gamma_max: Extended
    T: int


@dataclass(frozen=True)
class PolynomialStep:
    """Decreasing step gamma_tilde / (k + 1 + T0)^beta."""

    gamma_tilde: float
    T0: int
    beta: float = 1.0


StepSchedule = Union[ConstantStep, HorizonTunedStep, PolynomialStep]


class StoppingRule(str, Enum):
    """Rule selecting the output iterate of a run."""

    LAST = "last"
    RANDOM_WEIGHTED = "random"
    WEIGHTED_AVERAGE = "average"


@dataclass(slots=True)
class Record:
    """
    Monitored quantities at iterate w_k, before the (k+1)-th update.

    Attributes:
        k: Iteration index
        gamma: Step gamma_{k+1} used to leave w_k
        W: W(w_k)
        V: V(w_k)
        normh2: ||h(w_k)||^2
        epoch: Outer loop index for doubly indexed runs
        inner: Inner loop index for doubly indexed runs
        oracle_error2: ||H_{k+1} - h(w_k)||^2 when tracked
    """

    k: int
    gamma: float
    W: float
    V: float
    normh2: float
    epoch: Optional[int] = None
    inner: Optional[int] = None
    oracle_error2: Optional[float] = None


@dataclass
class TrajectoryLog:
    """
    Result of one SA run.

    Attributes:
        replicate: Replicate index used to derive the random stream
        records: One record per iteration, strictly increasing in k
        final_w: Last iterate w_T
        iterates: Stored iterates w_0..w_{T-1} (rows) when requested
        oracle_calls: Number of component evaluations (SPIDER runs)
    """

    replicate: int
    records: List[Record] = field(default_factory=list)
    final_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterates: Optional[np.ndarray] = None
    oracle_calls: int = 0

    def column(self, name: str) -> np.ndarray:
        """Return one monitored quantity across records as an array."""
        return np.array([getattr(r, name) for r in self.records], dtype=float)


@dataclass(frozen=True)
class EpsilonBudget:
    """
    Iteration budget for epsilon-approximate stationarity.

    Attributes:
        T: Number of iterations
        gamma: Constant step size achieving the budget
        regime: "high" or "low" precision regime
    """

    T: int
    gamma: float
    regime: str
