"""Variance-reduced stochastic approximation with the SPIDER control variate."""

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Protocol, Tuple

import numpy as np

from ..errors import ConfigViolationError, DimensionMismatchError
from ..logger import setup_logger
from ..problems.sgd import FiniteSumProblem, full_gradient, objective
from .engine import check_finite
from .models import ConstantStep, Record, RegimeConstants, StepSchedule, TrajectoryLog
from .rng import make_rng
from .schedules import gammas

logger = setup_logger(__name__)


class ComponentField(Protocol):
    """
    Finite-sum mean field h = (1/n) sum_i h_i with Lipschitz components.

    Implementations expose the components through component(), the exact
    mean field and the Lyapunov pair, and the aggregate constant L_bar2.
    """

    @property
    def n(self) -> int:
        ...

    @property
    def dim(self) -> int:
        ...

    @property
    def L_bar2(self) -> float:
        """Return (1/n) sum_i L_i^2."""
        ...

    def component(self, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Return h_i(w) for the indices idx, one per row."""
        ...

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        ...

    def lyapunov_V(self, w: np.ndarray) -> float:
        ...

    def lyapunov_W(self, w: np.ndarray) -> float:
        ...

    def regime_constants(self) -> RegimeConstants:
        ...


@dataclass(frozen=True, eq=False)
class QuadraticComponents:
    """
    Components h_i = -grad f_i of a finite-sum quadratic with V = F and W = ||grad F||^2.

    Attributes:
        problem: Finite-sum quadratic
    """

    problem: FiniteSumProblem

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def dim(self) -> int:
        return self.problem.d

    @property
    def L_bar2(self) -> float:
        return float(np.mean(self.problem.component_lipschitz**2))

    def component(self, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return self.problem.b[idx] - np.einsum("bij,j->bi", self.problem.Q[idx], w)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return -full_gradient(self.problem, w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return objective(self.problem, w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        g = full_gradient(self.problem, w)
        return float(g @ g)

    def regime_constants(self) -> RegimeConstants:
        p = self.problem
        return RegimeConstants(
            c_h0=0.0, c_h1=1.0, tau0=0.0, tau1=0.0, sigma2_0=0.0, sigma2_1=0.0,
            L_V=p.L, rho=1.0, c_V=1.0,
            V_star=p.F_star if p.w_star is not None else float("-inf"),
            pair="V=F,W=|grad F|^2",
        )


def quadratic_components(problem: FiniteSumProblem) -> QuadraticComponents:
    """Build the component field of a finite-sum quadratic."""
    return QuadraticComponents(problem=problem)


@dataclass(frozen=True)
class SpiderConfig:
    """
    Loop structure of SA-SPIDER.

    Attributes:
        k_in: Inner iterations per epoch
        k_out: Number of epochs (control-variate resets)
        b: Mini-batch size of the correction term
        schedule: Steps gamma_{t,k+1} indexed by (t - 1) k_in + k
        replacement: Draw mini-batches with replacement
    """

    k_in: int
    k_out: int
    b: int
    schedule: StepSchedule
    replacement: bool = False

    @property
    def T(self) -> int:
        return self.k_in * self.k_out


def spider_lambda(
    gamma: np.ndarray,
    L_V: float,
    L_bar2: float,
    c_V: float,
    rho: float,
    k_in: int,
    b: int,
) -> np.ndarray:
    """Return lambda(gamma) = L_V + gamma L_bar^2 (c_V^2/rho + rho) k_in/b."""
    return L_V + np.asarray(gamma, dtype=float) * L_bar2 * (c_V**2 / rho + rho) * k_in / b


def spider_gamma_max(
    rho: float,
    L_V: float,
    L_bar2: float,
    c_V: float,
    c_h1: float,
    k_in: int,
    b: int,
) -> float:
    """
    Largest constant step of SA-SPIDER.

    The positive root of (1 v c_h1) gamma lambda(gamma) = rho/2, written as
    rho/(c (L_V + sqrt(L_V^2 + 2 a rho/c))) with a = L_bar^2 (c_V^2/rho + rho) k_in/b
    and c = 1 v c_h1; it reduces to rho/(2 c L_V) when L_bar = 0.
    """
    c = max(1.0, c_h1)
    a = L_bar2 * (c_V**2 / rho + rho) * k_in / b
    return rho / (c * (L_V + math.sqrt(L_V**2 + 2.0 * a * rho / c)))


def _validate_config(cf: ComponentField, config: SpiderConfig) -> np.ndarray:
    """Check loop sizes and the step hypothesis; return the flat step vector."""
    if config.k_in < 1 or config.k_out < 1:
        raise ConfigViolationError(f"k_in and k_out must be >= 1, got {config.k_in}, {config.k_out}")
    if config.b < 1 or (not config.replacement and config.b > cf.n):
        raise ConfigViolationError(f"Batch size {config.b} invalid for n={cf.n}")
    steps = gammas(config.schedule, config.T)
    per_epoch = steps.reshape(config.k_out, config.k_in)
    if np.any(per_epoch[:, 1:] > per_epoch[:, :-1]):
        raise ConfigViolationError("Steps must be non-increasing within each epoch")

    rc = cf.regime_constants()
    c_V = float(rc.c_V)  # type: ignore[arg-type]
    lam = spider_lambda(steps, rc.L_V, cf.L_bar2, c_V, rc.rho, config.k_in, config.b)
    lhs = max(1.0, rc.c_h1) * steps * lam
    bad = np.nonzero(lhs >= rc.rho / 2.0)[0]
    if bad.size:
        k = int(bad[0])
        raise ConfigViolationError(
            f"(1 v c_h1) gamma lambda(gamma)={lhs[k]} >= rho/2={rc.rho / 2.0} at step {k + 1}"
        )
    return steps


def _draw(n: int, b: int, replacement: bool, rng: np.random.Generator) -> np.ndarray:
    if replacement:
        return rng.integers(0, n, size=b)
    return rng.choice(n, size=b, replace=False)


def run_spider(
    cf: ComponentField,
    config: SpiderConfig,
    w_init: np.ndarray,
    seed: int,
    replicate: int = 0,
    store_iterates: bool = False,
) -> TrajectoryLog:
    """
    Run SA-SPIDER for k_out epochs of k_in steps.

    Each epoch starts with w_{t,-1} = w_{t,0} and H_{t,0} = h(w_{t,0}) from a
    full pass; the batch B_{t,0} is drawn and discarded. Record (t, k) holds
    W, V and ||h||^2 at w_{t,k} together with ||H_{t,k+1} - h(w_{t,k})||^2.

    Raises:
        ConfigViolationError: If the step hypothesis fails
        DivergenceError: On a non-finite or exploding iterate
    """
    w = np.array(w_init, dtype=float)
    if w.shape != (cf.dim,):
        raise DimensionMismatchError(f"Initial point has shape {w.shape}, field expects ({cf.dim},)")
    steps = _validate_config(cf, config)
    rng = make_rng(seed, replicate)
    check_finite(w, 0)

    records: List[Record] = []
    iterates = np.empty((config.T, cf.dim)) if store_iterates else None
    calls = 0
    for t in range(1, config.k_out + 1):
        w_prev = w.copy()
        _draw(cf.n, config.b, config.replacement, rng)
        H = cf.mean_field(w)
        calls += cf.n
        logger.debug(f"spider epoch reset t:{t};calls:{calls}")
        for k in range(config.k_in):
            idx = _draw(cf.n, config.b, config.replacement, rng)
            H = H + (cf.component(w, idx) - cf.component(w_prev, idx)).mean(axis=0)
            calls += 2 * config.b
            g = (t - 1) * config.k_in + k
            h = cf.mean_field(w)
            err = H - h
            records.append(
                Record(
                    k=g,
                    gamma=float(steps[g]),
                    W=cf.lyapunov_W(w),
                    V=cf.lyapunov_V(w),
                    normh2=float(h @ h),
                    epoch=t,
                    inner=k,
                    oracle_error2=float(err @ err),
                )
            )
            if iterates is not None:
                iterates[g] = w
            w_prev = w
            w = w + steps[g] * H
            check_finite(w, g + 1)

    logger.info(
        f"spider finished replicate:{replicate};T:{config.T};calls:{calls};final_W:{cf.lyapunov_W(w)}"
    )
    return TrajectoryLog(
        replicate=replicate, records=records, final_w=w, iterates=iterates, oracle_calls=calls
    )


def enumerate_spider_step(
    cf: ComponentField,
    H: np.ndarray,
    w_prev: np.ndarray,
    w: np.ndarray,
    b: int,
    replacement: bool = False,
) -> Tuple[np.ndarray, float]:
    """
    Exact conditional mean and variance of H_{k+1} given (H_k, w_{k-1}, w_k).

    Every batch is enumerated: ordered b-tuples with replacement, b-subsets
    without. Meant for small n.
    """
    if replacement:
        batches = list(itertools.product(range(cf.n), repeat=b))
    else:
        batches = list(itertools.combinations(range(cf.n), b))
    diffs = cf.component(w, np.arange(cf.n)) - cf.component(w_prev, np.arange(cf.n))
    outcomes = np.array([H + diffs[list(batch)].mean(axis=0) for batch in batches])
    mean = outcomes.mean(axis=0)
    variance = float(np.mean(np.sum((outcomes - mean) ** 2, axis=1)))
    return mean, variance


def spider_bound_vr(
    steps: np.ndarray,
    L_V: float,
    L_bar2: float,
    c_V: float,
    rho: float,
    k_in: int,
    b: int,
) -> float:
    """Return B^vr = L_V sum gamma^2 + (L_bar^2 k_in/b)(c_V^2/rho + rho) sum gamma^3."""
    steps = np.asarray(steps, dtype=float)
    return L_V * float(np.sum(steps**2)) + L_bar2 * k_in / b * (c_V**2 / rho + rho) * float(
        np.sum(steps**3)
    )


def spider_aggregate_bound(
    steps: np.ndarray,
    rc: RegimeConstants,
    L_bar2: float,
    k_in: int,
    b: int,
    Delta1: float,
) -> float:
    """
    Right-hand side Delta1 + c_h0 B^vr bounding

        sum gamma (rho/2 - c_h1 gamma lambda) E W + sum gamma (rho/2 - gamma lambda) E||H - h||^2.
    """
    B_vr = spider_bound_vr(steps, rc.L_V, L_bar2, float(rc.c_V), rc.rho, k_in, b)  # type: ignore[arg-type]
    return Delta1 + rc.c_h0 * B_vr


def spider_lhs_weights(
    steps: np.ndarray,
    rc: RegimeConstants,
    L_bar2: float,
    k_in: int,
    b: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Return the weights gamma(rho/2 - c_h1 gamma lambda) and gamma(rho/2 - gamma lambda)."""
    steps = np.asarray(steps, dtype=float)
    lam = spider_lambda(steps, rc.L_V, L_bar2, float(rc.c_V), rc.rho, k_in, b)  # type: ignore[arg-type]
    nu = steps * (rc.rho / 2.0 - rc.c_h1 * steps * lam)
    mu = steps * (rc.rho / 2.0 - steps * lam)
    return nu, mu


def spider_deltas(
    V0: float,
    V_star: float,
    L_V: float,
    L_bar2: float,
    c_V: float,
    rho: float,
    k_in: int,
    b: int,
    gamma_max: float,
) -> Tuple[float, float]:
    """Return Delta1 = V0 - V* and Delta2 = 2 L_V rho + gamma_max L_bar^2 (c_V^2 + rho^2) k_in/b."""
    return V0 - V_star, 2.0 * L_V * rho + gamma_max * L_bar2 * (c_V**2 + rho**2) * k_in / b


def spider_step_tuned(
    Delta1: float,
    Delta2: float,
    rho: float,
    T: int,
    c_h0: float,
    gamma_max: float,
) -> float:
    """Return gamma_max/2 when c_h0 = 0, else min(sqrt(2 Delta1 rho/(T Delta2)), gamma_max/2)."""
    if c_h0 == 0.0:
        return gamma_max / 2.0
    return min(math.sqrt(2.0 * Delta1 * rho / (T * Delta2)), gamma_max / 2.0)


def spider_rate_bound(
    Delta1: float,
    Delta2: float,
    rho: float,
    T: int,
    gamma: float,
    c_h0: float,
) -> float:
    """Bound 4 Delta1/(gamma T rho) + 2 gamma c_h0 Delta2/rho^2 on the averaged W plus oracle error."""
    return 4.0 * Delta1 / (gamma * T * rho) + 2.0 * gamma * c_h0 * Delta2 / rho**2


@dataclass(frozen=True)
class SpiderBudget:
    """
    Loop sizes and oracle cost of SA-SPIDER for a target precision.

    Attributes:
        k_in: Inner iterations per epoch
        b: Correction mini-batch size
        k_out: Number of epochs
        T: Total iterations k_in k_out
        calls: Component evaluations n k_out + 2 k_out k_in b
    """

    k_in: int
    b: int
    k_out: int
    T: int
    calls: int


def spider_oracle_budget(
    n: int,
    eps: float,
    c_h0: float = 0.0,
    Delta1: Optional[float] = None,
    Delta2: Optional[float] = None,
    rho: Optional[float] = None,
    gamma_max: Optional[float] = None,
    C: float = 1.0,
) -> SpiderBudget:
    """
    Loop sizes with k_in = b = ceil(sqrt(n)).

    With c_h0 = 0, k_out = ceil(C/(sqrt(n) eps)). Otherwise T is the smallest
    multiple of k_in above 8(1 + c_h0)^2 Delta1 Delta2/(rho^3 eps^2) and
    8 Delta1 rho/(Delta2 gamma_max^2), which needs Delta1, Delta2, rho and gamma_max.
    """
    if n < 1 or not eps > 0.0:
        raise ValueError(f"Need n >= 1 and eps > 0, got n={n}, eps={eps}")
    k_in = b = math.ceil(round(math.sqrt(n), 9))
    if c_h0 == 0.0:
        k_out = max(1, math.ceil(round(C / (math.sqrt(n) * eps), 9)))
    else:
        if Delta1 is None or Delta2 is None or rho is None or gamma_max is None:
            raise ValueError("c_h0 > 0 needs Delta1, Delta2, rho and gamma_max")
        T_min = max(
            8.0 * (1.0 + c_h0) ** 2 * Delta1 * Delta2 / (rho**3 * eps**2),
            8.0 * Delta1 * rho / (Delta2 * gamma_max**2),
        )
        k_out = max(1, math.ceil(round(T_min / k_in, 9)))
    calls = n * k_out + 2 * k_out * k_in * b
    logger.info(f"spider budget n:{n};eps:{eps};k_in:{k_in};k_out:{k_out};calls:{calls}")
    return SpiderBudget(k_in=k_in, b=b, k_out=k_out, T=k_in * k_out, calls=calls)


def spider_constant_config(
    cf: ComponentField,
    k_in: int,
    k_out: int,
    b: int,
    T: Optional[int] = None,
    Delta1: float = 0.0,
    replacement: bool = False,
) -> SpiderConfig:
    """Config with the tuned constant step for the field's constants."""
    rc = cf.regime_constants()
    c_V = float(rc.c_V)  # type: ignore[arg-type]
    g_max = spider_gamma_max(rc.rho, rc.L_V, cf.L_bar2, c_V, rc.c_h1, k_in, b)
    _, Delta2 = spider_deltas(0.0, 0.0, rc.L_V, cf.L_bar2, c_V, rc.rho, k_in, b, g_max)
    gamma = spider_step_tuned(Delta1, Delta2, rc.rho, T or k_in * k_out, rc.c_h0, g_max)
    return SpiderConfig(
        k_in=k_in, k_out=k_out, b=b, schedule=ConstantStep(gamma), replacement=replacement
    )
