"""Theoretical bound curves and their comparison with simulated trajectories."""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import SE_MULTIPLIER, SUPPORTED_BOUNDS
from ..core.models import DerivedConstants, PolynomialStep, RegimeConstants, TrajectoryLog, is_unbounded
from ..core.schedules import fast_rate_lambdas, fast_rate_offsets
from ..core.spider import spider_lhs_weights, spider_rate_bound
from ..errors import DimensionMismatchError, InvalidScheduleError, MissingIteratesError
from ..logger import setup_logger
from ..problems.base import FieldOracle
from ..problems.em import EmConstants
from ..problems.sgd import gauss_southwell_bound, low_precision_bound, strongly_convex_last_iterate_bound
from ..problems.td import td_fast_bound

logger = setup_logger(__name__)

# Statistic of a trajectory that each curve bounds:
#   last             W(w_k)
#   average          weighted prefix mean of W(w_0..w_k)
#   averaged_iterate W of the prefix mean of w_0..w_k
BOUND_STATISTICS: Dict[str, str] = {
    "random_stop": "average",
    "constant_step": "average",
    "horizon_tuned": "average",
    "fast_recursion": "last",
    "fast_rate": "last",
    "td_robust": "averaged_iterate",
    "td_fast": "last",
    "spider": "average",
    "spider_rate": "average",
    "em_minibatch": "average",
    "gauss_southwell": "average",
    "low_precision": "average",
    "sc_sgd": "last",
    "none": "last",
}


def _horizons(steps: np.ndarray) -> np.ndarray:
    return np.arange(1, steps.size + 1, dtype=float)


def _constant_gamma(steps: np.ndarray, name: str) -> float:
    if steps.size and not np.all(steps == steps[0]):
        raise InvalidScheduleError(f"Bound '{name}' needs a constant step")
    return float(steps[0])


def _random_stop(steps: np.ndarray, *, dc: DerivedConstants) -> np.ndarray:
    """[2 V_bar + L_V eta0 sum gamma^2 + 2 b0 sum gamma] / sum gamma omega over each prefix."""
    omegas = 2.0 * dc.rho_margin - steps * dc.L_V * dc.eta1
    numerator = 2.0 * dc.V_bar + dc.L_V * dc.eta0 * np.cumsum(steps**2) + 2.0 * dc.b0 * np.cumsum(steps)
    denominator = np.cumsum(steps * omegas)
    return np.where(denominator > 0.0, numerator / np.where(denominator > 0.0, denominator, 1.0), np.inf)


def _constant_step(steps: np.ndarray, *, dc: DerivedConstants) -> np.ndarray:
    """B + (2 V_bar + L_V eta0 k gamma^2)/(gamma k (rho - b1)), valid for gamma <= gamma_max/2."""
    gamma = _constant_gamma(steps, "constant_step")
    if not is_unbounded(dc.gamma_max):
        cap = float(dc.gamma_max) / 2.0  # type: ignore[arg-type]
        if gamma > cap * (1.0 + 1e-12):
            raise InvalidScheduleError(f"Step {gamma} exceeds gamma_max/2={cap}")
    if gamma <= 0.0:
        return np.full(steps.size, np.inf)
    k = _horizons(steps)
    return dc.B + (2.0 * dc.V_bar + dc.L_V * dc.eta0 * k * gamma**2) / (gamma * k * dc.rho_margin)


def _horizon_tuned(steps: np.ndarray, *, dc: DerivedConstants) -> np.ndarray:
    """Bound at horizon k for a run whose step was tuned to k."""
    k = _horizons(steps)
    first = 2.0 * np.sqrt(2.0 * dc.V_bar * dc.eta0 * dc.L_V) / (np.sqrt(k) * dc.rho_margin)
    if is_unbounded(dc.gamma_max):
        second = np.zeros_like(k)
    else:
        second = 8.0 * dc.V_bar / (float(dc.gamma_max) * k * dc.rho_margin)  # type: ignore[arg-type]
    return dc.B + np.maximum(first, second)


def _fast_recursion(steps: np.ndarray, *, dc: DerivedConstants, W0: float) -> np.ndarray:
    """u_0 = W0, u_k = lambda_k u_{k-1} + b_k; entry k bounds E W(w_k)."""
    lambdas = fast_rate_lambdas(dc, steps)
    offsets = fast_rate_offsets(dc, steps)
    out = np.empty(steps.size)
    u = W0
    for k in range(steps.size):
        out[k] = u
        u = lambdas[k] * u + offsets[k]
    return out


def _fast_rate(steps: np.ndarray, *, dc: DerivedConstants, schedule: PolynomialStep, W0: float) -> np.ndarray:
    """B + (T0/(k + T0))^(gamma_tilde (rho - b1)/2) W0 + 2 L_V eta0 gamma_tilde/((k + T0)(rho - b1))."""
    if schedule.beta != 1.0:
        raise InvalidScheduleError(f"Fast-rate bound needs beta = 1, got {schedule.beta}")
    k = np.arange(steps.size, dtype=float)
    g, T0 = schedule.gamma_tilde, float(schedule.T0)
    decay = (T0 / (k + T0)) ** (g * dc.rho_margin / 2.0) * W0
    noise = 2.0 * dc.L_V * dc.eta0 * g / ((k + T0) * dc.rho_margin)
    return dc.B + decay + noise


def _td_fast(
    steps: np.ndarray,
    *,
    vmin: float,
    lam: float,
    V_star_norm2: float,
    e0: float,
    schedule: PolynomialStep,
) -> np.ndarray:
    """Half the squared-distance bound, matching W = |w - w*|^2/2."""
    k = np.arange(steps.size, dtype=float)
    return td_fast_bound(vmin, lam, V_star_norm2, e0, schedule, k) / 2.0


def _spider(
    steps: np.ndarray,
    *,
    rc: RegimeConstants,
    L_bar2: float,
    k_in: int,
    b: int,
    Delta1: float,
) -> np.ndarray:
    """(Delta1 + c_h0 B^vr) over the prefix weight sum of W."""
    nu, _ = spider_lhs_weights(steps, rc, L_bar2, k_in, b)
    c_V = float(rc.c_V)  # type: ignore[arg-type]
    lam = rc.L_V * steps**2 + L_bar2 * k_in / b * (c_V**2 / rc.rho + rc.rho) * steps**3
    b_vr = np.cumsum(lam)
    denominator = np.cumsum(nu)
    numerator = Delta1 + rc.c_h0 * b_vr
    return np.where(denominator > 0.0, numerator / np.where(denominator > 0.0, denominator, 1.0), np.inf)


def _spider_rate(
    steps: np.ndarray,
    *,
    Delta1: float,
    Delta2: float,
    rho: float,
    c_h0: float,
) -> np.ndarray:
    gamma = _constant_gamma(steps, "spider_rate")
    return np.array(
        [spider_rate_bound(Delta1, Delta2, rho, k, gamma, c_h0) for k in range(1, steps.size + 1)]
    )


def _em_minibatch(steps: np.ndarray, *, constants: EmConstants, b: int) -> np.ndarray:
    c = constants
    margin = 2.0 * c.v_min - steps * c.L_V * (1.0 + c.sigma_bar2_1 / b)
    if np.any(margin <= 0.0):
        raise InvalidScheduleError(f"Steps too large for the mini-batch EM bound (max {steps.max()})")
    numerator = 2.0 * c.V_bar + c.L_V * c.sigma_bar2_0 * np.cumsum(steps**2) / b
    return numerator / np.cumsum(steps * margin)


def _gauss_southwell(steps: np.ndarray, *, d: int, L: float, F0: float, F_star: float) -> np.ndarray:
    return np.array([gauss_southwell_bound(d, L, F0, F_star, k) for k in range(1, steps.size + 1)])


def _low_precision(
    steps: np.ndarray,
    *,
    d: int,
    Delta: float,
    L: float,
    M2_over_n: float,
    F_gap: float,
) -> np.ndarray:
    gamma_bar = _constant_gamma(steps, "low_precision")
    return np.array(
        [
            low_precision_bound(d, Delta, L, M2_over_n, gamma_bar, F_gap, k)
            for k in range(1, steps.size + 1)
        ]
    )


def _sc_sgd(steps: np.ndarray, *, mu: float, L: float, M2_over_n: float, e0: float) -> np.ndarray:
    """Half the squared-distance bound shifted so entry k refers to w_k."""
    bound = strongly_convex_last_iterate_bound(mu, L, M2_over_n, steps, e0)
    return np.concatenate(([e0], bound[:-1])) / 2.0


def _none(steps: np.ndarray) -> np.ndarray:
    return np.full(steps.size, np.inf)


_CURVES: Dict[str, Callable[..., np.ndarray]] = {
    "random_stop": _random_stop,
    "constant_step": _constant_step,
    "horizon_tuned": _horizon_tuned,
    "fast_recursion": _fast_recursion,
    "fast_rate": _fast_rate,
    "td_robust": _random_stop,
    "td_fast": _td_fast,
    "spider": _spider,
    "spider_rate": _spider_rate,
    "em_minibatch": _em_minibatch,
    "gauss_southwell": _gauss_southwell,
    "low_precision": _low_precision,
    "sc_sgd": _sc_sgd,
    "none": _none,
}


def bound_curve(name: str, steps: np.ndarray, **params: Any) -> np.ndarray:
    """
    Evaluate a bound at every horizon of a run with the given steps.

    Entry k refers to the statistic BOUND_STATISTICS[name] over records 0..k.
    Horizons where a step product vanishes are flagged with +inf.

    Args:
        name: Bound key (see config.SUPPORTED_BOUNDS)
        steps: Steps (gamma_1, ..., gamma_T) of the run
        **params: Constants the bound needs (dc, W0, schedule, ...)

    Returns:
        Array of length T

    Raises:
        ValueError: If the bound is not supported
        InvalidScheduleError: If the steps violate the bound's hypotheses
    """
    if name not in SUPPORTED_BOUNDS:
        supported = ", ".join(SUPPORTED_BOUNDS)
        raise ValueError(f"Unsupported bound: {name}. Supported bounds: {supported}")
    steps = np.asarray(steps, dtype=float)
    if steps.ndim != 1 or steps.size == 0:
        raise InvalidScheduleError(f"Steps must be a non-empty vector, got shape {steps.shape}")

    with np.errstate(divide="ignore", invalid="ignore"):
        curve = np.asarray(_CURVES[name](steps, **params), dtype=float)
    curve = np.where(np.isnan(curve), np.inf, curve)
    flagged = int(np.count_nonzero(np.isinf(curve)))
    if flagged and name != "none":
        logger.warning(f"bound flagged name:{name};infinite_entries:{flagged}")
    return curve


def summation_identity(steps: np.ndarray, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Both sides of sum_j gamma_j prod_{l>j}(1 - gamma_l a) = (1 - prod_l (1 - gamma_l a))/a.

    Entry k of each side uses the first k + 1 steps; the left side is summed
    term by term.
    """
    if a == 0.0:
        raise ValueError("Summation identity needs a != 0")
    steps = np.asarray(steps, dtype=float)
    factors = 1.0 - steps * a
    lhs = np.empty(steps.size)
    for k in range(steps.size):
        tail = np.cumprod(factors[1 : k + 1][::-1])[::-1]
        lhs[k] = float(steps[:k] @ tail) + steps[k]
    rhs = (1.0 - np.cumprod(factors)) / a
    return lhs, rhs


@dataclass(frozen=True, eq=False)
class Aggregate:
    """
    Per-horizon statistics across replicates.

    Attributes:
        k: Horizon index
        mean: Mean over replicates of the bounded statistic
        se: Standard error of the mean (zero for one replicate)
        bound: Bound curve aligned with k
        statistic: Statistic that was aggregated
    """

    k: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    statistic: str

    def rows(self) -> List[Dict[str, float]]:
        """Return aggregate rows keyed by the CSV columns."""
        return [
            {"k": int(k), "mean_W": float(m), "se_W": float(s), "bound": float(b)}
            for k, m, s, b in zip(self.k, self.mean, self.se, self.bound)
        ]


def _prefix_mean(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    total = np.cumsum(weights)
    return np.cumsum(values * weights) / np.where(total > 0.0, total, 1.0)


def _statistic(
    log: TrajectoryLog,
    statistic: str,
    weights: Optional[np.ndarray],
    field: Optional[FieldOracle],
) -> np.ndarray:
    W = log.column("W")
    if statistic == "last":
        return W
    if statistic == "average":
        return _prefix_mean(W, log.column("gamma") if weights is None else weights)
    if statistic == "averaged_iterate":
        if log.iterates is None or field is None:
            raise MissingIteratesError("Averaged-iterate statistic needs stored iterates and the field")
        counts = np.arange(1, log.iterates.shape[0] + 1, dtype=float)[:, None]
        averages = np.cumsum(log.iterates, axis=0) / counts
        return np.array([field.lyapunov_W(w) for w in averages])
    raise ValueError(f"Unsupported statistic: {statistic}. Supported statistics: last, average, averaged_iterate")


def aggregate(
    logs: Sequence[TrajectoryLog],
    bound: np.ndarray,
    statistic: str = "last",
    weights: Optional[np.ndarray] = None,
    field: Optional[FieldOracle] = None,
) -> Aggregate:
    """
    Mean and standard error across replicates of a trajectory statistic.

    Args:
        logs: Replicate logs of equal length
        bound: Bound curve of the same length
        statistic: "last", "average" (prefix mean weighted by weights, gamma by
            default) or "averaged_iterate" (needs stored iterates and the field)
        weights: Prefix-mean weights for the "average" statistic
        field: Oracle evaluating W at averaged iterates

    Raises:
        DimensionMismatchError: If the logs or the bound differ in length
    """
    if not logs:
        raise MissingIteratesError("No replicate logs to aggregate")
    T = len(logs[0].records)
    bound = np.asarray(bound, dtype=float)
    if any(len(log.records) != T for log in logs) or bound.shape != (T,):
        raise DimensionMismatchError(f"Logs and bound must share length {T}")

    values = np.vstack([_statistic(log, statistic, weights, field) for log in logs])
    mean = values.mean(axis=0)
    if values.shape[0] > 1:
        se = values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])
    else:
        se = np.zeros(T)
    return Aggregate(k=np.arange(T), mean=mean, se=se, bound=bound, statistic=statistic)


@dataclass(frozen=True)
class CurveCheck:
    """
    Outcome of a pointwise mean <= bound + multiplier * SE check.

    Attributes:
        passed: True when no horizon after burn-in violates the bound
        violations: Number of violating horizons
        first_violation: First violating horizon, if any
        worst_excess: Largest mean - bound - multiplier * SE (negative when passing)
    """

    passed: bool
    violations: int
    first_violation: Optional[int]
    worst_excess: float


def check_curve(
    mean: np.ndarray,
    se: np.ndarray,
    bound: np.ndarray,
    burn_in: int = 0,
    multiplier: float = SE_MULTIPLIER,
) -> CurveCheck:
    """Check mean <= bound + multiplier * SE at every finite bound from burn_in onward."""
    mean = np.asarray(mean, dtype=float)[burn_in:]
    se = np.asarray(se, dtype=float)[burn_in:]
    bound = np.asarray(bound, dtype=float)[burn_in:]
    active = np.isfinite(bound)
    excess = np.where(active, mean - bound - multiplier * se, -np.inf)
    bad = np.nonzero(excess > 0.0)[0]
    worst = float(excess.max()) if excess.size else float("-inf")
    first = int(bad[0]) + burn_in if bad.size else None
    result = CurveCheck(passed=not bad.size, violations=int(bad.size), first_violation=first, worst_excess=worst)
    logger.info(
        f"curve check passed:{result.passed};violations:{result.violations};worst_excess:{worst}"
    )
    return result


def statistic_weights(name: str, steps: np.ndarray, **params: Any) -> Optional[np.ndarray]:
    """
    Prefix-mean weights matching an "average" bound, or None for gamma weights.

    random_stop weighs W(w_k) by gamma omega, em_minibatch by
    gamma (2 v_min - gamma L_V (1 + sigma_bar2_1/b)) and spider by
    gamma (rho/2 - c_h1 gamma lambda).
    """
    steps = np.asarray(steps, dtype=float)
    if name == "random_stop":
        dc: DerivedConstants = params["dc"]
        return steps * (2.0 * dc.rho_margin - steps * dc.L_V * dc.eta1)
    if name == "em_minibatch":
        c: EmConstants = params["constants"]
        b: int = params["b"]
        return steps * (2.0 * c.v_min - steps * c.L_V * (1.0 + c.sigma_bar2_1 / b))
    if name == "spider":
        nu, _ = spider_lhs_weights(steps, params["rc"], params["L_bar2"], params["k_in"], params["b"])
        return nu
    return None
