"""Markov reward processes and the TD(0) random field with linear features."""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from ..config import IDENTITY_RTOL, MRP_UNIFORM_MIX
from ..core.models import PolynomialStep, RegimeConstants
from ..errors import DimensionMismatchError, RankDeficientError, ReducibleError, StochApproxError
from ..logger import setup_logger

logger = setup_logger(__name__)


def stationary_dist(P: np.ndarray) -> np.ndarray:
    """
    Stationary distribution of an irreducible transition matrix.

    Computed as the null space of P^T - I.

    Raises:
        ReducibleError: If P is not irreducible
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise DimensionMismatchError(f"Transition matrix must be square, got {P.shape}")
    n_components, _ = connected_components(P > 0.0, directed=True, connection="strong")
    if n_components != 1:
        raise ReducibleError(f"Transition matrix has {n_components} communicating classes")
    basis = linalg.null_space(P.T - np.eye(n))
    if basis.shape[1] != 1:
        raise ReducibleError(f"Stationary distribution is not unique (null space dim {basis.shape[1]})")
    pi = basis[:, 0]
    pi = pi / pi.sum()
    return pi


@dataclass(frozen=True, eq=False)
class Mrp:
    """
    Markov reward process (S, P, R, lambda).

    Attributes:
        P: Row-stochastic transition matrix, shape (n, n)
        R: Transition rewards with |R(s, s')| <= 1, shape (n, n)
        lam: Discount factor in (0, 1)
        pi: Stationary distribution of P
    """

    P: np.ndarray
    R: np.ndarray
    lam: float
    pi: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        P = np.asarray(self.P, dtype=float)
        R = np.asarray(self.R, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n) or R.shape != (n, n):
            raise DimensionMismatchError(f"P {P.shape} and R {R.shape} must both be (n, n)")
        if np.any(P < 0.0) or not np.allclose(P.sum(axis=1), 1.0):
            raise StochApproxError("P must be row-stochastic")
        if np.max(np.abs(R)) > 1.0:
            raise StochApproxError("Rewards must satisfy |R(s, s')| <= 1")
        if not 0.0 < self.lam < 1.0:
            raise StochApproxError(f"Discount must lie in (0, 1), got {self.lam}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "pi", stationary_dist(P))

    @property
    def n(self) -> int:
        return int(self.P.shape[0])

    @property
    def r_bar(self) -> np.ndarray:
        """Expected one-step reward R_bar(s) = sum_s' P(s, s') R(s, s')."""
        return np.sum(self.P * self.R, axis=1)


@dataclass(frozen=True, eq=False)
class Features:
    """
    Feature matrix Phi with one row phi(s) per state.

    Attributes:
        Phi: Shape (n, d), every row norm at most 1
    """

    Phi: np.ndarray

    def __post_init__(self) -> None:
        Phi = np.atleast_2d(np.asarray(self.Phi, dtype=float))
        if Phi.ndim != 2:
            raise DimensionMismatchError(f"Phi must be a matrix, got shape {Phi.shape}")
        if np.max(np.linalg.norm(Phi, axis=1)) > 1.0 + 1e-12:
            raise StochApproxError("Feature rows must have norm at most 1")
        object.__setattr__(self, "Phi", Phi)

    @property
    def d(self) -> int:
        return int(self.Phi.shape[1])

    @property
    def full_rank(self) -> bool:
        return bool(np.linalg.matrix_rank(self.Phi) == self.d)


def dpi_norm2(mrp: Mrp, x: np.ndarray) -> float:
    """Return ||x||^2_{D_pi} = sum_s pi(s) x(s)^2."""
    return float(np.sum(mrp.pi * x**2))


def _check_compatible(mrp: Mrp, features: Features) -> None:
    if features.Phi.shape[0] != mrp.n:
        raise DimensionMismatchError(
            f"Phi has {features.Phi.shape[0]} rows, MRP has {mrp.n} states"
        )


def feature_covariance(mrp: Mrp, features: Features) -> np.ndarray:
    """Return Sigma_pi = Phi^T D_pi Phi."""
    _check_compatible(mrp, features)
    return features.Phi.T @ (mrp.pi[:, None] * features.Phi)


def v_min(mrp: Mrp, features: Features) -> float:
    """Smallest eigenvalue of the feature covariance."""
    return float(np.linalg.eigvalsh(feature_covariance(mrp, features))[0])


def bellman_apply(mrp: Mrp, V: np.ndarray) -> np.ndarray:
    """Return (T V)(s) = R_bar(s) + lambda sum_s' P(s, s') V(s')."""
    return mrp.r_bar + mrp.lam * mrp.P @ V


def value_function(mrp: Mrp) -> np.ndarray:
    """Exact value function V* = (I - lambda P)^{-1} R_bar."""
    return np.linalg.solve(np.eye(mrp.n) - mrp.lam * mrp.P, mrp.r_bar)


def td_linear_system(mrp: Mrp, features: Features) -> Tuple[np.ndarray, np.ndarray]:
    """Return (A, b) with h(w) = A w + b, A = Phi^T D (lambda P - I) Phi, b = Phi^T D R_bar."""
    _check_compatible(mrp, features)
    Phi = features.Phi
    D_Phi = mrp.pi[:, None] * Phi
    A = D_Phi.T @ (mrp.lam * mrp.P @ Phi - Phi)
    b = D_Phi.T @ mrp.r_bar
    return A, b


def td0_field(
    mrp: Mrp,
    features: Features,
    w: np.ndarray,
    transition: Tuple[int, int],
) -> np.ndarray:
    """Return (R(s, s') + lambda phi(s')^T w - phi(s)^T w) phi(s)."""
    s, s_next = transition
    phi = features.Phi[s]
    delta = mrp.R[s, s_next] + mrp.lam * features.Phi[s_next] @ w - phi @ w
    return delta * phi


def td_mean_field(mrp: Mrp, features: Features, w: np.ndarray) -> np.ndarray:
    """Return Phi^T D_pi (T Phi w - Phi w)."""
    _check_compatible(mrp, features)
    if w.shape != (features.d,):
        raise DimensionMismatchError(f"w has shape {w.shape}, expected ({features.d},)")
    Phi = features.Phi
    V = Phi @ w
    return Phi.T @ (mrp.pi * (bellman_apply(mrp, V) - V))


def solve_fixed_point(mrp: Mrp, features: Features) -> np.ndarray:
    """
    Solve the projected Bellman equation Phi^T D (lambda P - I) Phi w = -Phi^T D R_bar.

    Raises:
        RankDeficientError: If Phi does not have full column rank
    """
    if not features.full_rank:
        raise RankDeficientError(f"Feature matrix has rank below d={features.d}")
    A, b = td_linear_system(mrp, features)
    return np.linalg.solve(A, -b)


def td_regime_constants(mrp: Mrp, features: Features, variant: str = "standard") -> RegimeConstants:
    """
    Constant bundle of TD(0).

    variant "standard": V = |w - w*|^2/2, W = ||Phi(w - w*)||^2_D, rho = 1 - lambda.
    variant "vw": V = W = |w - w*|^2/2, rho = 2 sqrt(v_min)(1 - lambda), c_h1 = 2(1 + lambda)^2.
    """
    lam = mrp.lam
    vm = v_min(mrp, features)
    if vm <= 0.0:
        raise RankDeficientError("Feature covariance is singular")
    sigma2_0 = 6.0 * (1.0 + (lam**2 + 1.0) * dpi_norm2(mrp, value_function(mrp)))
    sigma2_1 = 2.0 * (1.0 + lam) ** 2
    if variant == "standard":
        return RegimeConstants(
            c_h0=0.0, c_h1=(1.0 + lam) ** 2, tau0=0.0, tau1=0.0,
            sigma2_0=sigma2_0, sigma2_1=sigma2_1, L_V=1.0, rho=1.0 - lam,
            c_V=1.0 / math.sqrt(vm), V_star=0.0,
            pair="V=|w-w*|^2/2,W=|Phi(w-w*)|_D^2",
        )
    if variant == "vw":
        return RegimeConstants(
            c_h0=0.0, c_h1=2.0 * (1.0 + lam) ** 2, tau0=0.0, tau1=0.0,
            sigma2_0=sigma2_0, sigma2_1=sigma2_1, L_V=1.0,
            rho=2.0 * math.sqrt(vm) * (1.0 - lam), c_V=math.sqrt(2.0), V_star=0.0,
            pair="V=W=|w-w*|^2/2",
        )
    raise ValueError(f"Unsupported variant: {variant}. Supported variants: standard, vw")


def td_constants(mrp: Mrp, features: Features) -> RegimeConstants:
    """Standard TD(0) constant bundle."""
    return td_regime_constants(mrp, features, "standard")


def td_robust_step(V_bar: float, V_star_norm2: float, lam: float, T: int) -> float:
    """Constant step min(sqrt(2 V_bar/(6(1 + 2||V*||^2) T)), (1 - lambda)/(3(1 + lambda)^2))."""
    cap = (1.0 - lam) / (3.0 * (1.0 + lam) ** 2)
    tuned = math.sqrt(2.0 * V_bar / (6.0 * (1.0 + 2.0 * V_star_norm2) * T))
    return min(tuned, cap) if tuned > 0.0 else cap


def td_robust_bound(V_bar: float, V_star_norm2: float, lam: float, T: int) -> float:
    """Bound on the averaged-iterate error under the robust constant step."""
    first = 2.0 * math.sqrt(12.0 * V_bar * (1.0 + 2.0 * V_star_norm2)) / (math.sqrt(T) * (1.0 - lam))
    second = 12.0 * V_bar * (1.0 + lam) ** 2 / (T * (1.0 - lam) ** 2)
    return max(first, second)


def td_fast_schedule(vmin: float, lam: float, gamma_tilde: Optional[float] = None) -> PolynomialStep:
    """
    Diminishing step gamma_tilde/(k + 1 + T0) for the O(1/T) last-iterate rate.

    gamma_tilde defaults to 4/(sqrt(v_min)(1 - lambda)); T0 is the smallest
    integer with T0 >= 2 gamma_tilde (1 + lambda)^2/(sqrt(v_min)(1 - lambda)).
    """
    scale = math.sqrt(vmin) * (1.0 - lam)
    g = 4.0 / scale if gamma_tilde is None else gamma_tilde
    if g <= 3.0 / scale:
        raise StochApproxError(f"gamma_tilde={g} must exceed 3/(sqrt(v_min)(1 - lambda))={3.0 / scale}")
    T0 = math.ceil(round(2.0 * g * (1.0 + lam) ** 2 / scale, 9))
    return PolynomialStep(gamma_tilde=g, T0=T0, beta=1.0)


def td_fast_bound(
    vmin: float,
    lam: float,
    V_star_norm2: float,
    e0: float,
    schedule: PolynomialStep,
    T: np.ndarray,
) -> np.ndarray:
    """Bound on E||w_T - w*||^2 at the horizons T for the diminishing schedule."""
    T = np.asarray(T, dtype=float)
    scale = math.sqrt(vmin) * (1.0 - lam)
    g, T0 = schedule.gamma_tilde, schedule.T0
    return (T0 / (T + T0)) ** (g * scale) * e0 + 12.0 * g / ((T + T0) * scale) * (
        1.0 + (lam**2 + 1.0) * V_star_norm2
    )


@dataclass(frozen=True, eq=False)
class TdField:
    """
    TD(0) oracle with transitions drawn i.i.d. from the stationary distribution.

    Attributes:
        mrp: Markov reward process
        features: Linear features
        variant: Lyapunov pair, "standard" or "vw"
    """

    mrp: Mrp
    features: Features
    variant: str = "standard"
    w_star: np.ndarray = field(init=False)
    _A: np.ndarray = field(init=False, repr=False)
    _b: np.ndarray = field(init=False, repr=False)
    _cum_pi: np.ndarray = field(init=False, repr=False)
    _cum_P: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.variant not in ("standard", "vw"):
            raise ValueError(f"Unsupported variant: {self.variant}. Supported variants: standard, vw")
        A, b = td_linear_system(self.mrp, self.features)
        object.__setattr__(self, "w_star", solve_fixed_point(self.mrp, self.features))
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_cum_pi", np.cumsum(self.mrp.pi))
        object.__setattr__(self, "_cum_P", np.cumsum(self.mrp.P, axis=1))

    @property
    def dim(self) -> int:
        return self.features.d

    def sample_transition(self, rng: np.random.Generator) -> Tuple[int, int]:
        """Draw s ~ pi and s' ~ P(s, .)."""
        u = rng.random(2)
        last = self.mrp.n - 1
        s = min(int(np.searchsorted(self._cum_pi, u[0], side="right")), last)
        s_next = min(int(np.searchsorted(self._cum_P[s], u[1], side="right")), last)
        return s, s_next

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return td0_field(self.mrp, self.features, w, self.sample_transition(rng))

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self._A @ w + self._b

    def lyapunov_V(self, w: np.ndarray) -> float:
        e = w - self.w_star
        return 0.5 * float(e @ e)

    def lyapunov_W(self, w: np.ndarray) -> float:
        if self.variant == "vw":
            return self.lyapunov_V(w)
        return dpi_norm2(self.mrp, self.features.Phi @ (w - self.w_star))

    def regime_constants(self) -> RegimeConstants:
        return td_regime_constants(self.mrp, self.features, self.variant)


def random_mrp(n: int, lam: float, seed: int, reward_scale: float = 1.0) -> Mrp:
    """
    Random irreducible MRP.

    Rows of P are Dirichlet(1) draws mixed with the uniform distribution at
    weight MRP_UNIFORM_MIX; rewards are uniform in [-reward_scale, reward_scale].
    """
    if n < 1:
        raise StochApproxError(f"Need at least one state, got {n}")
    if not 0.0 < reward_scale <= 1.0:
        raise StochApproxError(f"reward_scale must lie in (0, 1], got {reward_scale}")
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n), size=n)
    P = (1.0 - MRP_UNIFORM_MIX) * P + MRP_UNIFORM_MIX / n
    P = P / P.sum(axis=1, keepdims=True)
    R = rng.uniform(-reward_scale, reward_scale, size=(n, n))
    logger.info(f"random mrp n:{n};lambda:{lam};seed:{seed}")
    return Mrp(P=P, R=R, lam=lam)


def random_features(n: int, d: int, seed: int, max_tries: int = 100) -> Features:
    """
    Random Gaussian features scaled so the largest row norm is 1.

    Raises:
        RankDeficientError: If no full-rank draw is found
    """
    if d > n:
        raise RankDeficientError(f"Cannot have rank d={d} with n={n} states")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        Phi = rng.standard_normal((n, d))
        Phi = Phi / np.max(np.linalg.norm(Phi, axis=1))
        _, r = np.linalg.qr(Phi)
        if np.min(np.abs(np.diag(r))) > IDENTITY_RTOL:
            return Features(Phi=Phi)
    raise RankDeficientError(f"No full-rank feature draw in {max_tries} tries")
