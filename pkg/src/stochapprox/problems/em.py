"""Stochastic EM in sufficient-statistics space for finite-latent exponential families."""

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multinomial

from ..config import SAEM_IS_KAPPA, SUPPORTED_EM_ALGOS, SUPPORTED_EM_PROPOSALS
from ..core.models import RegimeConstants
from ..errors import (
    BatchTooLargeError,
    DegeneratePosteriorError,
    DimensionMismatchError,
    EmptyProblemError,
    EpsilonOutOfRangeError,
    HypothesisViolatedError,
    InvalidScheduleError,
    RegimeUnavailableError,
    ZeroWeightSumError,
)
from ..logger import setup_logger
from .sgd import MinibatchSpec, sample_batch

logger = setup_logger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


class ExpFamilyModel(Protocol):
    """
    Curved exponential family with a finite latent space.

    The joint log-density of observation i with label z is
    base_log[i, z] + <S_i(z), phi(theta)> - psi(theta).
    """

    @property
    def n(self) -> int:
        """Number of observations."""
        ...

    @property
    def K(self) -> int:
        """Cardinality of the latent space."""
        ...

    @property
    def d(self) -> int:
        """Dimension of the sufficient statistic."""
        ...

    @property
    def stats(self) -> np.ndarray:
        """Sufficient statistics S_i(z), shape (n, K, d)."""
        ...

    @property
    def base_log(self) -> np.ndarray:
        """Parameter-free part of the joint log-density, shape (n, K)."""
        ...

    @property
    def weights(self) -> np.ndarray:
        """Prior label probabilities, used as the default proposal."""
        ...

    def phi(self, theta: np.ndarray) -> np.ndarray:
        ...

    def phi_jacobian(self, theta: np.ndarray) -> np.ndarray:
        """Return d phi/d theta, shape (d, p)."""
        ...

    def psi(self, theta: np.ndarray) -> float:
        ...

    def psi_grad(self, theta: np.ndarray) -> np.ndarray:
        ...

    def t_map(self, s: np.ndarray) -> np.ndarray:
        """Return argmin_theta psi(theta) - <s, phi(theta)>."""
        ...

    def t_jacobian(self, s: np.ndarray) -> np.ndarray:
        """Return d T/d s, shape (p, d)."""
        ...


@dataclass(frozen=True, eq=False)
class GmmInstance:
    """
    One-dimensional Gaussian mixture with unit variances, known weights and unknown means.

    The statistic of observation i with label k is (e_k, y_i e_k), so the
    s-space has dimension 2K: responsibility masses first, then the
    responsibility-weighted sums of the observations.

    Attributes:
        y: Observations, shape (n,)
        weights: Mixture weights, shape (K,), strictly positive
        stats: Sufficient statistics, shape (n, K, 2K)
        base_log: log weights_k - y_i^2/2 - log(2 pi)/2, shape (n, K)
    """

    y: np.ndarray
    weights: np.ndarray
    stats: np.ndarray = field(init=False, repr=False)
    base_log: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if y.size == 0 or weights.size == 0:
            raise EmptyProblemError(f"Mixture needs data and K >= 1, got n={y.size}, K={weights.size}")
        if np.any(weights <= 0.0) or not math.isclose(float(weights.sum()), 1.0, rel_tol=1e-9):
            raise ValueError(f"Mixture weights must be positive and sum to 1, got {weights}")
        K = weights.size
        eye = np.eye(K)
        stats = np.concatenate(
            [np.broadcast_to(eye, (y.size, K, K)), y[:, None, None] * eye[None, :, :]],
            axis=2,
        )
        base_log = np.log(weights)[None, :] - 0.5 * y[:, None] ** 2 - 0.5 * _LOG_2PI
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "stats", stats)
        object.__setattr__(self, "base_log", base_log)

    @property
    def n(self) -> int:
        return int(self.y.size)

    @property
    def K(self) -> int:
        return int(self.weights.size)

    @property
    def d(self) -> int:
        return 2 * self.K

    def phi(self, theta: np.ndarray) -> np.ndarray:
        return np.concatenate([-0.5 * theta**2, theta])

    def phi_jacobian(self, theta: np.ndarray) -> np.ndarray:
        return np.vstack([np.diag(-theta), np.eye(self.K)])

    def psi(self, theta: np.ndarray) -> float:
        return 0.0

    def psi_grad(self, theta: np.ndarray) -> np.ndarray:
        return np.zeros(self.K)

    def _split(self, s: np.ndarray) -> tuple:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.d,):
            raise DimensionMismatchError(f"Statistic has shape {s.shape}, expected ({self.d},)")
        mass, moment = s[: self.K], s[self.K :]
        if not np.all(np.isfinite(s)):
            raise DegeneratePosteriorError(f"Statistic has non-finite entries: {s}")
        if np.any(mass <= 0.0):
            raise DegeneratePosteriorError(f"Statistic has no mass on some component: {mass}")
        return mass, moment

    def t_map(self, s: np.ndarray) -> np.ndarray:
        mass, moment = self._split(s)
        return moment / mass

    def t_jacobian(self, s: np.ndarray) -> np.ndarray:
        mass, moment = self._split(s)
        return np.hstack([np.diag(-moment / mass**2), np.diag(1.0 / mass)])


def make_gmm(
    n: int,
    true_means: np.ndarray,
    weights: Optional[np.ndarray] = None,
    seed: int = 0,
) -> GmmInstance:
    """
    Draw n observations from a unit-variance Gaussian mixture.

    Args:
        n: Number of observations
        true_means: Component means used to generate the data
        weights: Mixture weights (uniform when omitted)
        seed: Generator seed

    Returns:
        GmmInstance holding the data and the weights
    """
    means = np.asarray(true_means, dtype=float).ravel()
    K = means.size
    if n < 1 or K < 1:
        raise EmptyProblemError(f"Need n >= 1 and K >= 1, got n={n}, K={K}")
    alpha = np.full(K, 1.0 / K) if weights is None else np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    labels = rng.choice(K, size=n, p=alpha)
    y = means[labels] + rng.standard_normal(n)
    logger.info(f"gaussian mixture n:{n};K:{K};seed:{seed}")
    return GmmInstance(y=y, weights=alpha)


def log_joint(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    """Return log p_i(z; theta) for every observation and label, shape (n, K)."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DegeneratePosteriorError(f"Parameter has non-finite entries: {theta}")
    return model.base_log + model.stats @ model.phi(theta) - model.psi(theta)


def log_posterior(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    lj = log_joint(model, theta)
    return lj - logsumexp(lj, axis=1, keepdims=True)


def posterior(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    """Return the label posteriors pi_i(. ; theta), rows summing to one."""
    return np.exp(log_posterior(model, theta))


def proposal(model: ExpFamilyModel, theta: np.ndarray, kind: str = "prior") -> np.ndarray:
    """Return the importance-sampling proposal per observation, shape (n, K)."""
    if kind == "prior":
        return np.broadcast_to(model.weights, (model.n, model.K)).copy()
    if kind == "posterior":
        return posterior(model, theta)
    supported = ", ".join(SUPPORTED_EM_PROPOSALS)
    raise ValueError(f"Unsupported proposal: {kind}. Supported proposals: {supported}")


def observation_sbar(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    """Return the conditional expectations sbar_i(theta), shape (n, d)."""
    return np.einsum("ik,ikd->id", posterior(model, theta), model.stats)


def sbar(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    """Return sbar(theta) = (1/n) sum_i E[S_i(Z) | y_i; theta]."""
    return observation_sbar(model, theta).mean(axis=0)


def t_map(model: ExpFamilyModel, s: np.ndarray) -> np.ndarray:
    """Closed-form M-step."""
    return model.t_map(s)


def em_mean_field(model: ExpFamilyModel, w: np.ndarray) -> np.ndarray:
    """Return h(w) = sbar(T(w)) - w."""
    return sbar(model, t_map(model, w)) - w


def em_iterate(model: ExpFamilyModel, theta0: np.ndarray, iters: int) -> np.ndarray:
    """
    Deterministic EM trajectory theta_{k+1} = T(sbar(theta_k)).

    Returns:
        Array of shape (iters + 1, p) starting with theta0
    """
    thetas = [np.asarray(theta0, dtype=float)]
    for _ in range(iters):
        thetas.append(t_map(model, sbar(model, thetas[-1])))
    return np.array(thetas)


def em_fixed_point(
    model: ExpFamilyModel,
    theta0: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Iterate EM from theta0 until successive parameters differ by at most tol."""
    theta = np.asarray(theta0, dtype=float)
    for _ in range(max_iter):
        nxt = t_map(model, sbar(model, theta))
        if np.max(np.abs(nxt - theta)) <= tol:
            return nxt
        theta = nxt
    logger.warning(f"em fixed point not reached max_iter:{max_iter};tol:{tol}")
    return theta


def objective(model: ExpFamilyModel, theta: np.ndarray) -> float:
    """Return the normalized negative log-likelihood F(theta)."""
    return -float(np.mean(logsumexp(log_joint(model, theta), axis=1)))


def objective_grad(model: ExpFamilyModel, theta: np.ndarray) -> np.ndarray:
    """Return grad F(theta) = grad psi(theta) - (d phi/d theta)^T sbar(theta)."""
    theta = np.asarray(theta, dtype=float)
    return model.psi_grad(theta) - model.phi_jacobian(theta).T @ sbar(model, theta)


def lyapunov_V(model: ExpFamilyModel, w: np.ndarray) -> float:
    """Return V(w) = F(T(w))."""
    return objective(model, t_map(model, w))


def grad_V(model: ExpFamilyModel, w: np.ndarray) -> np.ndarray:
    """Return grad V(w) by the chain rule through T."""
    return model.t_jacobian(w).T @ objective_grad(model, t_map(model, w))


def gmm_b_matrix(model: GmmInstance, w: np.ndarray) -> np.ndarray:
    """Return B(w) = (dT/ds)^T diag(mass) (dT/ds), so that grad V = -B(w) h(w)."""
    J = model.t_jacobian(w)
    return J.T @ (w[: model.K, None] * J)


def minibatch_em_field(
    model: ExpFamilyModel,
    w: np.ndarray,
    b: int,
    rng: np.random.Generator,
    replacement: bool = True,
) -> np.ndarray:
    """
    Return (1/b) sum_{i in B} sbar_i(T(w)) - w for a uniform mini-batch B.

    Raises:
        BatchTooLargeError: If b > n
    """
    if b < 1:
        raise ValueError(f"Batch size must be at least 1, got {b}")
    if b > model.n:
        raise BatchTooLargeError(f"Batch size {b} exceeds n={model.n}")
    idx = sample_batch(model.n, MinibatchSpec(b=b, replacement=replacement), rng)
    R = posterior(model, t_map(model, w))[idx]
    return np.einsum("ik,ikd->d", R, model.stats[idx]) / b - w


def _draw_labels(probs: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m labels per row of probs, shape (n, m)."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random((probs.shape[0], m))
    labels = (u[:, :, None] > cum[:, None, :]).sum(axis=2)
    return np.minimum(labels, probs.shape[1] - 1)


def _validate_m(m: int) -> None:
    if m < 1:
        raise ValueError(f"Monte Carlo size must be at least 1, got {m}")


def saem_field_exact(model: ExpFamilyModel, w: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """Return (1/n) sum_i (1/m) sum_j S_i(Z_i^j) - w with Z_i^j drawn from the posterior at T(w)."""
    _validate_m(m)
    labels = _draw_labels(posterior(model, t_map(model, w)), m, rng)
    fractions = (labels[:, :, None] == np.arange(model.K)).mean(axis=1)
    return np.einsum("ik,ikd->d", fractions, model.stats) / model.n - w


def saem_field_is(
    model: ExpFamilyModel,
    w: np.ndarray,
    m: int,
    rng: np.random.Generator,
    kind: str = "prior",
) -> np.ndarray:
    """
    Self-normalized importance-sampling SAEM oracle.

    Labels are drawn from the proposal at T(w) and weighted by
    posterior/proposal, normalized per observation.

    Raises:
        ZeroWeightSumError: If the weights of some observation cannot be normalized
    """
    _validate_m(m)
    theta = t_map(model, w)
    q = proposal(model, theta, kind)
    labels = _draw_labels(q, m, rng)
    log_ratio = log_posterior(model, theta) - np.log(q)
    lw = np.take_along_axis(log_ratio, labels, axis=1)
    normalizer = logsumexp(lw, axis=1, keepdims=True)
    if not np.all(np.isfinite(normalizer)):
        raise ZeroWeightSumError("Importance weights of an observation sum to zero")
    omega = np.exp(lw - normalizer)
    fractions = np.einsum("ij,ijk->ik", omega, labels[:, :, None] == np.arange(model.K))
    return np.einsum("ik,ikd->d", fractions, model.stats) / model.n - w


def chi_values(model: ExpFamilyModel, theta: np.ndarray, kind: str = "prior") -> np.ndarray:
    """Return chi_i(theta) = sum_z pi_i(z)^2/q_i(z) for every observation."""
    R = posterior(model, theta)
    return np.sum(R**2 / proposal(model, theta, kind), axis=1)


@dataclass(frozen=True)
class IsMoments:
    """
    Exact moments of the self-normalized IS oracle at a fixed point.

    Attributes:
        mean: E[H(w, X)] + w, the expected statistic estimate
        bias: E[H(w, X)] - h(w)
        variance: E||H(w, X) - E H(w, X)||^2
        chi_mean: (1/n) sum_i chi_i(T(w))
    """

    mean: np.ndarray
    bias: np.ndarray
    variance: float
    chi_mean: float


def _compositions(m: int, K: int) -> np.ndarray:
    """All count vectors of K non-negative integers summing to m."""
    rows = []
    for bars in itertools.combinations(range(m + K - 1), K - 1):
        edges = (-1,) + bars + (m + K - 1,)
        rows.append([edges[j + 1] - edges[j] - 1 for j in range(K)])
    return np.array(rows, dtype=int)


def saem_is_exact_moments(
    model: ExpFamilyModel,
    w: np.ndarray,
    m: int,
    kind: str = "prior",
) -> IsMoments:
    """
    Bias and variance of the SAEM-IS oracle by enumeration of the label counts.

    The estimate of observation i only depends on the multinomial counts of
    its m draws, so its law is enumerated exactly.
    """
    _validate_m(m)
    theta = t_map(model, w)
    q = proposal(model, theta, kind)
    log_ratio = log_posterior(model, theta) - np.log(q)
    counts = _compositions(m, model.K)
    with np.errstate(divide="ignore"):
        log_counts = np.log(counts)

    mean = np.zeros(model.d)
    variance = 0.0
    for i in range(model.n):
        pmf = multinomial.pmf(counts, n=m, p=q[i])
        lw = log_counts + log_ratio[i]
        p_hat = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
        first = pmf @ p_hat
        second = np.einsum("c,ck,cl->kl", pmf, p_hat, p_hat)
        S = model.stats[i]
        mean_i = first @ S
        variance += float(np.sum(second * (S @ S.T))) - float(mean_i @ mean_i)
        mean += mean_i

    mean /= model.n
    return IsMoments(
        mean=mean,
        bias=mean - sbar(model, theta),
        variance=max(variance, 0.0) / model.n**2,
        chi_mean=float(np.mean(chi_values(model, theta, kind))),
    )


def s_star(model: ExpFamilyModel) -> float:
    """Return max_i max_z ||S_i(z)||."""
    return float(np.sqrt(np.max(np.sum(model.stats**2, axis=2))))


def saem_is_bias_bound(model: ExpFamilyModel, w: np.ndarray, m: int, kind: str = "prior") -> float:
    """Bound 12 s* chi_bar(w)/m on the SAEM-IS bias norm."""
    chi = chi_values(model, t_map(model, w), kind)
    return 12.0 * s_star(model) * float(np.mean(chi)) / m


def saem_is_variance_bound(model: ExpFamilyModel, w: np.ndarray, m: int, kind: str = "prior") -> float:
    """Bound (4 s*^2/m)(1/n^2) sum_i chi_i(w) on the SAEM-IS variance."""
    chi = chi_values(model, t_map(model, w), kind)
    return 4.0 * s_star(model) ** 2 * float(np.sum(chi)) / (m * model.n**2)


@dataclass(frozen=True)
class EmConstants:
    """
    Constants of the stochastic EM assumptions for one model instance.

    Attributes:
        v_min: Drift constant, <grad V, h> <= -v_min ||h||^2
        v_max: Constant with ||grad V|| <= v_max ||h||
        L_V: Smoothness constant of V
        sigma_bar2_0: Per-observation variance constant
        sigma_bar2_1: Per-observation variance constant multiplying W
        s_star: Bound on ||S_i(z)||
        c_chi_0: Bound (1/n sum_i chi_i)^2 <= c_chi_0 + c_chi_1 W
        c_chi_1: Second chi constant
        V_bar: Initial gap V(w0) - V_star
        V_star: Estimated infimum of V
    """

    v_min: float
    v_max: float
    L_V: float
    sigma_bar2_0: float
    sigma_bar2_1: float
    s_star: float
    c_chi_0: float
    c_chi_1: float
    V_bar: float
    V_star: float

    def __post_init__(self) -> None:
        if not 0.0 < self.v_min <= self.v_max:
            raise RegimeUnavailableError(
                f"Need 0 < v_min <= v_max, got v_min={self.v_min}, v_max={self.v_max}"
            )


def estimate_em_constants(
    model: ExpFamilyModel,
    theta_center: np.ndarray,
    radius: float,
    n_points: int,
    rng: np.random.Generator,
    kind: str = "prior",
    theta0: Optional[np.ndarray] = None,
) -> EmConstants:
    """
    Estimate the EM constants over image points sbar(theta) near theta_center.

    Sampled points mix sbar(theta) with the average over a random quarter of
    the observations, which covers the region mini-batch iterates visit.
    v_min and v_max are the extreme ratios -<grad V, h>/||h||^2 and
    ||grad V||/||h||; L_V is a finite-difference probe of grad V. Since
    ||S_i(z)||^2 <= s*^2, sigma_bar2_0 = s*^2 and sigma_bar2_1 = 0. chi_i is
    at most max_z pi_i(z)/q_i(z), so c_chi_0 is 1/min(weights)^2 for the
    prior proposal and 1 for the posterior one.

    Args:
        model: Exponential-family model
        theta_center: Center of the sampled parameter box
        radius: Half-width of the sampled parameter box
        n_points: Number of sampled parameters
        rng: Random stream for the sample
        kind: IS proposal the chi constants refer to
        theta0: Initial parameter defining w0 = sbar(theta0) (defaults to theta_center)

    Returns:
        EmConstants
    """
    center = np.asarray(theta_center, dtype=float)
    thetas = center + radius * rng.uniform(-1.0, 1.0, size=(n_points, center.size))
    drift, growth, smooth, values = [], [], [], []
    batch = MinibatchSpec(b=max(1, model.n // 4), replacement=False)
    for theta in thetas:
        per_obs = observation_sbar(model, theta)
        partial = per_obs[sample_batch(model.n, batch, rng)].mean(axis=0)
        mix = rng.uniform()
        w = mix * per_obs.mean(axis=0) + (1.0 - mix) * partial
        h = em_mean_field(model, w)
        g = grad_V(model, w)
        values.append(lyapunov_V(model, w))
        nh = float(np.linalg.norm(h))
        if nh > 1e-10:
            drift.append(-float(g @ h) / nh**2)
            growth.append(float(np.linalg.norm(g)) / nh)
        step = 1e-5 * (1.0 + float(np.linalg.norm(w)))
        u = rng.standard_normal(w.size)
        u /= np.linalg.norm(u)
        smooth.append(float(np.linalg.norm(grad_V(model, w + step * u) - g)) / step)
    if not drift:
        raise RegimeUnavailableError("Every sampled point is a fixed point; widen the radius")

    start = center if theta0 is None else np.asarray(theta0, dtype=float)
    w0 = sbar(model, start)
    V_star = min(objective(model, em_fixed_point(model, start)), min(values))
    s_max = s_star(model)
    c_chi_0 = 1.0 / float(np.min(model.weights)) ** 2 if kind == "prior" else 1.0
    constants = EmConstants(
        v_min=min(drift),
        v_max=max(growth),
        L_V=max(smooth),
        sigma_bar2_0=s_max**2,
        sigma_bar2_1=0.0,
        s_star=s_max,
        c_chi_0=c_chi_0,
        c_chi_1=0.0,
        V_bar=max(lyapunov_V(model, w0) - V_star, 0.0),
        V_star=V_star,
    )
    logger.info(
        f"em constants v_min:{constants.v_min};v_max:{constants.v_max};L_V:{constants.L_V};"
        f"s_star:{s_max};V_bar:{constants.V_bar}"
    )
    return constants


def _validate_algo(algo: str) -> None:
    if algo not in SUPPORTED_EM_ALGOS:
        supported = ", ".join(SUPPORTED_EM_ALGOS)
        raise ValueError(f"Unsupported EM algorithm: {algo}. Supported EM algorithms: {supported}")


def em_regime_constants(constants: EmConstants, algo: str, size: int, n: int) -> RegimeConstants:
    """
    Constant bundle of a stochastic EM oracle with W = ||h||^2.

    Args:
        constants: Model constants
        algo: full, minibatch, saem_es or saem_is
        size: Mini-batch size b (minibatch) or Monte Carlo size m (saem_*)
        n: Number of observations
    """
    _validate_algo(algo)
    if size < 1:
        raise ValueError(f"Batch or Monte Carlo size must be at least 1, got {size}")
    c = constants
    tau0 = tau1 = 0.0
    if algo == "full":
        sigma2_0 = sigma2_1 = 0.0
    elif algo == "minibatch":
        sigma2_0, sigma2_1 = c.sigma_bar2_0 / size, c.sigma_bar2_1 / size
    elif algo == "saem_es":
        sigma2_0, sigma2_1 = c.sigma_bar2_0 / (n * size), c.sigma_bar2_1 / (n * size)
    else:
        s2 = c.s_star**2
        tau0 = 144.0 * s2 * c.c_chi_0 / size**2
        tau1 = 144.0 * s2 * c.c_chi_1 / size**2
        sigma2_0 = 4.0 * s2 * math.sqrt(c.c_chi_0 + c.c_chi_1) / (n * size)
        sigma2_1 = 4.0 * s2 * math.sqrt(c.c_chi_1) / (n * size)
    return RegimeConstants(
        c_h0=0.0, c_h1=1.0, tau0=tau0, tau1=tau1, sigma2_0=sigma2_0, sigma2_1=sigma2_1,
        L_V=c.L_V, rho=c.v_min, c_V=c.v_max, V_star=c.V_star,
        pair="V=F(T(w)),W=|h|^2",
    )


def saem_is_bias_floor(constants: EmConstants, m: int) -> float:
    """Return the non-vanishing term 4 c_b/(v_min m), c_b = 6 s* sqrt(v_max) sqrt(c_chi_0)."""
    c_b = 6.0 * constants.s_star * math.sqrt(constants.v_max) * math.sqrt(constants.c_chi_0)
    return 4.0 * c_b / (constants.v_min * m)


def minibatch_em_bound(constants: EmConstants, steps: np.ndarray, b: int) -> float:
    """
    Bound on E||h(w_R)||^2 for mini-batch EM stopped at R with P(R = k) proportional to gamma_{k+1}.

    Raises:
        InvalidScheduleError: If some step makes 2 v_min - gamma L_V (1 + sigma_bar2_1/b) non-positive
    """
    c = constants
    steps = np.asarray(steps, dtype=float)
    margin = 2.0 * c.v_min - steps * c.L_V * (1.0 + c.sigma_bar2_1 / b)
    if np.any(margin <= 0.0):
        raise InvalidScheduleError(f"Steps too large for the mini-batch EM bound (max {steps.max()})")
    numerator = 2.0 * c.V_bar + c.L_V * c.sigma_bar2_0 * float(np.sum(steps**2)) / b
    return numerator / float(np.sum(steps * margin))


@dataclass(frozen=True)
class UnitCosts:
    """
    Unit costs of the stochastic EM oracles.

    Attributes:
        cost_T: One evaluation of the M-step map T
        cost_sbar: One conditional expectation sbar_i
        cost_MC: One Monte Carlo draw
    """

    cost_T: float = 1.0
    cost_sbar: float = 1.0
    cost_MC: float = 1.0


@dataclass(frozen=True)
class EmBudget:
    """
    Budget to reach E||h(w_R)||^2 <= eps.

    Attributes:
        T: Number of iterations
        size: Mini-batch size or Monte Carlo size
        gamma: Constant step
        total_cost: T times the per-iteration oracle cost
        regime: "high" or "low" precision regime
    """

    T: int
    size: int
    gamma: float
    total_cost: float
    regime: str


def _iterations(x: float) -> int:
    return max(1, math.ceil(round(x, 9)))


def em_cost_budget(
    constants: EmConstants,
    algo: str,
    eps: float,
    n: int,
    unit_costs: Optional[UnitCosts] = None,
    size: Optional[int] = None,
    kappa: float = SAEM_IS_KAPPA,
) -> EmBudget:
    """
    Iterations, batch size, step and total cost of a stochastic EM algorithm.

    When size is None the cost-optimal size is used: for mini-batch EM
    b = max(2 sigma0/eps - sigma1, sqrt(sigma1 cost_T/cost_sbar)) capped at n,
    and the analogous Monte Carlo sizes for the SAEM variants.

    Raises:
        EpsilonOutOfRangeError: If eps lies outside (0, 2 sigma_bar2_0/sigma_bar2_1)
        HypothesisViolatedError: If kappa is not admissible for SAEM-IS, or m is
            too small to keep the bias floor below (1 - kappa) eps
    """
    _validate_algo(algo)
    if algo == "full":
        raise ValueError("Cost budgets are defined for stochastic algorithms only")
    c = constants
    s0, s1 = c.sigma_bar2_0, c.sigma_bar2_1
    if not eps > 0.0 or (s1 > 0.0 and eps >= 2.0 * s0 / s1):
        raise EpsilonOutOfRangeError(f"eps={eps} outside (0, 2 sigma_bar2_0/sigma_bar2_1)")
    costs = unit_costs or UnitCosts()
    scale = c.V_bar * c.L_V / c.v_min**2

    if algo == "minibatch":
        if size is None:
            b_opt = max(2.0 * s0 / eps - s1, math.sqrt(s1 * costs.cost_T / costs.cost_sbar))
            size = min(max(int(math.floor(b_opt)), 1), n)
        if not 1 <= size <= n:
            raise BatchTooLargeError(f"Batch size {size} outside [1, {n}]")
        high = eps <= 2.0 * s0 / (size + s1)
        if high:
            T = 8.0 * scale * s0 / (size * eps**2)
            gamma = c.v_min * size * eps / (2.0 * s0 * c.L_V)
        else:
            T = 4.0 * scale * (1.0 + s1 / size) / eps
            gamma = c.v_min * size / (c.L_V * (size + s1))
        per_iteration = size * costs.cost_sbar + costs.cost_T

    elif algo == "saem_es":
        if size is None:
            m_star = math.sqrt(s1 * costs.cost_T / costs.cost_MC) / n
            size = max(int(math.floor(max((2.0 * s0 / eps - s1) / n, m_star))), 1)
        nm = n * size
        high = eps <= 2.0 * s0 / (nm + s1)
        if high:
            T = 8.0 * scale * s0 / (nm * eps**2)
            gamma = c.v_min * nm * eps / (2.0 * s0 * c.L_V)
        else:
            T = 4.0 * scale * (1.0 + s1 / nm) / eps
            gamma = c.v_min * nm / (c.L_V * (nm + s1))
        per_iteration = costs.cost_T + nm * costs.cost_MC

    else:
        if not 0.0 < kappa < 1.0:
            raise HypothesisViolatedError(f"kappa must lie in (0, 1), got {kappa}")
        c_b = 6.0 * c.s_star * math.sqrt(c.v_max) * math.sqrt(c.c_chi_0)
        if 4.0 * c_b / ((1.0 - kappa) * c.v_min) + eps * s1 > 2.0 * s0 / kappa:
            raise HypothesisViolatedError(f"kappa={kappa} is not admissible at eps={eps}")
        m_min = 4.0 * c_b / ((1.0 - kappa) * c.v_min * eps)
        if size is None:
            m_star = math.sqrt(s1 * costs.cost_T / (n * costs.cost_MC))
            m_opt = max(m_star, 2.0 * s0 / (kappa * eps) - s1)
            size = max(int(math.floor(m_opt)), math.ceil(round(m_min, 9)), 1)
        if size < m_min * (1.0 - 1e-9):
            raise HypothesisViolatedError(
                f"Monte Carlo size {size} is below 4 c_b/((1 - kappa) v_min eps)={m_min}"
            )
        high = eps <= 2.0 * s0 / (kappa * (size + s1))
        if high:
            T = 32.0 * scale * s0 / (size * kappa**2 * eps**2)
            gamma = kappa * eps * c.v_min * size / (4.0 * c.L_V * s0)
        else:
            T = 16.0 * scale * (1.0 + s1 / size) / (kappa * eps)
            gamma = c.v_min / (2.0 * c.L_V * (1.0 + s1 / size))
        per_iteration = costs.cost_T + n * size * costs.cost_MC

    iterations = _iterations(T)
    budget = EmBudget(
        T=iterations,
        size=size,
        gamma=gamma,
        total_cost=iterations * per_iteration,
        regime="high" if high else "low",
    )
    logger.info(
        f"em budget algo:{algo};eps:{eps};T:{budget.T};size:{size};regime:{budget.regime}"
    )
    return budget


@dataclass(frozen=True, eq=False)
class EmField:
    """
    Stochastic EM oracle in s-space with V = F(T(w)) and W = ||h(w)||^2.

    Attributes:
        model: Exponential-family model
        algo: full, minibatch, saem_es or saem_is
        size: Mini-batch size (minibatch) or Monte Carlo size (saem_*)
        kind: Proposal of saem_is, prior or posterior
        constants: Estimated model constants, needed for regime_constants
    """

    model: ExpFamilyModel
    algo: str = "minibatch"
    size: int = 1
    kind: str = "prior"
    constants: Optional[EmConstants] = None

    def __post_init__(self) -> None:
        _validate_algo(self.algo)
        if self.size < 1:
            raise ValueError(f"Batch or Monte Carlo size must be at least 1, got {self.size}")
        if self.algo == "minibatch" and self.size > self.model.n:
            raise BatchTooLargeError(f"Batch size {self.size} exceeds n={self.model.n}")
        if self.kind not in SUPPORTED_EM_PROPOSALS:
            supported = ", ".join(SUPPORTED_EM_PROPOSALS)
            raise ValueError(f"Unsupported proposal: {self.kind}. Supported proposals: {supported}")

    @property
    def dim(self) -> int:
        return self.model.d

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.algo == "minibatch":
            return minibatch_em_field(self.model, w, self.size, rng)
        if self.algo == "saem_es":
            return saem_field_exact(self.model, w, self.size, rng)
        if self.algo == "saem_is":
            return saem_field_is(self.model, w, self.size, rng, self.kind)
        return em_mean_field(self.model, w)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return em_mean_field(self.model, w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return lyapunov_V(self.model, w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        h = em_mean_field(self.model, w)
        return float(h @ h)

    def regime_constants(self) -> RegimeConstants:
        if self.constants is None:
            raise RegimeUnavailableError("EM constants were not estimated for this field")
        return em_regime_constants(self.constants, self.algo, self.size, self.model.n)
