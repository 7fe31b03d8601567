"""Finite-sum quadratic problems and stochastic-gradient oracles."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..config import SUPPORTED_SGD_REGIMES
from ..core.models import UNBOUNDED, RegimeConstants
from ..errors import (
    BatchTooLargeError,
    DimensionMismatchError,
    EmptyProblemError,
    RegimeUnavailableError,
)
from ..logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteSumProblem:
    """
    F(w) = (1/n) sum_i f_i(w) with f_i(w) = w^T Q_i w/2 - b_i^T w.

    Attributes:
        Q: Stacked symmetric PSD matrices, shape (n, d, d)
        b: Stacked linear terms, shape (n, d)
        Q_bar: Mean matrix, the Hessian of F
        b_bar: Mean linear term
        w_star: A minimizer of F, None when F is unbounded below
    """

    Q: np.ndarray
    b: np.ndarray
    Q_bar: np.ndarray = field(init=False)
    b_bar: np.ndarray = field(init=False)
    w_star: Optional[np.ndarray] = field(init=False)

    def __post_init__(self) -> None:
        Q = np.asarray(self.Q, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if Q.ndim != 3 or b.ndim != 2 or Q.shape[0] == 0:
            raise EmptyProblemError(f"Problem needs n >= 1 components, got Q{Q.shape}, b{b.shape}")
        n, d, _ = Q.shape
        if Q.shape != (n, d, d) or b.shape != (n, d):
            raise DimensionMismatchError(f"Q has shape {Q.shape} but b has shape {b.shape}")
        if not np.allclose(Q, np.swapaxes(Q, 1, 2)):
            raise ValueError("Component matrices Q_i must be symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "Q_bar", Q.mean(axis=0))
        object.__setattr__(self, "b_bar", b.mean(axis=0))
        object.__setattr__(self, "w_star", self._minimizer())

    def _minimizer(self) -> Optional[np.ndarray]:
        w, *_ = np.linalg.lstsq(self.Q_bar, self.b_bar, rcond=None)
        if np.linalg.norm(self.Q_bar @ w - self.b_bar) > 1e-8 * (1.0 + np.linalg.norm(self.b_bar)):
            return None
        return w

    @property
    def n(self) -> int:
        return int(self.Q.shape[0])

    @property
    def d(self) -> int:
        return int(self.Q.shape[1])

    @property
    def L(self) -> float:
        """Lipschitz constant of grad F (largest eigenvalue of Q_bar)."""
        return float(np.linalg.eigvalsh(self.Q_bar)[-1])

    @property
    def mu(self) -> float:
        """Strong-convexity modulus of F (smallest eigenvalue of Q_bar)."""
        return float(np.linalg.eigvalsh(self.Q_bar)[0])

    @property
    def component_lipschitz(self) -> np.ndarray:
        """Per-component constants L_i = lambda_max(Q_i)."""
        return np.linalg.eigvalsh(self.Q)[:, -1]

    @property
    def shared_Q(self) -> bool:
        return bool(np.allclose(self.Q, self.Q[0]))

    @property
    def M2(self) -> float:
        """
        Squared dispersion bound max_i sup_w ||grad f_i - grad F||^2.

        Finite only for shared Q, where it equals max_i ||b_i - b_bar||^2.
        """
        if not self.shared_Q:
            return float("inf")
        return float(np.max(np.sum((self.b - self.b_bar) ** 2, axis=1)))

    @property
    def F_star(self) -> float:
        if self.w_star is None:
            raise RegimeUnavailableError("F has no minimizer")
        return objective(self, self.w_star)


@dataclass(frozen=True)
class MinibatchSpec:
    """
    Mini-batch sampling rule.

    Attributes:
        b: Batch size
        replacement: Draw indices with replacement
    """

    b: int = 1
    replacement: bool = True


def _validate_batch(p: FiniteSumProblem, batch: MinibatchSpec) -> None:
    if batch.b < 1:
        raise ValueError(f"Batch size must be at least 1, got {batch.b}")
    if batch.b > p.n:
        raise BatchTooLargeError(f"Batch size {batch.b} exceeds n={p.n}")


def component_gradients(p: FiniteSumProblem, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Return grad f_i(w) for the selected components, one per row."""
    return np.einsum("bij,j->bi", p.Q[idx], w) - p.b[idx]


def full_gradient(p: FiniteSumProblem, w: np.ndarray) -> np.ndarray:
    """Return grad F(w)."""
    if w.shape != (p.d,):
        raise DimensionMismatchError(f"w has shape {w.shape}, expected ({p.d},)")
    return p.Q_bar @ w - p.b_bar


def objective(p: FiniteSumProblem, w: np.ndarray) -> float:
    """Return F(w)."""
    if w.shape != (p.d,):
        raise DimensionMismatchError(f"w has shape {w.shape}, expected ({p.d},)")
    return 0.5 * float(w @ p.Q_bar @ w) - float(p.b_bar @ w)


def sample_batch(n: int, batch: MinibatchSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw a uniform mini-batch of component indices."""
    if batch.replacement:
        return rng.integers(0, n, size=batch.b)
    return rng.choice(n, size=batch.b, replace=False)


def sgd_field(
    p: FiniteSumProblem,
    w: np.ndarray,
    batch: MinibatchSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Return -(1/b) sum_{i in B} grad f_i(w) for a uniformly drawn batch B.

    Raises:
        BatchTooLargeError: If b > n
        DimensionMismatchError: If w does not live in R^d
    """
    if w.shape != (p.d,):
        raise DimensionMismatchError(f"w has shape {w.shape}, expected ({p.d},)")
    _validate_batch(p, batch)
    idx = sample_batch(p.n, batch, rng)
    return -component_gradients(p, w, idx).mean(axis=0)


def _require_w_star(p: FiniteSumProblem, regime: str) -> np.ndarray:
    if p.w_star is None:
        raise RegimeUnavailableError(f"Regime '{regime}' needs a minimizer of F")
    return p.w_star


def lyapunov_V(p: FiniteSumProblem, regime: str, w: np.ndarray) -> float:
    """Return V(w) of the regime's Lyapunov pair."""
    if regime == "nonconvex":
        return objective(p, w)
    e = w - _require_w_star(p, regime)
    return 0.5 * float(e @ e)


def lyapunov_W(p: FiniteSumProblem, regime: str, w: np.ndarray) -> float:
    """
    Return W(w) of the regime's Lyapunov pair.

    nonconvex: ||grad F||^2; convex and strongly_convex: <grad F, w - w*>;
    strongly_convex_VW: ||w - w*||^2/2.
    """
    if regime not in SUPPORTED_SGD_REGIMES:
        supported = ", ".join(SUPPORTED_SGD_REGIMES)
        raise ValueError(f"Unsupported regime: {regime}. Supported regimes: {supported}")
    g = full_gradient(p, w)
    if regime == "nonconvex":
        return float(g @ g)
    e = w - _require_w_star(p, regime)
    if regime == "strongly_convex_VW":
        return 0.5 * float(e @ e)
    return float(g @ e)


def sgd_constants(
    p: FiniteSumProblem,
    regime: str,
    batch: Optional[MinibatchSpec] = None,
) -> RegimeConstants:
    """
    Constant bundle of the stochastic-gradient oracle for a regime.

    The variance constant is sigma2_0 = M^2/b; the default batch size b = n
    gives the M^2/n of the reference table.

    Raises:
        RegimeUnavailableError: If Q_i differ (M infinite), or the regime's
            convexity requirements fail
    """
    if regime not in SUPPORTED_SGD_REGIMES:
        supported = ", ".join(SUPPORTED_SGD_REGIMES)
        raise ValueError(f"Unsupported regime: {regime}. Supported regimes: {supported}")
    if not p.shared_Q:
        raise RegimeUnavailableError("Bounded dispersion needs identical Q_i (M is infinite)")
    b = p.n if batch is None else batch.b
    if b > p.n:
        raise BatchTooLargeError(f"Batch size {b} exceeds n={p.n}")
    sigma2_0 = p.M2 / b
    L = p.L

    if regime == "nonconvex":
        w_star = p.w_star
        return RegimeConstants(
            c_h0=0.0, c_h1=1.0, tau0=0.0, tau1=0.0, sigma2_0=sigma2_0, sigma2_1=0.0,
            L_V=L, rho=1.0, c_V=1.0,
            V_star=objective(p, w_star) if w_star is not None else float("-inf"),
            pair="V=F,W=|grad F|^2",
        )

    _require_w_star(p, regime)
    mu = p.mu
    if regime == "convex":
        return RegimeConstants(
            c_h0=0.0, c_h1=L, tau0=0.0, tau1=0.0, sigma2_0=sigma2_0, sigma2_1=0.0,
            L_V=1.0, rho=1.0, c_V=UNBOUNDED, V_star=0.0,
            pair="V=|w-w*|^2/2,W=<grad F,w-w*>",
        )
    if mu <= 1e-12:
        raise RegimeUnavailableError(f"Strong convexity needs mu > 0, got {mu}")
    if regime == "strongly_convex":
        return RegimeConstants(
            c_h0=0.0, c_h1=L, tau0=0.0, tau1=0.0, sigma2_0=sigma2_0, sigma2_1=0.0,
            L_V=1.0, rho=1.0, c_V=1.0 / np.sqrt(mu), V_star=0.0,
            pair="V=|w-w*|^2/2,W=<grad F,w-w*>",
        )
    return RegimeConstants(
        c_h0=0.0, c_h1=2.0 * L**2, tau0=0.0, tau1=0.0, sigma2_0=sigma2_0, sigma2_1=0.0,
        L_V=1.0, rho=2.0 * mu, c_V=np.sqrt(2.0), V_star=0.0,
        pair="V=W=|w-w*|^2/2",
    )


@dataclass(frozen=True, eq=False)
class SgdField:
    """
    Stochastic-gradient oracle on a finite-sum problem.

    Attributes:
        problem: Finite-sum quadratic
        batch: Mini-batch rule
        regime: Lyapunov pair monitored by the engine
    """

    problem: FiniteSumProblem
    batch: MinibatchSpec = MinibatchSpec()
    regime: str = "nonconvex"

    def __post_init__(self) -> None:
        _validate_batch(self.problem, self.batch)
        if self.regime not in SUPPORTED_SGD_REGIMES:
            supported = ", ".join(SUPPORTED_SGD_REGIMES)
            raise ValueError(f"Unsupported regime: {self.regime}. Supported regimes: {supported}")

    @property
    def dim(self) -> int:
        return self.problem.d

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return sgd_field(self.problem, w, self.batch, rng)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return -full_gradient(self.problem, w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return lyapunov_V(self.problem, self.regime, w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        return lyapunov_W(self.problem, self.regime, w)

    def regime_constants(self) -> RegimeConstants:
        return sgd_constants(self.problem, self.regime, self.batch)


def _random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_quadratic_problem(
    n: int,
    d: int,
    seed: int,
    shared_Q: bool = True,
    mu: float = 1.0,
    L: float = 10.0,
    spread: float = 1.0,
) -> FiniteSumProblem:
    """
    Random finite-sum quadratic with Hessian spectrum in [mu, L].

    Args:
        n: Number of components
        d: Dimension
        seed: Generator seed
        shared_Q: Use one matrix for every component (finite dispersion M)
        mu: Smallest eigenvalue of Q_bar (0 allowed for merely convex instances)
        L: Largest eigenvalue of Q_bar
        spread: Standard deviation of the b_i around their mean

    Returns:
        FiniteSumProblem
    """
    if n < 1 or d < 1:
        raise EmptyProblemError(f"Need n >= 1 and d >= 1, got n={n}, d={d}")
    if not 0.0 <= mu <= L or L <= 0.0:
        raise ValueError(f"Spectrum bounds need 0 <= mu <= L and L > 0, got mu={mu}, L={L}")
    rng = np.random.default_rng(seed)
    U = _random_orthogonal(d, rng)
    spectrum = np.linspace(mu, L, d) if d > 1 else np.array([L])
    base = (U * spectrum) @ U.T
    base = (base + base.T) / 2.0
    if shared_Q:
        Q = np.repeat(base[None, :, :], n, axis=0)
    else:
        # component spectra jitter around the base, then are re-centred so Q_bar = base
        jitter = rng.uniform(0.5, 1.5, size=(n, d))
        jitter /= jitter.mean(axis=0)
        Q = np.einsum("ij,nj,kj->nik", U, spectrum * jitter, U)
        Q = (Q + np.swapaxes(Q, 1, 2)) / 2.0
    center = rng.standard_normal(d)
    b = center + spread * rng.standard_normal((n, d))
    logger.info(f"quadratic problem n:{n};d:{d};mu:{mu};L:{L};shared_Q:{shared_Q}")
    return FiniteSumProblem(Q=Q, b=b)


def gauss_southwell_bound(d: int, L: float, F0: float, F_star: float, T: int) -> float:
    """Bound 32 d^2 L (F0 - F*)/T on the mean squared gradient of Gauss-Southwell with gamma = 1/(8dL)."""
    return 32.0 * d**2 * L * (F0 - F_star) / T


def gauss_southwell_step(d: int, L: float) -> float:
    """Constant step 1/(8dL) of the Gauss-Southwell guarantee."""
    return 1.0 / (8.0 * d * L)


def unbiased_compression_gamma_max(L_V: float, omega: float) -> float:
    """Largest step 1/(L_V(2 omega + 1)) for SGD with an unbiased compressor."""
    return 1.0 / (L_V * (2.0 * omega + 1.0))


def low_precision_floor(d: int, Delta: float, L: float, M2_over_n: float) -> float:
    """Non-vanishing term sqrt(d) Delta L (3 + M^2/n) of low-precision SGD."""
    return float(np.sqrt(d)) * Delta * L * (3.0 + M2_over_n)


def low_precision_bound(
    d: int,
    Delta: float,
    L: float,
    M2_over_n: float,
    gamma_bar: float,
    F_gap: float,
    T: int,
) -> float:
    """
    Bound on (1/T) sum E||grad F(w_k)||^2 for low-precision SGD with constant step gamma_bar.

    Raises:
        ValueError: If gamma_bar + Delta sqrt(d) >= 2/L
    """
    if gamma_bar + Delta * np.sqrt(d) >= 2.0 / L:
        raise ValueError(
            f"Low-precision bound needs gamma_bar + Delta sqrt(d) < 2/L, got {gamma_bar}, {Delta}"
        )
    return (
        2.0 * F_gap / (gamma_bar * T)
        + gamma_bar * M2_over_n * L
        + low_precision_floor(d, Delta, L, M2_over_n)
    )


def strongly_convex_last_iterate_bound(
    mu: float,
    L: float,
    M2_over_n: float,
    steps: np.ndarray,
    e0: float,
) -> np.ndarray:
    """
    Bound on E||w_k - w*||^2 for k = 1..T under strong convexity.

    Value k is L^2 (M^2/n) gamma_k^2/mu + prod_{l<=k}(1 - 2 mu gamma_l + 2 L^2 gamma_l^2) e0.

    Raises:
        ValueError: If some gamma_k >= mu/L^2
    """
    steps = np.asarray(steps, dtype=float)
    if np.any(steps >= mu / L**2):
        raise ValueError(f"Steps must stay below mu/L^2={mu / L**2}")
    products = np.cumprod(1.0 - 2.0 * mu * steps + 2.0 * L**2 * steps**2)
    return L**2 * M2_over_n * steps**2 / mu + products * e0
