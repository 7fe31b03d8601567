"""Linear mean field with additive Gaussian noise."""

from dataclasses import dataclass, field

import numpy as np

from ..core.models import RegimeConstants
from ..errors import DimensionMismatchError, RegimeUnavailableError


@dataclass(frozen=True, eq=False)
class GaussianLinearField:
    """
    Oracle H(w, X) = A w + b + sigma X with X ~ N(0, I).

    The Lyapunov pair is V(w) = ||w - w*||^2/2 and W(w) = -(w - w*)^T A (w - w*),
    so <grad V, h> = -W exactly.

    Attributes:
        A: Square matrix whose symmetric part is negative definite
        b: Offset vector
        sigma: Noise standard deviation
    """

    A: np.ndarray
    b: np.ndarray
    sigma: float = 0.0
    w_star: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape != (b.size, b.size):
            raise DimensionMismatchError(f"A has shape {A.shape}, b has size {b.size}")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w_star", np.linalg.solve(A, -b))

    @classmethod
    def contraction(cls, d: int, sigma: float = 0.0) -> "GaussianLinearField":
        """Return the field h(w) = -w on R^d."""
        return cls(A=-np.eye(d), b=np.zeros(d), sigma=sigma)

    @property
    def dim(self) -> int:
        return int(self.b.size)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self.A @ w + self.b

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        h = self.mean_field(w)
        if self.sigma == 0.0:
            return h
        return h + self.sigma * rng.standard_normal(self.dim)

    def lyapunov_V(self, w: np.ndarray) -> float:
        e = w - self.w_star
        return 0.5 * float(e @ e)

    def lyapunov_W(self, w: np.ndarray) -> float:
        e = w - self.w_star
        return -float(e @ (self.A @ e))

    def regime_constants(self) -> RegimeConstants:
        """
        Constant bundle of the oracle.

        Raises:
            RegimeUnavailableError: If the symmetric part of A is not negative definite
        """
        mu = float(np.linalg.eigvalsh(-(self.A + self.A.T) / 2.0).min())
        if mu <= 0.0:
            raise RegimeUnavailableError("Symmetric part of A is not negative definite")
        norm_A2 = float(np.linalg.norm(self.A, 2)) ** 2
        return RegimeConstants(
            c_h0=0.0,
            c_h1=norm_A2 / mu,
            tau0=0.0,
            tau1=0.0,
            sigma2_0=self.sigma**2 * self.dim,
            sigma2_1=0.0,
            L_V=1.0,
            rho=1.0,
            c_V=1.0 / np.sqrt(mu),
            V_star=0.0,
            pair="V=|w-w*|^2/2,W=-(w-w*)'A(w-w*)",
        )
