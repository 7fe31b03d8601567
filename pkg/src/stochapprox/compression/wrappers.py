"""Compressed stochastic approximation: three ways to place a compressor."""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..core.models import RegimeConstants
from ..errors import StochApproxError
from ..problems.base import FieldOracle
from .operators import CompressionOp, compress, operator_profile, validate_operator
from .propagation import PropagationExtras, propagate_constants


@dataclass(frozen=True, eq=False)
class CompressedField:
    """
    Oracle C(H(w, X), U): the compressor acts on the field sample.

    The reported mean field is the inner h, which the run monitors.
    """

    inner: FieldOracle
    op: CompressionOp
    extras: PropagationExtras = field(default_factory=PropagationExtras)

    def __post_init__(self) -> None:
        validate_operator(self.op, self.inner.dim)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return compress(self.op, self.inner.sample(w, rng), rng)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self.inner.mean_field(w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_V(w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_W(w)

    def regime_constants(self) -> RegimeConstants:
        return propagate_constants(
            operator_profile(self.op, self.dim), "field", self.inner.regime_constants(), self.extras, self.dim
        )


@dataclass(frozen=True, eq=False)
class PerturbedIterateField:
    """Oracle H(C(w, U), X): the field is evaluated at a compressed copy of the iterate."""

    inner: FieldOracle
    op: CompressionOp
    extras: PropagationExtras = field(default_factory=PropagationExtras)

    def __post_init__(self) -> None:
        validate_operator(self.op, self.inner.dim)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return self.inner.sample(compress(self.op, w, rng), rng)

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self.inner.mean_field(w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_V(w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_W(w)

    def regime_constants(self) -> RegimeConstants:
        return propagate_constants(
            operator_profile(self.op, self.dim), "perturbed", self.inner.regime_constants(), self.extras, self.dim
        )


@dataclass(frozen=True, eq=False)
class LowPrecisionField:
    """
    Oracle (C(w + gamma_bar H(w, X), U) - w)/gamma_bar.

    Driven with the constant step gamma_bar, the run reproduces
    w_{k+1} = C(w_k + gamma_bar H(w_k, X_{k+1})) up to rounding.

    Attributes:
        inner: Uncompressed oracle
        op: Compressor applied to the updated iterate
        gamma_bar: The constant step size the oracle is built for
        extras: Propagation inputs; their gamma_bar is replaced by the one above
    """

    inner: FieldOracle
    op: CompressionOp
    gamma_bar: float
    extras: PropagationExtras = field(default_factory=PropagationExtras)

    def __post_init__(self) -> None:
        validate_operator(self.op, self.inner.dim)
        if not self.gamma_bar > 0.0:
            raise StochApproxError(f"gamma_bar must be positive, got {self.gamma_bar}")

    @property
    def constant_step(self) -> float:
        return self.gamma_bar

    @property
    def dim(self) -> int:
        return self.inner.dim

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        moved = w + self.gamma_bar * self.inner.sample(w, rng)
        return (compress(self.op, moved, rng) - w) / self.gamma_bar

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        return self.inner.mean_field(w)

    def lyapunov_V(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_V(w)

    def lyapunov_W(self, w: np.ndarray) -> float:
        return self.inner.lyapunov_W(w)

    def regime_constants(self) -> RegimeConstants:
        extras = replace(self.extras, gamma_bar=self.gamma_bar)
        return propagate_constants(
            operator_profile(self.op, self.dim), "lowprec", self.inner.regime_constants(), extras, self.dim
        )


def wrap_compressed_field(
    inner: FieldOracle, op: CompressionOp, extras: Optional[PropagationExtras] = None
) -> CompressedField:
    """Compress the random field."""
    return CompressedField(inner=inner, op=op, extras=extras or PropagationExtras())


def wrap_perturbed_iterate(
    inner: FieldOracle, op: CompressionOp, extras: Optional[PropagationExtras] = None
) -> PerturbedIterateField:
    """Evaluate the field at a compressed iterate (straight-through estimator)."""
    return PerturbedIterateField(inner=inner, op=op, extras=extras or PropagationExtras())


def wrap_low_precision(
    inner: FieldOracle, op: CompressionOp, gamma_bar: float, extras: Optional[PropagationExtras] = None
) -> LowPrecisionField:
    """Store iterates in low precision; requires the constant step gamma_bar."""
    return LowPrecisionField(inner=inner, op=op, gamma_bar=gamma_bar, extras=extras or PropagationExtras())
