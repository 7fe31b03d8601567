"""Compression operators and their certificates."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import StochApproxError


@dataclass(frozen=True)
class Identity:
    """No compression."""


@dataclass(frozen=True)
class TopH:
    """Keep the h largest-magnitude coordinates (lowest index wins ties)."""

    h: int


@dataclass(frozen=True)
class RandH:
    """
    Keep h uniformly chosen coordinates.

    Attributes:
        h: Number of kept coordinates
        scaled: Multiply kept coordinates by d/h, which makes the operator unbiased
    """

    h: int
    scaled: bool = False


@dataclass(frozen=True)
class StochasticRound:
    """Unbiased rounding to the lattice delta * Z^d."""

    delta: float


@dataclass(frozen=True)
class DeterministicRound:
    """Round-half-away-from-zero to the lattice delta * Z^d."""

    delta: float


CompressionOp = Union[Identity, TopH, RandH, StochasticRound, DeterministicRound]


@dataclass(frozen=True)
class CompressorProfile:
    """
    Certificates held by a compression operator on R^d.

    Attributes:
        contractive_delta: E||C(x) - x||^2 <= (1 - delta)||x||^2
        unbiased_omega: E C(x) = x and E||C(x) - x||^2 <= omega ||x||^2
        uniform_kappa: E||C(x) - x||^2 <= kappa
        linear_Delta: Unbiased lattice quantizer with resolution Delta
        deterministic: C does not use its random input
    """

    contractive_delta: Optional[float] = None
    unbiased_omega: Optional[float] = None
    uniform_kappa: Optional[float] = None
    linear_Delta: Optional[float] = None
    deterministic: bool = False


def validate_operator(op: CompressionOp, d: int) -> None:
    """Raise StochApproxError when op is not defined on R^d."""
    if isinstance(op, (TopH, RandH)):
        if not 1 <= op.h <= d:
            raise StochApproxError(f"Operator keeps h={op.h} coordinates, need 1 <= h <= d={d}")
    elif isinstance(op, (StochasticRound, DeterministicRound)):
        if not op.delta > 0.0:
            raise StochApproxError(f"Quantization step must be positive, got {op.delta}")
    elif not isinstance(op, Identity):
        raise StochApproxError(f"Unsupported operator: {type(op).__name__}")


def compress(op: CompressionOp, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Apply a compression operator.

    Deterministic operators never touch rng.

    Args:
        op: Compression operator
        x: Vector to compress
        rng: Random stream for RandH and stochastic rounding

    Returns:
        Compressed vector with the shape of x
    """
    if isinstance(op, Identity):
        return x

    d = x.size
    validate_operator(op, d)
    if isinstance(op, TopH):
        keep = np.argsort(-np.abs(x), kind="stable")[: op.h]
        out = np.zeros_like(x)
        out[keep] = x[keep]
        return out
    if isinstance(op, RandH):
        keep = rng.choice(d, size=op.h, replace=False)
        out = np.zeros_like(x)
        out[keep] = x[keep] * (d / op.h if op.scaled else 1.0)
        return out
    if isinstance(op, StochasticRound):
        return op.delta * np.floor(x / op.delta + rng.random(d))
    scaled = np.floor(np.abs(x) / op.delta + 0.5)  # type: ignore[union-attr]
    return np.sign(x) * op.delta * scaled + 0.0  # type: ignore[union-attr]


def operator_profile(op: CompressionOp, d: int) -> CompressorProfile:
    """Return the certificates an operator holds on R^d."""
    validate_operator(op, d)
    if isinstance(op, Identity):
        return CompressorProfile(
            contractive_delta=1.0, unbiased_omega=0.0, uniform_kappa=0.0,
            linear_Delta=0.0, deterministic=True,
        )
    if isinstance(op, TopH):
        return CompressorProfile(contractive_delta=op.h / d, deterministic=True)
    if isinstance(op, RandH):
        if op.scaled:
            return CompressorProfile(unbiased_omega=d / op.h - 1.0)
        return CompressorProfile(contractive_delta=op.h / d)
    if isinstance(op, StochasticRound):
        return CompressorProfile(uniform_kappa=d * op.delta**2 / 4.0, linear_Delta=op.delta)
    return CompressorProfile(uniform_kappa=d * op.delta**2, deterministic=True)  # type: ignore[union-attr]


def parse_operator(text: str, d: Optional[int] = None) -> CompressionOp:
    """
    Parse an operator string.

    Accepted forms: "identity", "top:h", "rand:h", "rand:h:scaled",
    "sround:delta", "dround:delta".

    Raises:
        ValueError: On an unknown operator or malformed parameter
    """
    parts = [p.strip() for p in text.strip().lower().split(":")]
    kind, args = parts[0], parts[1:]
    try:
        if kind == "identity" and not args:
            op: CompressionOp = Identity()
        elif kind == "top" and len(args) == 1:
            op = TopH(h=int(args[0]))
        elif kind == "rand" and len(args) in (1, 2):
            if len(args) == 2 and args[1] not in ("scaled", "unscaled"):
                raise ValueError(f"expected 'scaled' or 'unscaled', got '{args[1]}'")
            op = RandH(h=int(args[0]), scaled=len(args) == 2 and args[1] == "scaled")
        elif kind == "sround" and len(args) == 1:
            op = StochasticRound(delta=float(args[0]))
        elif kind == "dround" and len(args) == 1:
            op = DeterministicRound(delta=float(args[0]))
        else:
            supported = "identity, top:h, rand:h[:scaled], sround:delta, dround:delta"
            raise ValueError(f"Unsupported operator: {text}. Supported operators: {supported}")
    except ValueError as exc:
        if str(exc).startswith("Unsupported operator"):
            raise
        raise ValueError(f"Invalid operator '{text}': {exc}") from exc

    if d is not None:
        validate_operator(op, d)
    elif isinstance(op, (StochasticRound, DeterministicRound)) and not op.delta > 0.0:
        raise ValueError(f"Quantization step must be positive, got {op.delta}")
    return op
