"""Compression operators, their certificates and the compressed oracles."""

from .operators import (
    CompressorProfile,
    DeterministicRound,
    Identity,
    RandH,
    StochasticRound,
    TopH,
    compress,
    operator_profile,
    parse_operator,
)
from .propagation import PropagationExtras, propagate_constants
from .wrappers import wrap_compressed_field, wrap_low_precision, wrap_perturbed_iterate

__all__ = [
    "CompressorProfile",
    "DeterministicRound",
    "Identity",
    "RandH",
    "StochasticRound",
    "TopH",
    "compress",
    "operator_profile",
    "parse_operator",
    "PropagationExtras",
    "propagate_constants",
    "wrap_compressed_field",
    "wrap_low_precision",
    "wrap_perturbed_iterate",
]
