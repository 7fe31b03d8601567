"""Error types raised by the toolkit.

Every error derives from ValueError so callers validating inputs with
``except ValueError`` keep working.
"""


class StochApproxError(ValueError):
    """Base class for all toolkit errors."""


class DivergenceError(StochApproxError):
    """Iterate became non-finite or exceeded the divergence norm."""

    def __init__(self, k: int, norm: float) -> None:
        self.k = k
        self.norm = norm
        super().__init__(f"Iterate diverged at k={k} (norm={norm})")


class DimensionMismatchError(StochApproxError):
    """Vector dimensions are incompatible."""


class BiasTooLargeError(StochApproxError):
    """Bias constant b1 is not below the drift constant rho."""


class InfiniteCvWithBiasError(StochApproxError):
    """Unbounded c_V combined with a non-zero bias."""


class InvalidScheduleError(StochApproxError):
    """Step-size schedule has an invalid parameter or violates a ratio condition."""


class NonPositiveWeightError(StochApproxError):
    """Random-stopping weight is not strictly positive."""


class MissingIteratesError(StochApproxError):
    """Stopping rule needs stored iterates that the log does not carry."""


class BiasedOracleError(StochApproxError):
    """Operation requires an unbiased oracle."""


class RegimeUnavailableError(StochApproxError):
    """Requested constant regime does not hold for this instance."""


class HypothesisViolatedError(StochApproxError):
    """Hypotheses of a constant-propagation rule are not met."""


class NonconstantStepError(StochApproxError):
    """Low-precision wrapper driven with a non-constant schedule."""


class BatchTooLargeError(StochApproxError):
    """Mini-batch larger than the number of components."""


class EpsilonOutOfRangeError(StochApproxError):
    """Target precision outside the admissible interval."""


class ReducibleError(StochApproxError):
    """Transition matrix is not irreducible."""


class RankDeficientError(StochApproxError):
    """Feature matrix does not have full column rank."""


class ConfigViolationError(StochApproxError):
    """SPIDER configuration violates the step-size hypothesis."""


class ZeroWeightSumError(StochApproxError):
    """All importance weights are zero."""


class DegeneratePosteriorError(StochApproxError):
    """Posterior responsibilities could not be formed."""


class EmptyProblemError(StochApproxError):
    """Problem has no components."""


class ParseError(StochApproxError):
    """Experiment configuration could not be parsed.

    Attributes:
        line: 1-based line number of the first error (0 when not tied to a line)
        message: Human readable description
    """

    def __init__(self, line: int, message: str) -> None:
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")
