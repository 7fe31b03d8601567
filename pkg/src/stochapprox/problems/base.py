"""Random-field oracle protocol definition."""

from typing import Protocol, runtime_checkable

import numpy as np

from ..core.models import RegimeConstants


@runtime_checkable
class FieldOracle(Protocol):
    """
    Protocol for random-field oracles.

    An oracle draws samples H(w, X) and exposes the mean field h(w) together
    with the Lyapunov pair (V, W) the run monitors.
    """

    @property
    def dim(self) -> int:
        """
        Return the dimension d of the iterate.

        Returns:
            Iterate dimension
        """
        ...

    def sample(self, w: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Draw one oracle output H(w, X).

        Args:
            w: Current iterate
            rng: Random stream of the run

        Returns:
            Field sample with the shape of w
        """
        ...

    def mean_field(self, w: np.ndarray) -> np.ndarray:
        """
        Evaluate the mean field h(w) exactly.

        Args:
            w: Point of evaluation

        Returns:
            h(w)
        """
        ...

    def lyapunov_V(self, w: np.ndarray) -> float:
        """Return V(w)."""
        ...

    def lyapunov_W(self, w: np.ndarray) -> float:
        """Return W(w)."""
        ...

    def regime_constants(self) -> RegimeConstants:
        """
        Return the constant bundle the oracle satisfies.

        Raises:
            RegimeUnavailableError: If the oracle admits no bundle
        """
        ...
