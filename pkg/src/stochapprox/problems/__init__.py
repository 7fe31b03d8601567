"""Random-field oracles for the supported problem families."""

from .base import FieldOracle
from .em import EmField, GmmInstance, make_gmm
from .linear import GaussianLinearField
from .sgd import FiniteSumProblem, MinibatchSpec, SgdField, make_quadratic_problem
from .td import Features, Mrp, TdField, random_features, random_mrp

__all__ = [
    "FieldOracle",
    "EmField",
    "GmmInstance",
    "make_gmm",
    "GaussianLinearField",
    "FiniteSumProblem",
    "MinibatchSpec",
    "SgdField",
    "make_quadratic_problem",
    "Features",
    "Mrp",
    "TdField",
    "random_features",
    "random_mrp",
]
