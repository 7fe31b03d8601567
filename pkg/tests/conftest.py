"""Pytest fixtures for stochapprox tests."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochapprox.core.models import RegimeConstants
from stochapprox.problems.linear import GaussianLinearField
from stochapprox.problems.sgd import FiniteSumProblem, make_quadratic_problem
from stochapprox.problems.td import Features, Mrp, random_features, random_mrp

settings.register_profile(
    "fast",
    max_examples=30,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("fast")


@pytest.fixture
def unbiased_constants() -> RegimeConstants:
    """Return an unbiased constant bundle with a finite gamma_max."""
    return RegimeConstants(
        c_h0=0.0,
        c_h1=1.0,
        tau0=0.0,
        tau1=0.0,
        sigma2_0=2.0,
        sigma2_1=0.0,
        L_V=1.0,
        rho=1.0,
        c_V=1.0,
    )


@pytest.fixture
def biased_constants() -> RegimeConstants:
    """Return a biased constant bundle with b1 below rho."""
    return RegimeConstants(
        c_h0=0.0,
        c_h1=1.0,
        tau0=0.04,
        tau1=0.01,
        sigma2_0=1.0,
        sigma2_1=0.5,
        L_V=2.0,
        rho=1.0,
        c_V=1.0,
    )


@pytest.fixture
def linear_field() -> GaussianLinearField:
    """Return the noisy contraction h(w) = -w on R^3."""
    return GaussianLinearField.contraction(3, sigma=0.5)


@pytest.fixture
def quadratic() -> FiniteSumProblem:
    """Return a small shared-Hessian quadratic finite sum."""
    return make_quadratic_problem(n=20, d=4, seed=1, shared_Q=True, mu=1.0, L=4.0)


@pytest.fixture
def small_quadratic() -> FiniteSumProblem:
    """Return a five-component quadratic with distinct Hessians, for batch enumeration."""
    return make_quadratic_problem(n=5, d=3, seed=2, shared_Q=False, mu=0.5, L=2.0)


@pytest.fixture
def mrp() -> Mrp:
    """Return a random 6-state Markov reward process with discount 0.5."""
    return random_mrp(6, 0.5, seed=3)


@pytest.fixture
def features() -> Features:
    """Return full-rank features for 6 states in dimension 2."""
    return random_features(6, 2, seed=4)


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a seeded generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def sgd_config_text() -> str:
    """Return a small SGD experiment file."""
    return """\
# small quadratic
[problem]
kind = sgd
n = 10
d = 2
mu = 1.0
L = 2.0

[algorithm]
T = 50
gamma = 0.1
seeds = 4

[output]
bound = constant_step
"""
