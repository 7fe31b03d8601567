"""Tests for stochastic EM in sufficient-statistics space."""

import math
from dataclasses import replace

import numpy as np
import pytest

from stochapprox.errors import (
    BatchTooLargeError,
    EpsilonOutOfRangeError,
    HypothesisViolatedError,
    InvalidScheduleError,
    RegimeUnavailableError,
)
from stochapprox.problems.em import (
    EmConstants,
    EmField,
    GmmInstance,
    em_cost_budget,
    em_fixed_point,
    em_iterate,
    em_mean_field,
    em_regime_constants,
    estimate_em_constants,
    gmm_b_matrix,
    grad_V,
    lyapunov_V,
    make_gmm,
    minibatch_em_bound,
    minibatch_em_field,
    objective,
    saem_field_exact,
    saem_field_is,
    saem_is_bias_bound,
    saem_is_bias_floor,
    saem_is_exact_moments,
    saem_is_variance_bound,
    sbar,
    t_map,
)


@pytest.fixture
def gmm() -> GmmInstance:
    """Return a two-component mixture with 40 observations."""
    return make_gmm(40, np.array([-2.0, 2.0]), seed=5)


@pytest.fixture
def tiny_gmm() -> GmmInstance:
    """Return a three-observation mixture for exact enumeration."""
    return GmmInstance(y=np.array([-1.0, 0.2, 1.5]), weights=np.array([0.3, 0.7]))


@pytest.fixture
def em_constants() -> EmConstants:
    """Return synthetic EM constants with closed-form budgets."""
    return EmConstants(
        v_min=1.0,
        v_max=2.0,
        L_V=1.0,
        sigma_bar2_0=4.0,
        sigma_bar2_1=0.0,
        s_star=2.0,
        c_chi_0=4.0,
        c_chi_1=0.0,
        V_bar=1.0,
        V_star=0.0,
    )


class TestGmmInstance:
    """Tests for the Gaussian mixture model."""

    def test_statistics_layout(self, tiny_gmm: GmmInstance) -> None:
        """Test that S_i(k) = (e_k, y_i e_k)."""
        assert tiny_gmm.stats.shape == (3, 2, 4)
        np.testing.assert_array_equal(tiny_gmm.stats[2, 1], [0.0, 1.0, 0.0, 1.5])
        assert tiny_gmm.d == 4

    def test_invalid_weights(self) -> None:
        """Test that weights must be positive and sum to one."""
        with pytest.raises(ValueError, match="Mixture weights"):
            GmmInstance(y=np.zeros(2), weights=np.array([0.5, 0.6]))

    def test_m_step_inverts_statistics(self, gmm: GmmInstance) -> None:
        """Test that T returns responsibility-weighted means."""
        s = np.array([0.25, 0.75, -0.5, 1.5])

        np.testing.assert_allclose(t_map(gmm, s), [-2.0, 2.0])

    def test_sbar_masses_sum_to_one(self, gmm: GmmInstance) -> None:
        """Test that the responsibility masses of sbar sum to one."""
        s = sbar(gmm, np.array([-1.0, 1.0]))

        assert s[:2].sum() == pytest.approx(1.0)


class TestDeterministicEm:
    """Tests for the deterministic EM map."""

    def test_monotone_objective(self, gmm: GmmInstance) -> None:
        """Test that EM never increases the negative log-likelihood."""
        thetas = em_iterate(gmm, np.array([-0.5, 0.5]), 30)

        values = [objective(gmm, theta) for theta in thetas]

        assert np.all(np.diff(values) <= 1e-12)

    def test_fixed_point(self, gmm: GmmInstance) -> None:
        """Test that h vanishes at sbar(theta*)."""
        theta_star = em_fixed_point(gmm, np.array([-1.0, 1.0]))

        np.testing.assert_allclose(em_mean_field(gmm, sbar(gmm, theta_star)), 0.0, atol=1e-9)

    def test_fixed_point_is_stationary(self, gmm: GmmInstance) -> None:
        """Test that a vanishing field makes F o T stationary, by chain rule and by central differences."""
        w = sbar(gmm, em_fixed_point(gmm, np.array([-1.0, 1.0])))
        eps = 1e-6

        numeric = np.array(
            [(lyapunov_V(gmm, w + eps * e) - lyapunov_V(gmm, w - eps * e)) / (2 * eps) for e in np.eye(4)]
        )

        assert np.linalg.norm(em_mean_field(gmm, w)) < 1e-8
        assert np.linalg.norm(grad_V(gmm, w)) < 1e-6
        assert np.linalg.norm(numeric) < 1e-6

    def test_grad_v_finite_difference(self, gmm: GmmInstance) -> None:
        """Test the chain-rule gradient of V against central differences."""
        w = sbar(gmm, np.array([-1.0, 1.5]))
        eps = 1e-6

        numeric = np.array(
            [(lyapunov_V(gmm, w + eps * e) - lyapunov_V(gmm, w - eps * e)) / (2 * eps) for e in np.eye(4)]
        )

        np.testing.assert_allclose(grad_V(gmm, w), numeric, rtol=1e-5, atol=1e-7)

    def test_grad_v_is_preconditioned_field(self, gmm: GmmInstance) -> None:
        """Test grad V(w) = -B(w) h(w) with B(w) positive semidefinite."""
        w = sbar(gmm, np.array([-1.0, 1.5]))

        B = gmm_b_matrix(gmm, w)

        np.testing.assert_allclose(grad_V(gmm, w), -B @ em_mean_field(gmm, w), atol=1e-12)
        assert np.linalg.eigvalsh(B).min() >= -1e-12


class TestStochasticOracles:
    """Tests for the mini-batch and SAEM oracles."""

    def test_full_minibatch_is_exact(self, gmm: GmmInstance, rng: np.random.Generator) -> None:
        """Test that a batch of all observations without replacement returns h."""
        w = sbar(gmm, np.array([-1.0, 1.0]))

        H = minibatch_em_field(gmm, w, gmm.n, rng, replacement=False)

        np.testing.assert_allclose(H, em_mean_field(gmm, w), atol=1e-12)

    def test_batch_too_large(self, gmm: GmmInstance, rng: np.random.Generator) -> None:
        """Test that b > n is rejected."""
        with pytest.raises(BatchTooLargeError):
            minibatch_em_field(gmm, sbar(gmm, np.array([-1.0, 1.0])), 41, rng)

    def test_saem_exact_unbiased(self, tiny_gmm: GmmInstance) -> None:
        """Test that exact-posterior SAEM averages to h within 4 standard errors."""
        w = sbar(tiny_gmm, np.array([-0.5, 1.0]))
        rng = np.random.default_rng(3)

        draws = np.array([saem_field_exact(tiny_gmm, w, 2, rng) for _ in range(3000)])

        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - em_mean_field(tiny_gmm, w)) <= 4.0 * se + 1e-12)

    def test_is_posterior_proposal_unbiased(self, tiny_gmm: GmmInstance) -> None:
        """Test that sampling from the posterior gives an unbiased IS oracle."""
        w = sbar(tiny_gmm, np.array([-0.5, 1.0]))

        moments = saem_is_exact_moments(tiny_gmm, w, 3, kind="posterior")

        np.testing.assert_allclose(moments.bias, 0.0, atol=1e-12)
        assert moments.chi_mean == pytest.approx(1.0)

    def test_is_moments_within_bounds(self, tiny_gmm: GmmInstance) -> None:
        """Test that the exact IS bias and variance respect their chi bounds."""
        w = sbar(tiny_gmm, np.array([-0.5, 1.0]))

        for m in (1, 2, 4):
            moments = saem_is_exact_moments(tiny_gmm, w, m)
            assert float(np.linalg.norm(moments.bias)) <= saem_is_bias_bound(tiny_gmm, w, m)
            assert moments.variance <= saem_is_variance_bound(tiny_gmm, w, m)

    def test_is_empirical_mean(self, tiny_gmm: GmmInstance) -> None:
        """Test that simulated IS draws match the enumerated mean within 4 standard errors."""
        w = sbar(tiny_gmm, np.array([-0.5, 1.0]))
        rng = np.random.default_rng(8)
        moments = saem_is_exact_moments(tiny_gmm, w, 2)

        draws = np.array([saem_field_is(tiny_gmm, w, 2, rng) + w for _ in range(3000)])

        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - moments.mean) <= 4.0 * se + 1e-12)

    def test_unsupported_proposal(self, tiny_gmm: GmmInstance, rng: np.random.Generator) -> None:
        """Test the unsupported proposal message."""
        w = sbar(tiny_gmm, np.array([-0.5, 1.0]))

        with pytest.raises(ValueError, match="Unsupported proposal: uniform"):
            saem_field_is(tiny_gmm, w, 2, rng, kind="uniform")


class TestEmConstants:
    """Tests for EM constant bundles, bounds and budgets."""

    def test_ordering_enforced(self) -> None:
        """Test that v_min must be positive and at most v_max."""
        with pytest.raises(RegimeUnavailableError, match="v_min"):
            EmConstants(
                v_min=2.0, v_max=1.0, L_V=1.0, sigma_bar2_0=1.0, sigma_bar2_1=0.0,
                s_star=1.0, c_chi_0=1.0, c_chi_1=0.0, V_bar=1.0, V_star=0.0,
            )

    def test_estimate(self, gmm: GmmInstance, rng: np.random.Generator) -> None:
        """Test that estimated constants are ordered and use s*^2 for the variance."""
        constants = estimate_em_constants(gmm, np.array([-2.0, 2.0]), 1.0, 20, rng)

        assert 0.0 < constants.v_min <= constants.v_max
        assert constants.sigma_bar2_0 == pytest.approx(constants.s_star**2)
        assert constants.V_bar >= 0.0
        assert constants.c_chi_0 == pytest.approx(4.0)

    def test_regime_constants(self, em_constants: EmConstants) -> None:
        """Test the per-algorithm noise and bias constants."""
        minibatch = em_regime_constants(em_constants, "minibatch", 4, 100)
        saem_es = em_regime_constants(em_constants, "saem_es", 2, 100)
        saem_is = em_regime_constants(em_constants, "saem_is", 2, 100)

        assert minibatch.sigma2_0 == pytest.approx(1.0)
        assert minibatch.rho == 1.0
        assert minibatch.c_V == 2.0
        assert saem_es.sigma2_0 == pytest.approx(4.0 / 200.0)
        assert saem_is.tau0 == pytest.approx(144.0 * 4.0 * 4.0 / 4.0)
        assert not saem_is.is_unbiased

    def test_unsupported_algo(self, em_constants: EmConstants) -> None:
        """Test the unsupported algorithm message."""
        with pytest.raises(ValueError, match="Unsupported EM algorithm: sgd"):
            em_regime_constants(em_constants, "sgd", 1, 10)

    def test_bias_floor(self, em_constants: EmConstants) -> None:
        """Test 4 c_b/(v_min m) with c_b = 6 s* sqrt(v_max) sqrt(c_chi_0)."""
        c_b = 6.0 * 2.0 * math.sqrt(2.0) * 2.0

        assert saem_is_bias_floor(em_constants, 8) == pytest.approx(4.0 * c_b / 8.0)

    def test_minibatch_bound(self, em_constants: EmConstants) -> None:
        """Test the random-stopping bound with constant steps."""
        steps = np.full(10, 0.5)

        bound = minibatch_em_bound(em_constants, steps, b=2)

        assert bound == pytest.approx((2.0 + 4.0 * 2.5 / 2.0) / (5.0 * 1.5))
        with pytest.raises(InvalidScheduleError):
            minibatch_em_bound(em_constants, np.full(3, 2.0), b=2)

    def test_minibatch_budget(self, em_constants: EmConstants) -> None:
        """Test the cost-optimal mini-batch budget in the high precision regime."""
        budget = em_cost_budget(em_constants, "minibatch", 0.125, n=1000)

        assert budget.size == 64
        assert budget.regime == "high"
        assert budget.T == 32
        assert budget.gamma == pytest.approx(1.0)
        assert budget.total_cost == pytest.approx(32 * 65)

    def test_budget_eps_range(self, em_constants: EmConstants) -> None:
        """Test that eps must lie below 2 sigma_bar2_0/sigma_bar2_1."""
        constants = replace(em_constants, sigma_bar2_1=1.0)

        with pytest.raises(EpsilonOutOfRangeError):
            em_cost_budget(constants, "minibatch", 8.0, n=100)

    def test_budget_full_rejected(self, em_constants: EmConstants) -> None:
        """Test that the deterministic algorithm has no cost budget."""
        with pytest.raises(ValueError, match="stochastic algorithms only"):
            em_cost_budget(em_constants, "full", 0.1, n=100)

    def test_saem_is_kappa_not_admissible(self, em_constants: EmConstants) -> None:
        """Test that a large bias constant makes kappa inadmissible."""
        with pytest.raises(HypothesisViolatedError, match="not admissible"):
            em_cost_budget(em_constants, "saem_is", 0.125, n=100)


class TestEmField:
    """Tests for the EmField oracle."""

    def test_regime_constants_need_estimates(self, gmm: GmmInstance) -> None:
        """Test that regime constants need estimated model constants."""
        with pytest.raises(RegimeUnavailableError, match="not estimated"):
            EmField(gmm, "minibatch", 4).regime_constants()

    def test_size_above_n(self, gmm: GmmInstance) -> None:
        """Test that a mini-batch larger than n is rejected."""
        with pytest.raises(BatchTooLargeError):
            EmField(gmm, "minibatch", 41)

    def test_full_em_is_deterministic(self, gmm: GmmInstance, rng: np.random.Generator) -> None:
        """Test that the full algorithm returns the mean field."""
        field = EmField(gmm, "full")
        w = sbar(gmm, np.array([-1.0, 1.0]))

        np.testing.assert_array_equal(field.sample(w, rng), field.mean_field(w))
        assert field.lyapunov_W(w) == pytest.approx(float(field.mean_field(w) @ field.mean_field(w)))
