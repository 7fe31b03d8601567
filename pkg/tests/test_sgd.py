"""Tests for finite-sum quadratic problems and the SGD oracle."""

import numpy as np
import pytest

from stochapprox.errors import (
    BatchTooLargeError,
    DimensionMismatchError,
    EmptyProblemError,
    RegimeUnavailableError,
)
from stochapprox.problems.sgd import (
    FiniteSumProblem,
    MinibatchSpec,
    SgdField,
    component_gradients,
    full_gradient,
    gauss_southwell_step,
    low_precision_bound,
    low_precision_floor,
    make_quadratic_problem,
    sgd_constants,
    strongly_convex_last_iterate_bound,
    unbiased_compression_gamma_max,
)


class TestMakeQuadraticProblem:
    """Tests for make_quadratic_problem."""

    def test_spectrum(self, quadratic: FiniteSumProblem) -> None:
        """Test that the mean Hessian has eigenvalues in [mu, L] with both ends attained."""
        assert quadratic.mu == pytest.approx(1.0)
        assert quadratic.L == pytest.approx(4.0)
        assert quadratic.n == 20
        assert quadratic.d == 4

    def test_distinct_hessians_keep_mean_spectrum(self, small_quadratic: FiniteSumProblem) -> None:
        """Test that jittered component Hessians average back to the requested spectrum."""
        assert not small_quadratic.shared_Q
        assert small_quadratic.mu == pytest.approx(0.5)
        assert small_quadratic.L == pytest.approx(2.0)
        assert small_quadratic.M2 == float("inf")

    def test_minimizer(self, quadratic: FiniteSumProblem) -> None:
        """Test that w_star zeroes the full gradient."""
        assert quadratic.w_star is not None
        np.testing.assert_allclose(full_gradient(quadratic, quadratic.w_star), 0.0, atol=1e-10)

    def test_reproducible(self) -> None:
        """Test that the same seed yields the same instance."""
        a = make_quadratic_problem(n=5, d=3, seed=7)
        b = make_quadratic_problem(n=5, d=3, seed=7)

        np.testing.assert_array_equal(a.b, b.b)
        np.testing.assert_array_equal(a.Q, b.Q)

    def test_empty_problem(self) -> None:
        """Test that n = 0 is rejected."""
        with pytest.raises(EmptyProblemError):
            make_quadratic_problem(n=0, d=3, seed=0)

    def test_bad_spectrum(self) -> None:
        """Test that mu above L is rejected."""
        with pytest.raises(ValueError, match="Spectrum bounds"):
            make_quadratic_problem(n=3, d=3, seed=0, mu=5.0, L=1.0)

    def test_unbounded_below(self) -> None:
        """Test that a singular Hessian with an inconsistent linear term has no minimizer."""
        Q = np.zeros((2, 2, 2))
        Q[:, 0, 0] = 1.0
        b = np.array([[0.0, 1.0], [0.0, 1.0]])

        p = FiniteSumProblem(Q=Q, b=b)

        assert p.w_star is None
        with pytest.raises(RegimeUnavailableError):
            _ = p.F_star


class TestSgdField:
    """Tests for the SGD oracle."""

    def test_unbiased_over_components(self, small_quadratic: FiniteSumProblem) -> None:
        """Test that the mean of the component gradients is the full gradient."""
        w = np.array([0.3, -1.0, 2.0])

        grads = component_gradients(small_quadratic, w, np.arange(small_quadratic.n))

        np.testing.assert_allclose(grads.mean(axis=0), full_gradient(small_quadratic, w))

    def test_full_batch_without_replacement_is_exact(self, small_quadratic: FiniteSumProblem, rng: np.random.Generator) -> None:
        """Test that b = n without replacement returns the mean field."""
        field = SgdField(small_quadratic, MinibatchSpec(b=5, replacement=False))
        w = np.ones(3)

        np.testing.assert_allclose(field.sample(w, rng), field.mean_field(w))

    def test_batch_too_large(self, small_quadratic: FiniteSumProblem) -> None:
        """Test that b > n is rejected."""
        with pytest.raises(BatchTooLargeError, match="exceeds n=5"):
            SgdField(small_quadratic, MinibatchSpec(b=6))

    def test_dimension_mismatch(self, quadratic: FiniteSumProblem, rng: np.random.Generator) -> None:
        """Test that w must live in R^d."""
        field = SgdField(quadratic)

        with pytest.raises(DimensionMismatchError):
            field.sample(np.ones(2), rng)

    def test_unsupported_regime(self, quadratic: FiniteSumProblem) -> None:
        """Test the unsupported regime message."""
        with pytest.raises(ValueError, match="Unsupported regime: concave"):
            SgdField(quadratic, regime="concave")

    def test_lyapunov_pairs(self, quadratic: FiniteSumProblem) -> None:
        """Test the Lyapunov pair of each regime at a shifted point."""
        assert quadratic.w_star is not None
        e = np.array([1.0, 0.0, 0.0, 0.0])
        w = quadratic.w_star + e

        nonconvex = SgdField(quadratic, regime="nonconvex")
        vw = SgdField(quadratic, regime="strongly_convex_VW")
        convex = SgdField(quadratic, regime="convex")

        g = full_gradient(quadratic, w)
        assert nonconvex.lyapunov_W(w) == pytest.approx(float(g @ g))
        assert nonconvex.lyapunov_V(w) - quadratic.F_star == pytest.approx(0.5 * float(e @ quadratic.Q_bar @ e))
        assert vw.lyapunov_V(w) == vw.lyapunov_W(w) == pytest.approx(0.5)
        assert convex.lyapunov_W(w) == pytest.approx(float(e @ quadratic.Q_bar @ e))

    def test_strong_monotonicity(self, quadratic: FiniteSumProblem, rng: np.random.Generator) -> None:
        """Test <h(w) - h(w'), w - w'> <= -mu ||w - w'||^2 on random pairs."""
        field = SgdField(quadratic)

        for _ in range(50):
            w, v = 5.0 * rng.standard_normal((2, 4))
            diff = w - v
            inner = float((field.mean_field(w) - field.mean_field(v)) @ diff)
            assert inner <= -quadratic.mu * float(diff @ diff) + 1e-9

    def test_noise_within_sigma2(self, quadratic: FiniteSumProblem) -> None:
        """Test that the single-sample noise variance stays below sigma2_0 with b = 1."""
        rc = sgd_constants(quadratic, "nonconvex", MinibatchSpec(b=1))
        w = np.full(4, 0.5)

        grads = component_gradients(quadratic, w, np.arange(quadratic.n))
        noise = grads - full_gradient(quadratic, w)

        assert float(np.mean(np.sum(noise**2, axis=1))) <= rc.sigma2_0 + 1e-12


class TestSgdConstants:
    """Tests for sgd_constants."""

    def test_nonconvex(self, quadratic: FiniteSumProblem) -> None:
        """Test the nonconvex bundle and the M^2/b variance."""
        rc = sgd_constants(quadratic, "nonconvex", MinibatchSpec(b=4))

        assert rc.c_h1 == 1.0
        assert rc.L_V == pytest.approx(4.0)
        assert rc.rho == 1.0
        assert rc.sigma2_0 == pytest.approx(quadratic.M2 / 4)
        assert rc.V_star == pytest.approx(quadratic.F_star)
        assert rc.is_unbiased

    def test_default_batch_is_n(self, quadratic: FiniteSumProblem) -> None:
        """Test that the default variance is M^2/n."""
        assert sgd_constants(quadratic, "nonconvex").sigma2_0 == pytest.approx(quadratic.M2 / 20)

    def test_strongly_convex_vw(self, quadratic: FiniteSumProblem) -> None:
        """Test rho = 2 mu and c_h1 = 2 L^2 when V = W."""
        rc = sgd_constants(quadratic, "strongly_convex_VW")

        assert rc.rho == pytest.approx(2.0)
        assert rc.c_h1 == pytest.approx(32.0)
        assert rc.c_V == pytest.approx(np.sqrt(2.0))

    def test_distinct_hessians_unavailable(self, small_quadratic: FiniteSumProblem) -> None:
        """Test that distinct Q_i have no finite dispersion."""
        with pytest.raises(RegimeUnavailableError, match="M is infinite"):
            sgd_constants(small_quadratic, "nonconvex")

    def test_strong_convexity_needs_mu(self) -> None:
        """Test that mu = 0 rules out the strongly convex regimes."""
        Q = np.zeros((2, 2, 2))
        Q[:, 0, 0] = 1.0
        p = FiniteSumProblem(Q=Q, b=np.array([[1.0, 0.0], [1.0, 0.0]]))

        with pytest.raises(RegimeUnavailableError, match="mu > 0"):
            sgd_constants(p, "strongly_convex")


class TestSgdGuarantees:
    """Tests for the closed-form SGD step sizes and bounds."""

    def test_gauss_southwell_step(self) -> None:
        """Test gamma = 1/(8 d L)."""
        assert gauss_southwell_step(10, 2.0) == pytest.approx(1.0 / 160.0)

    def test_unbiased_compression_gamma_max(self) -> None:
        """Test gamma_max = 1/(L_V(2 omega + 1))."""
        assert unbiased_compression_gamma_max(2.0, 1.5) == pytest.approx(0.125)

    def test_low_precision_bound(self) -> None:
        """Test that the bound is the floor plus the vanishing terms."""
        floor = low_precision_floor(4, 0.01, 1.0, 0.5)
        value = low_precision_bound(4, 0.01, 1.0, 0.5, gamma_bar=0.1, F_gap=2.0, T=100)

        assert floor == pytest.approx(2.0 * 0.01 * 3.5)
        assert value == pytest.approx(0.4 + 0.05 + floor)

    def test_low_precision_step_condition(self) -> None:
        """Test that gamma_bar + Delta sqrt(d) >= 2/L is rejected."""
        with pytest.raises(ValueError, match="2/L"):
            low_precision_bound(4, 0.5, 1.0, 0.5, gamma_bar=1.5, F_gap=1.0, T=10)

    def test_strongly_convex_last_iterate_bound(self) -> None:
        """Test the first value of the last-iterate recursion and the step restriction."""
        bound = strongly_convex_last_iterate_bound(1.0, 2.0, 1.0, np.array([0.1, 0.1]), e0=1.0)

        assert bound[0] == pytest.approx(4.0 * 0.01 + (1.0 - 0.2 + 0.08))
        assert bound[1] < bound[0]
        with pytest.raises(ValueError, match="mu/L"):
            strongly_convex_last_iterate_bound(1.0, 2.0, 1.0, np.array([0.3]), e0=1.0)
