"""Tests for the SPIDER variance-reduced scheme."""

import numpy as np
import pytest

from stochapprox.core.models import ConstantStep, RegimeConstants
from stochapprox.core.spider import (
    SpiderConfig,
    enumerate_spider_step,
    quadratic_components,
    run_spider,
    spider_aggregate_bound,
    spider_bound_vr,
    spider_constant_config,
    spider_deltas,
    spider_gamma_max,
    spider_lambda,
    spider_lhs_weights,
    spider_oracle_budget,
    spider_rate_bound,
    spider_step_tuned,
)
from stochapprox.errors import ConfigViolationError, DimensionMismatchError
from stochapprox.problems.sgd import FiniteSumProblem


class TestSpiderStep:
    """Tests for the SPIDER control variate."""

    def test_conditional_mean(self, small_quadratic: FiniteSumProblem) -> None:
        """Test E[H_{k+1}] = H_k + h(w_k) - h(w_{k-1}) by batch enumeration."""
        cf = quadratic_components(small_quadratic)
        w_prev, w = np.zeros(3), np.array([0.2, -0.1, 0.3])
        H = np.array([1.0, 2.0, 3.0])

        for replacement in (False, True):
            mean, _ = enumerate_spider_step(cf, H, w_prev, w, b=2, replacement=replacement)
            np.testing.assert_allclose(mean, H + cf.mean_field(w) - cf.mean_field(w_prev), atol=1e-12)

    def test_conditional_variance(self, small_quadratic: FiniteSumProblem) -> None:
        """Test Var[H_{k+1}] <= L_bar^2 ||w_k - w_{k-1}||^2/b."""
        cf = quadratic_components(small_quadratic)
        w_prev, w = np.zeros(3), np.array([0.2, -0.1, 0.3])

        _, with_replacement = enumerate_spider_step(cf, np.zeros(3), w_prev, w, b=2, replacement=True)
        _, without = enumerate_spider_step(cf, np.zeros(3), w_prev, w, b=2, replacement=False)

        limit = cf.L_bar2 * float((w - w_prev) @ (w - w_prev)) / 2
        assert with_replacement <= limit
        assert without <= with_replacement + 1e-15


class TestRunSpider:
    """Tests for run_spider."""

    def test_records_and_oracle_calls(self, quadratic: FiniteSumProblem) -> None:
        """Test the record layout and the count n k_out + 2 k_out k_in b."""
        cf = quadratic_components(quadratic)
        config = spider_constant_config(cf, k_in=4, k_out=3, b=2)

        log = run_spider(cf, config, np.zeros(4), seed=0)

        assert len(log.records) == 12
        assert log.oracle_calls == 20 * 3 + 2 * 3 * 4 * 2
        assert [r.epoch for r in log.records[:5]] == [1, 1, 1, 1, 2]
        assert [r.inner for r in log.records[:5]] == [0, 1, 2, 3, 0]

    def test_epoch_start_is_exact(self, quadratic: FiniteSumProblem) -> None:
        """Test that the control variate equals h at the first step of each epoch."""
        cf = quadratic_components(quadratic)
        config = spider_constant_config(cf, k_in=4, k_out=3, b=2)

        log = run_spider(cf, config, np.zeros(4), seed=1)

        assert all(r.oracle_error2 == 0.0 for r in log.records if r.inner == 0)

    def test_reproducible(self, quadratic: FiniteSumProblem) -> None:
        """Test that identical seeds give identical trajectories."""
        cf = quadratic_components(quadratic)
        config = spider_constant_config(cf, k_in=4, k_out=3, b=2)

        a = run_spider(cf, config, np.zeros(4), seed=5, replicate=2)
        b = run_spider(cf, config, np.zeros(4), seed=5, replicate=2)

        np.testing.assert_array_equal(a.final_w, b.final_w)

    def test_step_hypothesis(self, quadratic: FiniteSumProblem) -> None:
        """Test that a step violating the hypothesis is rejected."""
        cf = quadratic_components(quadratic)
        config = SpiderConfig(k_in=4, k_out=2, b=2, schedule=ConstantStep(1.0))

        with pytest.raises(ConfigViolationError, match="rho/2"):
            run_spider(cf, config, np.zeros(4), seed=0)

    def test_batch_without_replacement_bounded_by_n(self, small_quadratic: FiniteSumProblem) -> None:
        """Test that b > n without replacement is rejected."""
        cf = quadratic_components(small_quadratic)
        config = SpiderConfig(k_in=2, k_out=1, b=6, schedule=ConstantStep(1e-4))

        with pytest.raises(ConfigViolationError, match="Batch size 6"):
            run_spider(cf, config, np.zeros(3), seed=0)

    def test_dimension_mismatch(self, quadratic: FiniteSumProblem) -> None:
        """Test that the initial point must match the dimension."""
        cf = quadratic_components(quadratic)
        config = spider_constant_config(cf, k_in=2, k_out=1, b=2)

        with pytest.raises(DimensionMismatchError):
            run_spider(cf, config, np.zeros(3), seed=0)

    def test_weighted_sum_below_initial_gap(self, quadratic: FiniteSumProblem) -> None:
        """Test sum nu E W + sum mu E||H - h||^2 <= Delta1 when c_h0 = 0."""
        cf = quadratic_components(quadratic)
        rc = cf.regime_constants()
        config = spider_constant_config(cf, k_in=4, k_out=5, b=4)
        steps = np.full(config.T, config.schedule.gamma)  # type: ignore[union-attr]
        nu, mu = spider_lhs_weights(steps, rc, cf.L_bar2, config.k_in, config.b)
        w0 = np.zeros(4)
        Delta1 = cf.lyapunov_V(w0) - rc.V_star

        values = []
        for r in range(20):
            log = run_spider(cf, config, w0, seed=3, replicate=r)
            values.append(nu @ log.column("W") + mu @ log.column("oracle_error2"))

        se = np.std(values, ddof=1) / np.sqrt(len(values))
        assert np.all(nu > 0.0) and np.all(mu > 0.0)
        rhs = spider_aggregate_bound(steps, rc, cf.L_bar2, config.k_in, config.b, Delta1)
        assert rhs == Delta1
        assert np.mean(values) <= rhs + 3.0 * se


class TestSpiderConstants:
    """Tests for the SPIDER step sizes and budgets."""

    def test_gamma_max_is_root(self) -> None:
        """Test that (1 v c_h1) gamma_max lambda(gamma_max) = rho/2."""
        g = spider_gamma_max(rho=1.0, L_V=4.0, L_bar2=16.0, c_V=1.0, c_h1=1.0, k_in=4, b=4)

        lam = spider_lambda(np.array([g]), 4.0, 16.0, 1.0, 1.0, 4, 4)[0]
        assert g * lam == pytest.approx(0.5)

    def test_gamma_max_without_components(self) -> None:
        """Test that L_bar = 0 reduces gamma_max to rho/(2 c L_V)."""
        assert spider_gamma_max(1.0, 4.0, 0.0, 1.0, 2.0, 4, 4) == pytest.approx(1.0 / 16.0)

    def test_tuned_step(self) -> None:
        """Test gamma_max/2 without c_h0 and the tuned step otherwise."""
        assert spider_step_tuned(1.0, 2.0, 1.0, 100, 0.0, 0.5) == 0.25
        assert spider_step_tuned(1.0, 2.0, 1.0, 100, 1.0, 0.5) == pytest.approx(0.1)

    def test_deltas_and_rate(self) -> None:
        """Test Delta2 and the rate bound."""
        Delta1, Delta2 = spider_deltas(3.0, 1.0, 2.0, 4.0, 1.0, 1.0, 4, 2, 0.1)

        assert Delta1 == 2.0
        assert Delta2 == pytest.approx(4.0 + 0.1 * 4.0 * 2.0 * 2.0)
        assert spider_rate_bound(2.0, 1.0, 1.0, 100, 0.1, 0.0) == pytest.approx(0.8)

    def test_oracle_budget(self) -> None:
        """Test k_in = b = ceil(sqrt(n)) and the component-call count."""
        budget = spider_oracle_budget(64, 0.1)

        assert (budget.k_in, budget.b, budget.k_out) == (8, 8, 2)
        assert budget.calls == 64 * 2 + 2 * 2 * 8 * 8
        assert budget.T == 16

    def test_oracle_budget_needs_deltas(self) -> None:
        """Test that a noisy mean field needs the constants."""
        with pytest.raises(ValueError, match="needs Delta1"):
            spider_oracle_budget(64, 0.1, c_h0=1.0)

    def test_bound_vr(self) -> None:
        """Test B^vr and the aggregate bound with a noisy mean field."""
        steps = np.array([0.1, 0.2])
        rc = RegimeConstants(
            c_h0=0.5, c_h1=1.0, tau0=0.0, tau1=0.0, sigma2_0=0.0, sigma2_1=0.0,
            L_V=2.0, rho=1.0, c_V=1.0,
        )

        b_vr = spider_bound_vr(steps, 2.0, 4.0, 1.0, 1.0, 4, 2)

        assert b_vr == pytest.approx(2.0 * 0.05 + 4.0 * 2.0 * 2.0 * 0.009)
        assert spider_aggregate_bound(steps, rc, 4.0, 4, 2, 1.5) == pytest.approx(1.5 + 0.5 * b_vr)
