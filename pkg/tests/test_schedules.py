"""Tests for step-size schedules."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stochapprox.core.constants import derive_constants
from stochapprox.core.models import (
    UNBOUNDED,
    ConstantStep,
    HorizonTunedStep,
    PolynomialStep,
    RegimeConstants,
)
from stochapprox.core.schedules import (
    check_ratio_condition,
    fast_rate_lambdas,
    fast_rate_offsets,
    fast_rate_schedule,
    gammas,
    schedule_gamma,
)
from stochapprox.errors import InvalidScheduleError


class TestScheduleGamma:
    """Tests for schedule_gamma and gammas."""

    def test_constant(self) -> None:
        """Test that a constant schedule repeats its step."""
        assert schedule_gamma(ConstantStep(0.3), 0) == 0.3
        np.testing.assert_array_equal(gammas(ConstantStep(0.3), 4), np.full(4, 0.3))

    def test_polynomial(self) -> None:
        """Test gamma_{k+1} = gamma_tilde/(k + 1 + T0)^beta."""
        s = PolynomialStep(gamma_tilde=2.0, T0=3, beta=0.5)

        assert schedule_gamma(s, 0) == pytest.approx(2.0 / 2.0)
        np.testing.assert_allclose(gammas(s, 3), 2.0 / np.sqrt([4.0, 5.0, 6.0]))

    def test_horizon_tuned_noise_limited(self) -> None:
        """Test that the horizon-tuned step is sqrt(2 V_bar/(eta0 L_V T)) when below gamma_max/2."""
        s = HorizonTunedStep(V_bar=1.0, eta0=2.0, L_V=1.0, gamma_max=2.0, T=100)

        assert schedule_gamma(s, 7) == pytest.approx(math.sqrt(2.0 / 200.0))

    def test_horizon_tuned_capped(self) -> None:
        """Test that the horizon-tuned step never exceeds gamma_max/2."""
        s = HorizonTunedStep(V_bar=100.0, eta0=1.0, L_V=1.0, gamma_max=0.5, T=1)

        assert schedule_gamma(s, 0) == pytest.approx(0.25)

    def test_horizon_tuned_unbounded(self) -> None:
        """Test that eta0 = 0 with an unbounded gamma_max is rejected."""
        s = HorizonTunedStep(V_bar=1.0, eta0=0.0, L_V=1.0, gamma_max=UNBOUNDED, T=10)

        with pytest.raises(InvalidScheduleError, match="unbounded"):
            schedule_gamma(s, 0)

    @pytest.mark.parametrize(
        "schedule",
        [
            ConstantStep(0.0),
            ConstantStep(-1.0),
            PolynomialStep(gamma_tilde=1.0, T0=-1),
            PolynomialStep(gamma_tilde=1.0, T0=0, beta=1.5),
            HorizonTunedStep(V_bar=1.0, eta0=1.0, L_V=0.0, gamma_max=1.0, T=10),
        ],
    )
    def test_invalid_parameters(self, schedule: object) -> None:
        """Test that invalid parameters raise InvalidScheduleError."""
        with pytest.raises(InvalidScheduleError):
            schedule_gamma(schedule, 0)  # type: ignore[arg-type]

    def test_negative_index(self) -> None:
        """Test that a negative iteration index is rejected."""
        with pytest.raises(InvalidScheduleError, match="non-negative"):
            schedule_gamma(ConstantStep(0.1), -1)

    def test_empty_horizon(self) -> None:
        """Test that gammas needs T >= 1."""
        with pytest.raises(InvalidScheduleError):
            gammas(ConstantStep(0.1), 0)

    @given(
        gamma_tilde=st.floats(min_value=0.01, max_value=10.0),
        T0=st.integers(min_value=0, max_value=50),
        beta=st.floats(min_value=0.1, max_value=1.0),
    )
    def test_vector_matches_pointwise(self, gamma_tilde: float, T0: int, beta: float) -> None:
        """Test that gammas agrees with schedule_gamma at every index."""
        s = PolynomialStep(gamma_tilde=gamma_tilde, T0=T0, beta=beta)

        steps = gammas(s, 20)

        np.testing.assert_allclose(steps, [schedule_gamma(s, k) for k in range(20)], rtol=1e-12)
        assert np.all(np.diff(steps) <= 0.0)


class TestRatioCondition:
    """Tests for check_ratio_condition."""

    def test_accepts_slow_decay(self) -> None:
        """Test that 1/(k + T0) steps with a large offset pass."""
        steps = gammas(PolynomialStep(gamma_tilde=6.0, T0=12), 200)

        check_ratio_condition(steps, rho_margin=1.0, gamma_max=1.0)

    def test_rejects_fast_decay(self) -> None:
        """Test that a sharp drop violates the ratio condition."""
        steps = np.array([0.1, 0.01])

        with pytest.raises(InvalidScheduleError, match="Ratio condition fails at k=1"):
            check_ratio_condition(steps, rho_margin=1.0, gamma_max=1.0)

    def test_rejects_large_step(self) -> None:
        """Test that steps above gamma_max/2 are rejected."""
        with pytest.raises(InvalidScheduleError, match="exceeds gamma_max/2"):
            check_ratio_condition(np.array([0.6]), rho_margin=1.0, gamma_max=1.0)


class TestFastRateSchedule:
    """Tests for fast_rate_schedule and the recursion terms."""

    def test_defaults(self, unbiased_constants: RegimeConstants) -> None:
        """Test gamma_tilde = 6/(rho - b1) and T0 = ceil(2 gamma_tilde/gamma_max)."""
        dc = derive_constants(unbiased_constants)

        schedule = fast_rate_schedule(dc)

        assert schedule.gamma_tilde == pytest.approx(6.0)
        assert schedule.T0 == 6
        assert schedule.beta == 1.0

    def test_gamma_tilde_too_small(self, unbiased_constants: RegimeConstants) -> None:
        """Test that gamma_tilde below 6/(rho - b1) is rejected."""
        dc = derive_constants(unbiased_constants)

        with pytest.raises(InvalidScheduleError, match="below"):
            fast_rate_schedule(dc, gamma_tilde=1.0)

    def test_lambdas_and_offsets(self, unbiased_constants: RegimeConstants) -> None:
        """Test lambda_k and b_k against the per-step helpers."""
        dc = derive_constants(unbiased_constants)
        steps = np.array([0.5, 0.25])

        np.testing.assert_allclose(fast_rate_lambdas(dc, steps), [dc.fast_lambda(0.5), dc.fast_lambda(0.25)])
        np.testing.assert_allclose(fast_rate_offsets(dc, steps), [dc.fast_offset(0.5), dc.fast_offset(0.25)])
