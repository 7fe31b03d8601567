"""Derived-constant algebra and epsilon-stationarity budgets."""

import math

from ..errors import (
    BiasTooLargeError,
    BiasedOracleError,
    InfiniteCvWithBiasError,
    RegimeUnavailableError,
    StochApproxError,
)
from ..logger import setup_logger
from .models import (
    UNBOUNDED,
    DerivedConstants,
    EpsilonBudget,
    RegimeConstants,
    ext_str,
    is_unbounded,
)

logger = setup_logger(__name__)


def _validate_regime(rc: RegimeConstants) -> None:
    """Reject negative constants and non-positive L_V or rho."""
    for name in ("c_h0", "c_h1", "tau0", "tau1", "sigma2_0", "sigma2_1"):
        value = getattr(rc, name)
        if not value >= 0.0:
            raise StochApproxError(f"Constant {name} must be non-negative, got {value}")
    if not rc.L_V > 0.0:
        raise StochApproxError(f"L_V must be positive, got {rc.L_V}")
    if not rc.rho > 0.0:
        raise StochApproxError(f"rho must be positive, got {rc.rho}")
    if not is_unbounded(rc.c_V) and not float(rc.c_V) > 0.0:  # type: ignore[arg-type]
        raise StochApproxError(f"c_V must be positive, got {rc.c_V}")


def _eta(rc: RegimeConstants, ell: int) -> float:
    """Second-moment constant eta_ell of the field."""
    sigma2 = (rc.sigma2_0, rc.sigma2_1)[ell]
    tau = (rc.tau0, rc.tau1)[ell]
    c_h = (rc.c_h0, rc.c_h1)[ell]
    return (
        sigma2
        + tau
        + c_h
        + math.sqrt(c_h) * (math.sqrt(rc.tau0) + math.sqrt(rc.tau1))
        + math.sqrt(tau) * (math.sqrt(rc.c_h0) + math.sqrt(rc.c_h1))
    )


def derive_constants(rc: RegimeConstants, V_bar: float = 0.0) -> DerivedConstants:
    """
    Derive (b0, b1, eta0, eta1, gamma_max, B) from a constant bundle.

    Args:
        rc: Field and Lyapunov constants
        V_bar: Initial gap E V(w0) - V_star carried for budgets and bounds

    Returns:
        DerivedConstants

    Raises:
        InfiniteCvWithBiasError: If c_V is unbounded while tau is non-zero
        BiasTooLargeError: If b1 >= rho
    """
    _validate_regime(rc)
    if V_bar < 0.0:
        raise StochApproxError(f"V_bar must be non-negative, got {V_bar}")

    if is_unbounded(rc.c_V):
        if not rc.is_unbiased:
            raise InfiniteCvWithBiasError(
                f"c_V is unbounded but tau=({rc.tau0}, {rc.tau1}) is non-zero"
            )
        b0 = b1 = 0.0
    else:
        c_V = float(rc.c_V)  # type: ignore[arg-type]
        b0 = c_V * math.sqrt(rc.tau0) / 2.0
        b1 = c_V * (math.sqrt(rc.tau0) / 2.0 + math.sqrt(rc.tau1))

    if b1 >= rc.rho:
        raise BiasTooLargeError(f"Bias b1={b1} is not below rho={rc.rho}")

    margin = rc.rho - b1
    eta0 = _eta(rc, 0)
    eta1 = _eta(rc, 1)
    gamma_max = UNBOUNDED if eta1 == 0.0 else 2.0 * margin / (rc.L_V * eta1)

    dc = DerivedConstants(
        b0=b0,
        b1=b1,
        eta0=eta0,
        eta1=eta1,
        gamma_max=gamma_max,
        B=2.0 * b0 / margin,
        V_bar=V_bar,
        rho_margin=margin,
        L_V=rc.L_V,
    )
    logger.info(
        f"derived constants pair:{rc.pair or 'unset'};b0:{b0};b1:{b1};eta0:{eta0};"
        f"eta1:{eta1};gamma_max:{ext_str(gamma_max)}"
    )
    return dc


def _ceil(x: float) -> int:
    """Ceiling that ignores floating noise in the ninth decimal."""
    return max(1, math.ceil(round(x, 9)))


def epsilon_budget(dc: DerivedConstants, rc: RegimeConstants, eps: float) -> EpsilonBudget:
    """
    Iteration count and step size for E W(w_R) <= eps under an unbiased oracle.

    The regime is high precision iff eps <= 2 eta0/eta1 (always when eta1 = 0).

    Raises:
        BiasedOracleError: If tau is non-zero
        RegimeUnavailableError: If the low-precision regime is requested by eps but
            gamma_max is unbounded
    """
    if not rc.is_unbiased:
        raise BiasedOracleError(f"Epsilon budget needs tau=0, got ({rc.tau0}, {rc.tau1})")
    if not eps > 0.0:
        raise StochApproxError(f"eps must be positive, got {eps}")

    rho = rc.rho
    V_bar = dc.V_bar
    high = dc.eta0 > 0.0 and (dc.eta1 == 0.0 or eps <= 2.0 * dc.eta0 / dc.eta1)

    T_high = 8.0 * V_bar * dc.eta0 * dc.L_V / (eps**2 * rho**2)
    if is_unbounded(dc.gamma_max):
        if not high:
            raise RegimeUnavailableError("Low-precision regime needs a finite gamma_max")
        T_low = 0.0
    else:
        T_low = 8.0 * V_bar / (float(dc.gamma_max) * eps * rho)  # type: ignore[arg-type]

    T = _ceil(max(T_high, T_low))
    if high:
        gamma = rho * eps / (2.0 * dc.eta0 * dc.L_V)
        regime = "high"
    else:
        gamma = float(dc.gamma_max) / 2.0  # type: ignore[arg-type]
        regime = "low"

    logger.info(f"epsilon budget eps:{eps};T:{T};gamma:{gamma};regime:{regime}")
    return EpsilonBudget(T=T, gamma=gamma, regime=regime)
