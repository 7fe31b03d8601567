"""Constant propagation through compression."""

import math
from dataclasses import dataclass, replace
from typing import Optional

from ..config import SUPPORTED_PLACEMENTS
from ..core.models import UNBOUNDED, Extended, RegimeConstants, is_unbounded
from ..errors import HypothesisViolatedError
from ..logger import setup_logger
from .operators import CompressorProfile

logger = setup_logger(__name__)


@dataclass(frozen=True)
class PropagationExtras:
    """
    Inputs a propagation rule needs beyond the profile and the constants.

    Free parameters left as None default to UNBOUNDED when the bias constants
    are zero and to 1 otherwise.

    Attributes:
        zeta: Free parameter of the perturbed-iterate rule
        zeta1: First free parameter of the contractive rule
        zeta2: Second free parameter of the contractive rule
        L_h: Lipschitz constant of the mean field (perturbed iterate)
        L_EH: Lipschitz constant of the conditional mean of H (perturbed iterate)
        gamma_bar: Constant step size (low precision)
        rule: "contractive" or "unbiased" for the field placement; picked from
            the profile when None (unbiased first)
    """

    zeta: Optional[Extended] = None
    zeta1: Optional[Extended] = None
    zeta2: Optional[Extended] = None
    L_h: Optional[float] = None
    L_EH: Optional[float] = None
    gamma_bar: Optional[float] = None
    rule: Optional[str] = None


def _default_zeta(zeta: Optional[Extended], unbiased: bool) -> Extended:
    if zeta is None:
        return UNBOUNDED if unbiased else 1.0
    if not is_unbounded(zeta) and not float(zeta) > 0.0:  # type: ignore[arg-type]
        raise HypothesisViolatedError(f"Free parameter must be positive, got {zeta}")
    return zeta


def _one_plus(zeta: Extended) -> Extended:
    """Return 1 + zeta."""
    return UNBOUNDED if is_unbounded(zeta) else 1.0 + float(zeta)  # type: ignore[arg-type]


def _one_plus_inverse(zeta: Extended) -> float:
    """Return 1 + 1/zeta (equal to 1 for an unbounded zeta)."""
    return 1.0 if is_unbounded(zeta) else 1.0 + 1.0 / float(zeta)  # type: ignore[arg-type]


def _times(factor: Extended, value: float) -> float:
    """Extended product with 0 * inf = 0; a non-zero value times inf is rejected."""
    if value == 0.0:
        return 0.0
    if is_unbounded(factor):
        raise HypothesisViolatedError(
            f"Unbounded free parameter multiplies non-zero constant {value}"
        )
    return float(factor) * value  # type: ignore[arg-type]


def _contractive(
    profile: CompressorProfile,
    rc: RegimeConstants,
    extras: PropagationExtras,
) -> RegimeConstants:
    if profile.contractive_delta is None:
        raise HypothesisViolatedError("Contractive rule needs a contractive_delta certificate")
    q = 1.0 - profile.contractive_delta
    z1 = _default_zeta(extras.zeta1, rc.is_unbiased)
    z2 = _default_zeta(extras.zeta2, rc.is_unbiased)
    taus = (rc.tau0, rc.tau1)
    c_h = (rc.c_h0, rc.c_h1)
    sigma2 = (rc.sigma2_0, rc.sigma2_1)

    new_tau = []
    new_sigma2 = []
    for ell in (0, 1):
        tau = (
            _times(_one_plus(z1), taus[ell])
            + _times(_one_plus(z2), taus[ell]) * _one_plus_inverse(z1) * q
            + _one_plus_inverse(z2) * _one_plus_inverse(z1) * q * c_h[ell]
            + _one_plus_inverse(z1) * q * sigma2[ell]
        )
        var = q * (_times(_one_plus(z2), taus[ell]) + _one_plus_inverse(z2) * c_h[ell]) + q * sigma2[ell]
        new_tau.append(tau)
        new_sigma2.append(var)

    if profile.deterministic and rc.sigma2_0 == 0.0 and rc.sigma2_1 == 0.0:
        # deterministic compressor of a noiseless field
        new_sigma2 = [0.0, 0.0]
    return replace(
        rc,
        tau0=new_tau[0],
        tau1=new_tau[1],
        sigma2_0=new_sigma2[0],
        sigma2_1=new_sigma2[1],
    )


def _unbiased(profile: CompressorProfile, rc: RegimeConstants) -> RegimeConstants:
    if profile.unbiased_omega is None:
        raise HypothesisViolatedError("Unbiased rule needs an unbiased_omega certificate")
    omega = profile.unbiased_omega
    return replace(
        rc,
        sigma2_0=(1.0 + omega) * rc.sigma2_0 + 2.0 * omega * (rc.c_h0 + rc.tau0),
        sigma2_1=(1.0 + omega) * rc.sigma2_1 + 2.0 * omega * (rc.c_h1 + rc.tau1),
    )


def _perturbed(
    profile: CompressorProfile,
    rc: RegimeConstants,
    extras: PropagationExtras,
) -> RegimeConstants:
    if profile.uniform_kappa is None:
        raise HypothesisViolatedError("Perturbed-iterate rule needs a uniform_kappa certificate")
    if rc.tau1 != 0.0 or rc.sigma2_1 != 0.0:
        raise HypothesisViolatedError(
            f"Perturbed-iterate rule needs tau1 = sigma2_1 = 0, got {rc.tau1}, {rc.sigma2_1}"
        )
    if extras.L_h is None or extras.L_EH is None:
        raise HypothesisViolatedError("Perturbed-iterate rule needs L_h and L_EH")
    kappa = profile.uniform_kappa
    zeta = _default_zeta(extras.zeta, rc.tau0 == 0.0)
    return replace(
        rc,
        tau0=_times(_one_plus(zeta), rc.tau0) + _one_plus_inverse(zeta) * extras.L_h**2 * kappa,
        tau1=0.0,
        sigma2_0=rc.sigma2_0 + extras.L_EH**2 * kappa,
        sigma2_1=0.0,
    )


def propagate_constants(
    profile: CompressorProfile,
    placement: str,
    rc: RegimeConstants,
    extras: Optional[PropagationExtras] = None,
    d: Optional[int] = None,
) -> RegimeConstants:
    """
    Transform (tau, sigma2) of an oracle for a compressed scheme.

    placement "field" applies the contractive rule (certificate delta) or the
    unbiased rule (certificate omega); "perturbed" needs kappa, L_h and L_EH;
    "lowprec" needs Delta, gamma_bar and the dimension d. c_h, L_V, rho and
    c_V are unchanged.

    Raises:
        HypothesisViolatedError: When the rule's hypotheses fail
    """
    extras = extras or PropagationExtras()
    if placement not in SUPPORTED_PLACEMENTS:
        supported = ", ".join(SUPPORTED_PLACEMENTS)
        raise ValueError(f"Unsupported placement: {placement}. Supported placements: {supported}")
    for name in ("tau0", "tau1", "sigma2_0", "sigma2_1"):
        if not math.isfinite(getattr(rc, name)):
            raise HypothesisViolatedError(f"Constant {name} must be finite")

    if placement == "field":
        rule = extras.rule or ("unbiased" if profile.unbiased_omega is not None else "contractive")
        if rule == "unbiased":
            result = _unbiased(profile, rc)
        elif rule == "contractive":
            result = _contractive(profile, rc, extras)
        else:
            raise ValueError(f"Unsupported rule: {rule}. Supported rules: contractive, unbiased")
    elif placement == "perturbed":
        result = _perturbed(profile, rc, extras)
    else:
        if d is None:
            raise HypothesisViolatedError("Low-precision rule needs the dimension d")
        result = low_precision_constants(profile, rc, extras, d)

    logger.info(
        f"constants propagated placement:{placement};tau:({result.tau0},{result.tau1});"
        f"sigma2:({result.sigma2_0},{result.sigma2_1})"
    )
    return result


def low_precision_constants(
    profile: CompressorProfile,
    rc: RegimeConstants,
    extras: PropagationExtras,
    d: int,
) -> RegimeConstants:
    """Variance inflation Delta sqrt(d)/(2 gamma_bar) of the low-precision scheme."""
    if profile.linear_Delta is None:
        raise HypothesisViolatedError("Low-precision rule needs a linear_Delta certificate")
    if extras.gamma_bar is None or not extras.gamma_bar > 0.0:
        raise HypothesisViolatedError(f"Low-precision rule needs gamma_bar > 0, got {extras.gamma_bar}")
    factor = profile.linear_Delta * math.sqrt(d) / (2.0 * extras.gamma_bar)
    return replace(
        rc,
        sigma2_0=rc.sigma2_0 + factor * (3.0 + rc.tau0 + rc.c_h0 + rc.sigma2_0),
        sigma2_1=rc.sigma2_1 + factor * (rc.tau1 + rc.c_h1 + rc.sigma2_1),
    )
