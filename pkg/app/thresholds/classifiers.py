"""
Threshold Classifiers Module

This module decides, point by point, whether initial data lie in the
subcritical region (global smooth solution), the supercritical region
(finite-time blow-up) or neither, for each model of the taxonomy in
``app.models.model_spec``.

Boundary conventions: the EA subcritical condition is d0 >= 0, the EAP one
is strict (d0 > sigma_+), and the isothermal one is non-strict. Points the
available results do not decide are ``INDETERMINATE``; nothing is guessed.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

from app.models.model_spec import Attraction, ModelKind, ModelSpec
from app.thresholds.roots import (
    sigma_minus_eap,
    sigma_minus_eap_refined,
    sigma_plus_eap,
)
from app.utils.config import section_value
from app.utils.errors import RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class Verdict(str, Enum):
    SUBCRITICAL = "Subcritical"
    SUPERCRITICAL = "Supercritical"
    CRITICAL = "Critical"
    INDETERMINATE = "Indeterminate"


class LowerForm(str, Enum):
    """Which subcritical bound the refined general-K classifier uses."""

    DERIVED = "derived"
    PRINTED = "printed"


@dataclass(frozen=True)
class ThresholdQuery:
    """
    Initial data at one point x.

    Attributes:
        rho0: rho_0(x), nonnegative
        dxu0: u_0'(x)
        psi_conv: (psi*rho_0)(x)
        d0: dxu0 + psi_conv
    """

    rho0: float
    dxu0: float
    psi_conv: float

    def __post_init__(self):
        if not (self.rho0 >= 0.0 and math.isfinite(self.rho0)):
            raise RejectedInputError(f"rho0 must be finite and nonnegative, got {self.rho0}")

    @property
    def d0(self) -> float:
        return self.dxu0 + self.psi_conv

    @classmethod
    def from_d0(cls, rho0: float, d0: float, psi_conv: float = 0.0) -> "ThresholdQuery":
        """A query with prescribed d0 (dxu0 is d0 - psi_conv)."""
        return cls(rho0=rho0, dxu0=d0 - psi_conv, psi_conv=psi_conv)


@dataclass(frozen=True)
class Classification:
    """A verdict with the threshold values that produced it."""

    verdict: Verdict
    sigma_plus: Optional[float] = None
    sigma_minus: Optional[float] = None

    def __post_init__(self):
        if (self.sigma_plus is not None and self.sigma_minus is not None
                and self.sigma_minus > self.sigma_plus):
            raise RejectedInputError(
                f"sigma_minus={self.sigma_minus} exceeds sigma_plus={self.sigma_plus}")

    def as_dict(self) -> Dict[str, Any]:
        return {"verdict": self.verdict.value, "sigma_minus": self.sigma_minus,
                "sigma_plus": self.sigma_plus}


def classify_ea(q: ThresholdQuery) -> Classification:
    """Pure alignment: the dichotomy is exactly the sign of d0."""
    d0 = q.d0
    if d0 > 0.0:
        verdict = Verdict.SUBCRITICAL
    elif d0 < 0.0:
        verdict = Verdict.SUPERCRITICAL
    else:
        verdict = Verdict.CRITICAL
    return Classification(verdict, sigma_plus=0.0, sigma_minus=0.0)


def classify_eap(q: ThresholdQuery, k: float, psi_M: float = 1.0,
                 psi_m: Optional[float] = None,
                 psi_exp: Optional[float] = None) -> Classification:
    """
    Alignment with the Newtonian potential K = k|x|/2.

    k > 0 blows up unconditionally where rho0 > 0; in vacuum the EA verdict
    applies. For k < 0 the point is subcritical when d0 >= 0 or d0 > sigma_+,
    supercritical when d0 < sigma_- (refined when psi_m > 0 is given), and
    indeterminate in between.

    Args:
        q: Initial data at the point
        k: Newtonian strength, nonzero
        psi_M: Upper influence bound (enters sigma_+)
        psi_m: Lower influence bound; enables the refined sigma_-
        psi_exp: Exponent bound of the refined sigma_-

    Returns:
        The classification
    """
    if k == 0.0:
        raise RejectedInputError("k = 0 is the pure alignment model; use classify_ea")
    if k > 0.0:
        if q.rho0 > 0.0:
            return Classification(Verdict.SUPERCRITICAL)
        return classify_ea(q)

    sigma_plus = sigma_plus_eap(k, q.rho0, psi_M)
    if psi_m is not None and psi_m > 0.0:
        sigma_minus = sigma_minus_eap_refined(k, q.rho0, psi_m, psi_exp)
    else:
        sigma_minus = sigma_minus_eap(k, q.rho0)
    # the refined root can sit a bisection tolerance above sigma_+
    sigma_minus = min(sigma_minus, sigma_plus)

    d0 = q.d0
    if d0 >= 0.0 or d0 > sigma_plus:
        verdict = Verdict.SUBCRITICAL
    elif d0 < sigma_minus:
        verdict = Verdict.SUPERCRITICAL
    else:
        verdict = Verdict.INDETERMINATE
    return Classification(verdict, sigma_plus=sigma_plus, sigma_minus=sigma_minus)


def classify_general(q: ThresholdQuery, B: float, sign: Attraction) -> Classification:
    """
    Alignment with a smooth potential of one-signed K''.

    Attractive (K'' <= 0): d0 < 0 blows up, nothing else is decided.
    Repulsive (K'' >= 0): d0 >= 0 survives, d0 < -sqrt(B) blows up.
    """
    if not (B >= 0.0 and math.isfinite(B)):
        raise RejectedInputError(f"B must be finite and nonnegative, got {B}")
    sign = Attraction(sign)
    d0 = q.d0
    if sign is Attraction.ATTRACTIVE:
        verdict = Verdict.SUPERCRITICAL if d0 < 0.0 else Verdict.INDETERMINATE
        return Classification(verdict, sigma_minus=0.0)

    sigma_minus = -math.sqrt(B)
    if d0 >= 0.0:
        verdict = Verdict.SUBCRITICAL
    elif d0 < sigma_minus:
        verdict = Verdict.SUPERCRITICAL
    else:
        verdict = Verdict.INDETERMINATE
    return Classification(verdict, sigma_plus=0.0, sigma_minus=sigma_minus)


def refined_bounds(B: float, psi_m: float, psi_M: float,
                   lower_form: LowerForm = LowerForm.DERIVED):
    """
    The two bounds of the refined general-K classifier.

    Returns:
        Tuple (sub_bound, super_bound). ``sub_bound`` is None when
        psi_m^2 < 4B; ``super_bound`` is (psi_m - sqrt(psi_M^2 + 4B))/2.
    """
    super_bound = 0.5 * (psi_m - math.sqrt(psi_M * psi_M + 4.0 * B))
    disc = psi_m * psi_m - 4.0 * B
    if disc < 0.0:
        return None, super_bound
    if LowerForm(lower_form) is LowerForm.DERIVED:
        sub_bound = 0.5 * (psi_m - math.sqrt(disc))
    else:
        sub_bound = -0.5 * (psi_m + math.sqrt(disc))
    return sub_bound, super_bound


def classify_general_refined(q: ThresholdQuery, B: float, psi_m: float, psi_M: float,
                             lower_form: Optional[str] = None) -> Classification:
    """
    Sign-independent thresholds for a smooth potential when psi_m > 0.

    Subcritical if psi_m^2 >= 4B and d0 is at or above the subcritical bound;
    supercritical if d0 < (psi_m - sqrt(psi_M^2 + 4B))/2. ``lower_form``
    selects the subcritical bound: ``"derived"`` (default,
    (psi_m - sqrt(psi_m^2 - 4B))/2) or ``"printed"``
    (-(psi_m + sqrt(psi_m^2 - 4B))/2). The printed bound can fall below the
    supercritical one; points where both regions claim d0 are indeterminate.

    Args:
        q: Initial data at the point
        B: ||K''||_inf
        psi_m: Lower influence bound, positive
        psi_M: Upper influence bound
        lower_form: ``"derived"`` or ``"printed"``; settings default

    Returns:
        The classification
    """
    if not psi_m > 0.0:
        raise RejectedInputError(f"the refined classifier needs psi_m > 0, got {psi_m}; use classify_general")
    if psi_M < psi_m or B < 0.0:
        raise RejectedInputError(f"need psi_M >= psi_m and B >= 0, got psi_m={psi_m}, psi_M={psi_M}, B={B}")
    if lower_form is None:
        lower_form = section_value("thresholds", "refined_lower_form", LowerForm.DERIVED.value)
    sub_bound, super_bound = refined_bounds(B, psi_m, psi_M, LowerForm(lower_form))

    d0 = q.d0
    is_sub = sub_bound is not None and d0 >= sub_bound
    is_super = d0 < super_bound
    if is_sub and is_super:
        logger.warning(f"d0={d0} satisfies both refined bounds ({sub_bound}, {super_bound}); reporting Indeterminate")
        verdict = Verdict.INDETERMINATE
    elif is_sub:
        verdict = Verdict.SUBCRITICAL
    elif is_super:
        verdict = Verdict.SUPERCRITICAL
    else:
        verdict = Verdict.INDETERMINATE

    if sub_bound is not None and sub_bound < super_bound:
        return Classification(verdict, sigma_plus=None, sigma_minus=None)
    return Classification(verdict, sigma_plus=sub_bound, sigma_minus=super_bound)


def classify_isothermal(dxu0: float, dxrho0: float, rho0: float,
                        A: float, C: float) -> Classification:
    """
    Isothermal pressure with constant influence C and damping.

    Subcritical iff u_0' >= -C + sqrt(A)|rho_0'/rho_0|, i.e. r_0 >= 0 and
    s_0 >= 0. No supercritical result is available, so everything else is
    indeterminate.
    """
    if not rho0 > 0.0:
        raise RejectedInputError(f"the isothermal classifier needs rho0 > 0, got {rho0}")
    if A < 0.0 or C <= 0.0:
        raise RejectedInputError(f"need A >= 0 and C > 0, got A={A}, C={C}")
    bound = -C + math.sqrt(A) * abs(dxrho0 / rho0)
    verdict = Verdict.SUBCRITICAL if dxu0 >= bound else Verdict.INDETERMINATE
    return Classification(verdict, sigma_minus=bound)


def classify(q: ThresholdQuery, model: ModelSpec, psi_m: float = 0.0, psi_M: float = 1.0,
             dxrho0: float = 0.0) -> Classification:
    """
    Dispatch to the classifier of ``model``.

    Args:
        q: Initial data at the point
        model: Model specification
        psi_m: Lower influence bound of the scenario
        psi_M: Upper influence bound of the scenario
        dxrho0: rho_0'(x), used by the isothermal classifier

    Returns:
        The classification
    """
    kind = model.kind
    if kind is ModelKind.EA:
        return classify_ea(q)
    if kind is ModelKind.EAP:
        refined_psi_m = model.psi_m if model.psi_m is not None else psi_m
        return classify_eap(q, model.k, psi_M=model.psi_M if model.psi_M is not None else psi_M,
                            psi_m=refined_psi_m if refined_psi_m > 0.0 else None)
    if kind is ModelKind.GENERAL_K:
        return classify_general(q, model.B, model.sign)
    if kind is ModelKind.GENERAL_K_REFINED:
        return classify_general_refined(q, model.B, model.psi_m, model.psi_M)
    return classify_isothermal(q.dxu0, dxrho0, q.rho0, model.A, model.C)
