"""
Threshold Roots Module

This module computes the EAP threshold curves sigma_-(x) and sigma_+(x) as
functions of the local density rho_0(x). sigma_- of the Euler-Poisson
problem is closed form; sigma_+ and the refined sigma_- are the negative
roots of a transcendental equation and are found by bracketed bisection.
"""
import math
from typing import Callable, Optional

from app.utils.config import section_value
from app.utils.errors import NumericalFailure, RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_ROOT_TOL = 1e-12
DEFAULT_MAX_DOUBLINGS = 64

# Below this |z| the series of exp(z) - 1 - z is more accurate than expm1
_SERIES_CUTOFF = 1e-4
# exp overflows beyond this argument
_EXP_LIMIT = 700.0


def _check_repulsive(k: float, rho0: float):
    if not k < 0.0:
        raise RejectedInputError(f"the EAP thresholds need k < 0, got k={k}")
    if not (rho0 >= 0.0 and math.isfinite(rho0)):
        raise RejectedInputError(f"rho0 must be finite and nonnegative, got {rho0}")


def _exp_excess(z: float) -> float:
    """exp(z) - 1 - z without cancellation for small z; +inf when exp overflows."""
    if abs(z) < _SERIES_CUTOFF:
        return z * z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    if z > _EXP_LIMIT:
        return math.inf
    return math.expm1(z) - z


def threshold_function(sigma: float, k: float, rho0: float, psi_lin: float,
                       psi_exp: Optional[float] = None) -> float:
    """
    g(sigma) = 1/rho0 - (1/psi_lin^2)(k + psi_lin sigma/rho0 - k exp(psi_exp sigma/(k rho0))).

    The bracket is rewritten as -k(e^z - 1 - z) + (psi_lin - psi_exp) sigma/rho0
    with z = psi_exp sigma/(k rho0) so that small psi does not cancel. A
    value of -inf stands for an overflowing exponential.

    Args:
        sigma: Candidate threshold value (negative)
        k: Newtonian strength, negative
        rho0: Local density, positive
        psi_lin: Influence bound in the linear term and the prefactor
        psi_exp: Influence bound in the exponent (defaults to ``psi_lin``)

    Returns:
        g(sigma)
    """
    psi_exp = psi_lin if psi_exp is None else psi_exp
    z = psi_exp * sigma / (k * rho0)
    excess = _exp_excess(z)
    if math.isinf(excess):
        return -math.inf
    bracket = -k * excess + (psi_lin - psi_exp) * sigma / rho0
    return 1.0 / rho0 - bracket / (psi_lin * psi_lin)


def bracketed_negative_root(func: Callable[[float], float], start: float,
                            tol: float = DEFAULT_ROOT_TOL,
                            max_doublings: int = DEFAULT_MAX_DOUBLINGS) -> float:
    """
    Find a root of ``func`` on (-inf, 0] given func(0) > 0.

    The left end starts at ``start`` and doubles until func changes sign;
    the bracket is then bisected to absolute width ``tol``.

    Args:
        func: Scalar function, positive at 0 and eventually negative to the left
        start: Negative first guess for the left bracket end
        tol: Absolute tolerance on the root
        max_doublings: Bracket expansion limit

    Returns:
        The root estimate (the right end of the final bracket, where func >= 0)
    """
    hi = 0.0
    lo = start if start < 0.0 else -1.0
    f_lo = func(lo)
    doublings = 0
    while f_lo > 0.0:
        if doublings >= max_doublings:
            raise NumericalFailure(f"no sign change of the threshold function left of {lo}")
        hi = lo
        lo *= 2.0
        f_lo = func(lo)
        doublings += 1
    if doublings:
        logger.debug(f"Bracket expanded {doublings} times to [{lo}, {hi}]")
    if f_lo == 0.0:
        return lo

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = func(mid)
        if f_mid == 0.0:
            return mid
        if f_mid > 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def _root_settings(tol: Optional[float], max_doublings: Optional[int]):
    if tol is None:
        tol = float(section_value("thresholds", "root_tol", DEFAULT_ROOT_TOL))
    if max_doublings is None:
        max_doublings = int(section_value("thresholds", "max_doublings", DEFAULT_MAX_DOUBLINGS))
    return tol, max_doublings


def sigma_minus_eap(k: float, rho0: float) -> float:
    """-sqrt(-2 k rho0): the sharp Euler-Poisson threshold and the EAP supercritical bound."""
    _check_repulsive(k, rho0)
    if rho0 == 0.0:
        return 0.0
    return -math.sqrt(-2.0 * k * rho0)


def sigma_plus_eap(k: float, rho0: float, psi_bound: float,
                   tol: Optional[float] = None,
                   max_doublings: Optional[int] = None) -> float:
    """
    The EAP subcritical threshold sigma_+.

    sigma_+ is the negative root of
    1/rho0 - (1/psi^2)(k + psi sigma/rho0 - k exp(psi sigma/(k rho0))) = 0
    with psi = psi_M. psi_bound = 0 gives the Euler-Poisson limit -sqrt(-2 k rho0).

    Args:
        k: Newtonian strength, negative
        rho0: Local initial density
        psi_bound: Upper influence bound psi_M, nonnegative
        tol: Absolute root tolerance (settings default 1e-12)
        max_doublings: Bracket expansion limit (settings default 64)

    Returns:
        sigma_+ in (-inf, 0]; 0 in vacuum
    """
    _check_repulsive(k, rho0)
    if not (psi_bound >= 0.0 and math.isfinite(psi_bound)):
        raise RejectedInputError(f"psi bound must be finite and nonnegative, got {psi_bound}")
    if rho0 == 0.0:
        return 0.0
    if psi_bound == 0.0:
        return sigma_minus_eap(k, rho0)
    tol, max_doublings = _root_settings(tol, max_doublings)
    return bracketed_negative_root(
        lambda sigma: threshold_function(sigma, k, rho0, psi_bound),
        sigma_minus_eap(k, rho0), tol=tol, max_doublings=max_doublings)


def sigma_minus_eap_refined(k: float, rho0: float, psi_m: float,
                            psi_exp: Optional[float] = None,
                            tol: Optional[float] = None,
                            max_doublings: Optional[int] = None) -> float:
    """
    The refined EAP supercritical threshold for psi_m > 0.

    Same equation as :func:`sigma_plus_eap` with psi_m in the prefactor and
    the linear term. The exponent uses ``psi_exp``, which defaults to psi_m
    (settings key ``thresholds.psi_exp``). With psi_m = psi_M = psi_exp the
    refined sigma_- equals sigma_+.

    Args:
        k: Newtonian strength, negative
        rho0: Local initial density
        psi_m: Lower influence bound, positive
        psi_exp: Influence bound in the exponent
        tol: Absolute root tolerance
        max_doublings: Bracket expansion limit

    Returns:
        The refined sigma_- in (-inf, 0]; 0 in vacuum
    """
    _check_repulsive(k, rho0)
    if not (psi_m > 0.0 and math.isfinite(psi_m)):
        raise RejectedInputError(f"the refined threshold needs psi_m > 0, got {psi_m}")
    if psi_exp is None:
        configured = section_value("thresholds", "psi_exp", None)
        psi_exp = psi_m if configured is None else float(configured)
    if not psi_exp > 0.0:
        raise RejectedInputError(f"psi_exp must be positive, got {psi_exp}")
    if psi_exp != psi_m:
        logger.warning(f"Refined sigma_- uses psi_exp={psi_exp} in the exponent and psi_m={psi_m} elsewhere")
    if rho0 == 0.0:
        return 0.0
    tol, max_doublings = _root_settings(tol, max_doublings)
    return bracketed_negative_root(
        lambda sigma: threshold_function(sigma, k, rho0, psi_m, psi_exp),
        sigma_minus_eap(k, rho0), tol=tol, max_doublings=max_doublings)


def general_upper_bound(B: float, psi_M: float) -> float:
    """(psi_M + sqrt(psi_M^2 + 4B))/2, the uniform bound on positive d for a repulsive K."""
    if B < 0.0 or psi_M < 0.0:
        raise RejectedInputError(f"B and psi_M must be nonnegative, got B={B}, psi_M={psi_M}")
    return 0.5 * (psi_M + math.sqrt(psi_M * psi_M + 4.0 * B))


def riccati_blowup_bounds(d0: float) -> dict:
    """
    Candidate upper bounds on the blow-up time of d' <= -d^2 from d0 < 0.

    ``printed`` is -d0; ``riccati`` is -1/d0, the time at which the comparison
    solution d0/(1 + d0 t) diverges. Both are reported; neither is enforced.
    """
    if not d0 < 0.0:
        raise RejectedInputError(f"blow-up bounds need d0 < 0, got {d0}")
    return {"printed": -d0, "riccati": -1.0 / d0}
