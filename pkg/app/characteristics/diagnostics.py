"""
Trajectory Diagnostics Module

Checks that a stored trajectory respects the closed-form facts known along
characteristics: conservation of beta = d/rho (shifted by -kt under the
Newtonian force), the implicit formula for 1/rho, asymptotic alignment and
the rough density bound.
"""
import math
from typing import Any, Dict, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from app.characteristics.integrator import BlowupReport, IntegratorConfig, Trajectory
from app.fields.forces import influence_field
from app.fields.influence import InfluenceFunction
from app.models.model_spec import ModelKind
from app.thresholds.roots import riccati_blowup_bounds
from app.utils.errors import RejectedInputError, UnsupportedModelError
from app.utils.logger import get_logger

logger = get_logger(__name__)

_BETA_MODELS = (ModelKind.EA, ModelKind.EAP)


def _require_beta_model(traj: Trajectory, what: str):
    if traj.kind not in _BETA_MODELS:
        raise UnsupportedModelError(f"{what} is only defined for EA and EAP, not {traj.kind.value}")


def beta_residual(traj: Trajectory, rho_floor: Optional[float] = None) -> float:
    """
    max over samples and particles of |beta(t) - (beta_0 - k t)|.

    Particles whose density drops to ``rho_floor`` or below anywhere on the
    trajectory are left out.

    Args:
        traj: Trajectory of an EA or EAP run
        rho_floor: Density floor (settings ``integrator.rho_floor``)

    Returns:
        The largest defect
    """
    _require_beta_model(traj, "beta conservation")
    if rho_floor is None:
        rho_floor = IntegratorConfig.from_settings().rho_floor
    beta = traj.beta(rho_floor)
    keep = np.all(np.isfinite(beta), axis=0)
    excluded = int(traj.n - keep.sum())
    if excluded:
        logger.warning(f"beta residual skips {excluded} particle(s) at or below rho_floor={rho_floor}")
    if not keep.any():
        raise RejectedInputError("no particle stays above the density floor")
    beta = beta[:, keep]
    elapsed = (traj.times - traj.times[0])[:, None]
    expected = beta[0][None, :] - traj.k * elapsed
    return float(np.max(np.abs(beta - expected)))


def _particle(traj: Trajectory, particle: int) -> int:
    if not 0 <= int(particle) < traj.n:
        raise RejectedInputError(f"particle index {particle} outside [0, {traj.n})")
    return int(particle)


def _implicit_terms(traj: Trajectory, particle: int):
    """Elapsed time, I(s), rho_0 and beta_0 of one particle."""
    i = _particle(traj, particle)
    rho0 = float(traj.rho[0, i])
    if not rho0 > 0.0:
        raise RejectedInputError(f"particle {i} starts in vacuum")
    elapsed = traj.times - traj.times[0]
    acc = traj.I[:, i] - traj.I[0, i]
    return elapsed, acc, rho0, float(traj.d[0, i]) / rho0


def implicit_rho_residual(traj: Trajectory, particle: int) -> float:
    """
    Relative defect of the implicit density formula along one characteristic.

    1/rho(t) = e^{-I(t)} (1/rho_0 + int_0^t (beta_0 - k s) e^{I(s)} ds), with
    the integral taken by the trapezoid rule on the stored samples.

    Returns:
        max over samples of |1/rho - rhs| * rho
    """
    _require_beta_model(traj, "the implicit density formula")
    elapsed, acc, rho0, beta0 = _implicit_terms(traj, particle)
    integrand = (beta0 - traj.k * elapsed) * np.exp(acc)
    integral = cumulative_trapezoid(integrand, elapsed, initial=0.0)
    predicted = np.exp(-acc) * (1.0 / rho0 + integral)
    rho = traj.rho[:, int(particle)]
    return float(np.max(np.abs(1.0 / rho - predicted) * rho))


def exact_criterion_margin(traj: Trajectory, particle: int) -> float:
    """
    1/rho_0 + int_0^{beta_0/k} (beta_0 - k s) e^{I(s)} ds for k < 0, beta_0 < 0.

    The density of the particle stays bounded exactly when this is positive.
    The stored horizon must reach beta_0/k, where the integrand vanishes.
    """
    if traj.kind is not ModelKind.EAP or traj.k >= 0.0:
        raise UnsupportedModelError("the exact criterion needs the EAP model with k < 0")
    elapsed, acc, rho0, beta0 = _implicit_terms(traj, particle)
    if beta0 >= 0.0:
        raise RejectedInputError(f"particle {particle} has beta_0={beta0} >= 0; its density is bounded")
    horizon = beta0 / traj.k
    if elapsed[-1] < horizon:
        raise RejectedInputError(f"stored horizon {elapsed[-1]} does not reach beta_0/k={horizon}")
    inside = elapsed < horizon
    s = np.append(elapsed[inside], horizon)
    acc_s = np.append(acc[inside], np.interp(horizon, elapsed, acc))
    integral = float(trapezoid((beta0 - traj.k * s) * np.exp(acc_s), s))
    return 1.0 / rho0 + integral


def rough_density_defect(traj: Trajectory, psi_M: float) -> float:
    """
    max(0, e^{-psi_M t}/rho_0 - 1/rho(t)) over particles with beta_0 >= 0.

    For EA, and for EAP with k < 0, 1/rho(t) >= e^{-psi_M t}/rho_0 holds for
    those particles, so the result is zero up to solver error.
    """
    _require_beta_model(traj, "the rough density bound")
    if traj.k > 0.0:
        raise UnsupportedModelError("the rough density bound needs k <= 0")
    rho0 = traj.rho[0]
    keep = (rho0 > 0.0) & (traj.d[0] >= 0.0)
    if not keep.any():
        return 0.0
    elapsed = (traj.times - traj.times[0])[:, None]
    lower = np.exp(-psi_M * elapsed) / rho0[keep][None, :]
    defect = lower - 1.0 / traj.rho[:, keep]
    return float(max(0.0, np.max(defect)))


def asymptotic_alignment_check(traj: Trajectory, psi: InfluenceFunction,
                               report: Optional[BlowupReport] = None) -> float:
    """
    max_i |d_i(T) - (psi*rho)(x_i(T))| at the last stored sample.

    Equivalently the largest |u_x| at the end of a surviving EA run.
    """
    if report is not None:
        raise RejectedInputError("asymptotic alignment is undefined after a blow-up")
    if traj.kind is not ModelKind.EA:
        raise UnsupportedModelError("asymptotic alignment is checked for the EA model")
    final = traj.states[-1]
    conv, _ = influence_field(final[0], traj.m, final[1], psi)
    return float(np.max(np.abs(final[3] - conv)))


def blowup_time_bounds(report: BlowupReport, d0: np.ndarray) -> Dict[str, Any]:
    """
    Measured blow-up time next to the Riccati candidate bounds of the particle.

    Args:
        report: Blow-up report of a run
        d0: Initial d of every particle

    Returns:
        Mapping with ``t_star``, ``d0`` and, for d0 < 0, ``printed`` (-d0)
        and ``riccati`` (-1/d0)
    """
    d_start = float(np.asarray(d0)[report.particle])
    bounds: Dict[str, Any] = {"particle": int(report.particle), "t_star": report.t_star, "d0": d_start}
    if d_start < 0.0 and math.isfinite(d_start):
        bounds.update(riccati_blowup_bounds(d_start))
        logger.info(f"t*={report.t_star:.6g}; bounds -d0={bounds['printed']:.6g}, "
                    f"-1/d0={bounds['riccati']:.6g}")
    return bounds
