"""
Invariant Region Monitor Module

The quantities r = R_x + C and s = S_x + C of the damped isothermal system
stay in [0, max(||r_0||, ||s_0||, 2C)] for subcritical initial data. This
module evaluates r and s on solver snapshots, sweeps a run for their
extrema, and integrates the local two-equation model the bound is proved
for.
"""
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, Tuple

import numpy as np

from app.isothermal.riemann import theta
from app.isothermal.solver import IsoConfig, IsoState
from app.utils.errors import NumericalFailure, RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class RSField:
    """r = u_x - sqrt(A) rho_x/rho + C and s = u_x + sqrt(A) rho_x/rho + C on the grid."""

    r: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class InvariantRegionReport:
    """
    Extrema of r and s over a run.

    Attributes:
        min_rs: Smallest value of r or s over all snapshots
        max_rs: Largest value of r or s over all snapshots
        m0: max(||r_0||_inf, ||s_0||_inf, 2C)
        below: How far min_rs falls under 0 (0 when it does not)
        above: How far max_rs exceeds m0 (0 when it does not)
    """

    min_rs: float
    max_rs: float
    m0: float
    below: float
    above: float

    def within(self, tol: float) -> bool:
        return self.below <= tol and self.above <= tol

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _centered(values: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def rs_fields(state: IsoState, cfg: IsoConfig) -> RSField:
    """r and s by second-order centered differences on the periodic grid."""
    if cfg.gamma != 1.0:
        raise RejectedInputError("r and s are evaluated for the isothermal law gamma = 1")
    dx = state.dx
    ux = _centered(state.u, dx)
    log_slope = _centered(state.rho, dx) / state.rho
    pressure = math.sqrt(cfg.A) * log_slope
    return RSField(r=ux - pressure + cfg.C, s=ux + pressure + cfg.C)


def monitor_invariant_region(series: Iterable[IsoState], cfg: IsoConfig) -> InvariantRegionReport:
    """
    Sweep snapshots for the extrema of r and s.

    The first snapshot is the initial state and fixes m0.
    """
    low, high = math.inf, -math.inf
    m0 = None
    for state in series:
        field = rs_fields(state, cfg)
        if m0 is None:
            m0 = max(float(np.max(np.abs(field.r))), float(np.max(np.abs(field.s))), 2.0 * cfg.C)
        low = min(low, float(np.min(field.r)), float(np.min(field.s)))
        high = max(high, float(np.max(field.r)), float(np.max(field.s)))
    if m0 is None:
        raise RejectedInputError("no snapshots to monitor")
    report = InvariantRegionReport(min_rs=low, max_rs=high, m0=m0,
                                   below=max(0.0, -low), above=max(0.0, high - m0))
    logger.info(f"r, s span [{low:.6g}, {high:.6g}] against [0, {m0:.6g}]")
    return report


def _rs_rates(r: float, s: float, C: float, th: float) -> Tuple[float, float]:
    cross = -0.5 * (1.0 - th) * r * s
    dr = -0.5 * (1.0 + th) * r * r + cross + ((1.0 + 0.5 * th) * r - 0.5 * th * s) * C
    ds = -0.5 * (1.0 + th) * s * s + cross + ((1.0 + 0.5 * th) * s - 0.5 * th * r) * C
    return dr, ds


def rs_local_ode(r0: float, s0: float, C: float, T: float, gamma: float = 1.0,
                 dt: float = 1e-3, cap: float = 1e8) -> Tuple[float, float]:
    """
    RK4 integration of the local pair

        r' = -(1+th)/2 r^2 - (1-th)/2 rs + [(1+th/2) r - th/2 s] C
        s' = -(1+th)/2 s^2 - (1-th)/2 rs + [(1+th/2) s - th/2 r] C

    with th = (gamma - 1)/2; gamma = 1 gives r' = -r^2/2 - rs/2 + Cr.

    Args:
        r0, s0: Initial values
        C: Constant influence
        T: Horizon, nonnegative
        gamma: Pressure exponent
        dt: Step
        cap: |r| or |s| beyond this is a blow-up

    Returns:
        Tuple (r(T), s(T))
    """
    if not all(math.isfinite(value) for value in (r0, s0, C, T)) or T < 0.0 or dt <= 0.0:
        raise RejectedInputError("rs_local_ode needs finite inputs, T >= 0 and dt > 0")
    th = theta(gamma)
    r, s, t = float(r0), float(s0), 0.0
    steps = math.ceil(T / dt - 1e-9)
    for step in range(steps):
        h = min(dt, T - t)
        k1 = _rs_rates(r, s, C, th)
        k2 = _rs_rates(r + 0.5 * h * k1[0], s + 0.5 * h * k1[1], C, th)
        k3 = _rs_rates(r + 0.5 * h * k2[0], s + 0.5 * h * k2[1], C, th)
        k4 = _rs_rates(r + h * k3[0], s + h * k3[1], C, th)
        r += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        s += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        t = (step + 1) * dt if step + 1 < steps else T
        if not (abs(r) < cap and abs(s) < cap):
            raise NumericalFailure(f"local r, s pair blew up near t={t:.6g}")
    return r, s
