"""
Characteristic Integrator Module

This module advances a particle ensemble along the characteristic flow of
the EA, EAP and GeneralK models with classical RK4. All particles are
stepped together since the convolutions couple them. The step is halved
whenever a step would change d or rho by more than a fraction ``eta`` of
their size, and a blow-up is certified once d falls below -D_cap, rho
exceeds D_cap, or the step collapses below dt_min.
"""
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.fields.ensemble import STATE_FIELDS, ParticleEnsemble
from app.fields.forces import influence_field, newtonian_field, smooth_field
from app.models.model_spec import CharModel, ModelKind
from app.utils.config import get_setting
from app.utils.errors import NumericalFailure, RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)

X, U, RHO, D, I = range(len(STATE_FIELDS))


class BlowupTrigger(str, Enum):
    D_NEG_CAP = "D_NegCap"
    RHO_CAP = "RhoCap"
    DT_COLLAPSE = "DtCollapse"


@dataclass(frozen=True)
class IntegratorConfig:
    """
    Step control and stopping parameters.

    Attributes:
        dt0: Initial and largest step
        eta: Largest accepted relative change of d and rho per step
        d_cap: Blow-up magnitude cap
        dt_min: Step below which the run is declared a blow-up
        t_max: Horizon
        max_samples: Upper bound on stored trajectory samples
        rho_floor: Density below which beta diagnostics skip a particle
    """

    dt0: float = 1e-3
    eta: float = 0.1
    d_cap: float = 1e8
    dt_min: float = 1e-14
    t_max: float = 10.0
    max_samples: int = 4096
    rho_floor: float = 1e-12

    def __post_init__(self):
        if not (self.dt0 > 0.0 and self.t_max > 0.0 and self.eta > 0.0):
            raise RejectedInputError("dt0, t_max and eta must be positive")
        if not 0.0 < self.dt_min <= self.dt0:
            raise RejectedInputError(f"dt_min={self.dt_min} must lie in (0, dt0]")
        if self.max_samples < 2:
            raise RejectedInputError("at least two trajectory samples are needed")

    @classmethod
    def from_settings(cls, **overrides) -> "IntegratorConfig":
        """Defaults from the ``integrator`` section, then ``overrides``."""
        known = {f.name for f in fields(cls)}
        values = {key: value for key, value in (get_setting("integrator", {}) or {}).items()
                  if key in known}
        values.update({key: value for key, value in overrides.items() if value is not None})
        values = {key: (int(value) if key == "max_samples" else float(value))
                  for key, value in values.items()}
        return cls(**values)

    @property
    def sample_stride(self) -> int:
        """Number of dt0 steps between stored samples."""
        steps = math.ceil(self.t_max / self.dt0 - 1e-9)
        return max(1, math.ceil(steps / (self.max_samples - 1)))

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class BlowupReport:
    """Where and when a run certified blow-up."""

    particle: int
    t_star: float
    trigger: BlowupTrigger
    d_last: float
    rho_last: float

    def to_dict(self) -> Dict[str, Any]:
        return {"particle": int(self.particle), "t_star": float(self.t_star),
                "trigger": self.trigger.value, "d_last": float(self.d_last),
                "rho_last": float(self.rho_last)}


class Trajectory:
    """
    Stored samples of an integration.

    Attributes:
        times: Sample instants, shape (S,)
        states: Stacked states, shape (S, 5, n) in ``STATE_FIELDS`` order
        m: Particle masses
        kind: Model that produced the run
        k: Newtonian strength (0 unless EAP)
    """

    def __init__(self, times: np.ndarray, states: np.ndarray, m: np.ndarray,
                 kind: ModelKind, k: float = 0.0):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.m = np.asarray(m, dtype=float)
        self.kind = kind
        self.k = float(k)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def n(self) -> int:
        return int(self.m.size)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, X, :]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, U, :]

    @property
    def rho(self) -> np.ndarray:
        return self.states[:, RHO, :]

    @property
    def d(self) -> np.ndarray:
        return self.states[:, D, :]

    @property
    def I(self) -> np.ndarray:
        return self.states[:, I, :]

    def beta(self, rho_floor: float = 1e-12) -> np.ndarray:
        """d/rho where rho > rho_floor, NaN elsewhere."""
        rho = self.rho
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(rho > rho_floor, self.d / rho, np.nan)

    def snapshot(self, index: int = -1) -> ParticleEnsemble:
        x, u, rho, d, acc = self.states[index]
        return ParticleEnsemble(x=x, u=u, rho=rho, d=d, m=self.m, I=acc, t=float(self.times[index]))

    def momentum(self) -> np.ndarray:
        return self.u @ self.m

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns t, particle, x, u, rho, d, I."""
        samples, n = len(self), self.n
        frame = pd.DataFrame({
            "t": np.repeat(self.times, n),
            "particle": np.tile(np.arange(n), samples),
        })
        for index, name in enumerate(STATE_FIELDS):
            frame[name] = self.states[:, index, :].reshape(-1)
        return frame


def _derivatives(model: CharModel, m: np.ndarray, state: np.ndarray) -> np.ndarray:
    x, u, rho, d, _ = state
    conv, accel = influence_field(x, m, u, model.psi)
    kind = model.kind
    if kind is ModelKind.EAP:
        accel = accel + newtonian_field(x, m, model.model.k)
        source = -model.model.k * rho
    elif kind in (ModelKind.GENERAL_K, ModelKind.GENERAL_K_REFINED):
        neg_kprime, kpp = smooth_field(x, m, model.potential)
        # u' = +K'*rho, the negative of smooth_accel, so that d' gains +K''*rho
        accel = accel - neg_kprime
        source = kpp
    else:
        source = 0.0
    v = d - conv
    return np.vstack([u, accel, -rho * v, -d * v + source, conv])


def rhs(model: CharModel, ens: ParticleEnsemble) -> np.ndarray:
    """
    Time derivatives of (x, u, rho, d, I) at every particle.

    Args:
        model: Characteristic model
        ens: Current ensemble

    Returns:
        Array of shape (5, n) in ``STATE_FIELDS`` order
    """
    state = ens.state()
    if not np.all(np.isfinite(state)):
        raise RejectedInputError("ensemble state is not finite")
    return _derivatives(model, ens.m, state)


def rk4_step(model: CharModel, m: np.ndarray, state: np.ndarray, dt: float,
             k1: Optional[np.ndarray] = None) -> np.ndarray:
    """One classical RK4 step; ``k1`` may be passed when already known."""
    if k1 is None:
        k1 = _derivatives(model, m, state)
    k2 = _derivatives(model, m, state + 0.5 * dt * k1)
    k3 = _derivatives(model, m, state + 0.5 * dt * k2)
    k4 = _derivatives(model, m, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _relative_change(rate: np.ndarray, value: np.ndarray, dt: float) -> float:
    return float(np.max(np.abs(rate) * dt / np.maximum(1.0, np.abs(value))))


def _cap_crossing(state: np.ndarray, cfg: IntegratorConfig) -> Optional[Tuple[BlowupTrigger, int]]:
    d, rho = state[D], state[RHO]
    if np.min(d) <= -cfg.d_cap:
        return BlowupTrigger.D_NEG_CAP, int(np.argmin(d))
    if np.max(rho) >= cfg.d_cap:
        return BlowupTrigger.RHO_CAP, int(np.argmax(rho))
    return None


def _rejection(state: np.ndarray, ordered: bool) -> Optional[str]:
    """Why a candidate state cannot be accepted, or None."""
    if not np.all(np.isfinite(state)):
        return "non-finite state"
    if np.any(state[RHO] < 0.0):
        return "negative density"
    if ordered and not bool(np.all(np.diff(state[X]) > 0.0)):
        return "crossing"
    return None


def integrate(model: CharModel, ens0: ParticleEnsemble,
              cfg: Optional[IntegratorConfig] = None) -> Tuple[Trajectory, Optional[BlowupReport]]:
    """
    Integrate the ensemble up to ``cfg.t_max`` or until blow-up.

    The step only ever shrinks. Time is tracked as an integer number of
    current steps so that samples land exactly on the grid t0 + j*s*dt0.

    Args:
        model: Characteristic model
        ens0: Initial ensemble, usually from ``sample_initial``
        cfg: Integrator configuration; settings defaults when omitted

    A crossing of neighbouring particles that no step size avoids is a
    blow-up only while some d is negative; with every d nonnegative it raises
    ``NumericalFailure``.

    Returns:
        Tuple of (trajectory, blow-up report or None)
    """
    cfg = cfg or IntegratorConfig.from_settings()
    state = ens0.state()
    if not np.all(np.isfinite(state)):
        raise RejectedInputError("initial ensemble is not finite")
    m = np.array(ens0.m)
    t0 = float(ens0.t)
    ordered = ens0.is_ordered()

    stride = cfg.sample_stride
    total_steps = math.ceil(cfg.t_max / cfg.dt0 - 1e-9)
    level = 0
    ticks = 0
    dt = cfg.dt0

    times: List[float] = [t0]
    states: List[np.ndarray] = [state.copy()]
    report: Optional[BlowupReport] = None
    halvings = 0

    def clock(tick_count: int) -> float:
        return t0 + min(tick_count * dt, cfg.t_max)

    while ticks < total_steps * 2 ** level:
        t = clock(ticks)
        k1 = _derivatives(model, m, state)
        if not np.all(np.isfinite(k1)):
            report = _collapse(state, t, dt, BlowupTrigger.DT_COLLAPSE)
            break

        while (_relative_change(k1[D], state[D], dt) > cfg.eta
               or _relative_change(k1[RHO], state[RHO], dt) > cfg.eta):
            level, ticks, dt = level + 1, ticks * 2, dt * 0.5
            halvings += 1
            if dt < cfg.dt_min:
                break
        if dt < cfg.dt_min:
            report = _collapse(state, t, dt, BlowupTrigger.DT_COLLAPSE)
            break

        step = min(dt, t0 + cfg.t_max - t)
        candidate = rk4_step(model, m, state, step, k1)
        crossing = _cap_crossing(candidate, cfg) if np.all(np.isfinite(candidate)) else None
        if crossing is not None:
            trigger, particle = crossing
            report = BlowupReport(particle=particle, t_star=t + 0.5 * step, trigger=trigger,
                                  d_last=float(state[D, particle]), rho_last=float(state[RHO, particle]))
            break
        reason = _rejection(candidate, ordered)
        if reason is not None:
            level, ticks, dt = level + 1, ticks * 2, dt * 0.5
            halvings += 1
            if dt < cfg.dt_min:
                if reason == "crossing" and float(np.min(state[D])) >= 0.0:
                    # u_x = d - psi*rho >= -psi_M keeps exact characteristics apart
                    raise NumericalFailure(
                        f"particles crossed at t={t:.6g} while every d stayed nonnegative "
                        f"(max rho={float(np.max(state[RHO])):.6g}); the ensemble is under-resolved")
                report = _collapse(state, t, dt, BlowupTrigger.DT_COLLAPSE)
                break
            continue

        state = candidate
        ticks += 1
        if ticks % (stride * 2 ** level) == 0 or ticks >= total_steps * 2 ** level:
            times.append(clock(ticks))
            states.append(state.copy())

    if times[-1] < clock(ticks):
        times.append(clock(ticks))
        states.append(state.copy())

    k = model.model.k if model.kind is ModelKind.EAP else 0.0
    trajectory = Trajectory(np.array(times), np.array(states), m, model.kind, k)
    if report is not None:
        logger.info(f"Blow-up ({report.trigger.value}) at particle {report.particle}, "
                    f"t*={report.t_star:.6g} after {halvings} step halvings")
    else:
        logger.debug(f"Reached t={trajectory.times[-1]:.6g} with {len(trajectory)} samples, "
                     f"{halvings} step halvings")
    return trajectory, report


def _collapse(state: np.ndarray, t: float, dt: float, trigger: BlowupTrigger) -> BlowupReport:
    particle = int(np.argmin(state[D]))
    logger.debug(f"Step collapsed to {dt:.3g} at t={t:.6g}")
    return BlowupReport(particle=particle, t_star=t + 0.5 * dt, trigger=trigger,
                        d_last=float(state[D, particle]), rho_last=float(state[RHO, particle]))
