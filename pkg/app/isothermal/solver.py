"""
Isothermal Solver Module

This module solves the damped isothermal system

    rho_t + (rho u)_x = 0
    (rho u)_t + (rho u^2 + A rho)_x = -C rho u + C rho P0

on a periodic box with a first-order finite-volume scheme: Rusanov fluxes
for the conservative variables (rho, m = rho u), explicit midpoint in time,
and the initial momentum P0 frozen into the source. It also builds the
initial states used by the invariant-region checks.
"""
import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from app.utils.config import get_setting
from app.utils.errors import NumericalFailure, RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class IsoConfig:
    """
    Parameters of the isothermal run.

    Attributes:
        A: Pressure coefficient (p = A rho)
        gamma: Pressure exponent; the solver needs gamma = 1
        C: Constant influence psi = C
        L: Box length, cells cover [-L/2, L/2)
        nx: Number of cells
        T: Final time
        cfl: Courant number
        rho_min: Density below which the run aborts
        store_every: Time between stored snapshots
        P0: Frozen momentum; taken from the initial state when None
    """

    A: float = 1.0
    gamma: float = 1.0
    C: float = 2.0
    L: float = 40.0
    nx: int = 512
    T: float = 10.0
    cfl: float = 0.4
    rho_min: float = 1e-10
    store_every: float = 0.5
    P0: Optional[float] = None

    def __post_init__(self):
        if self.A < 0.0 or self.C <= 0.0:
            raise RejectedInputError(f"need A >= 0 and C > 0, got A={self.A}, C={self.C}")
        if self.gamma < 1.0:
            raise RejectedInputError(f"gamma must be at least 1, got {self.gamma}")
        if self.L <= 0.0 or self.nx < 3 or self.T < 0.0:
            raise RejectedInputError("need L > 0, nx >= 3 and T >= 0")
        if not 0.0 < self.cfl <= 1.0:
            raise RejectedInputError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.store_every <= 0.0:
            raise RejectedInputError("store_every must be positive")

    @classmethod
    def from_settings(cls, **overrides) -> "IsoConfig":
        """Defaults from the ``isothermal`` section, then ``overrides``."""
        known = {f.name for f in fields(cls)}
        values = {key: value for key, value in (get_setting("isothermal", {}) or {}).items()
                  if key in known}
        values.update({key: value for key, value in overrides.items() if value is not None})
        values = {key: (int(value) if key == "nx" else float(value))
                  for key, value in values.items() if value is not None}
        return cls(**values)

    @property
    def dx(self) -> float:
        return self.L / self.nx

    def grid(self) -> np.ndarray:
        """Cell centers of the periodic box."""
        return -0.5 * self.L + (np.arange(self.nx) + 0.5) * self.dx

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class IsoState:
    """Cell averages at one instant."""

    x: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        for name in ("x", "rho", "u"):
            values = np.array(getattr(self, name), dtype=float)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if not (self.x.shape == self.rho.shape == self.u.shape and self.x.ndim == 1):
            raise RejectedInputError("grid, density and velocity must be 1D arrays of one length")
        if np.any(~(self.rho > 0.0)):
            raise RejectedInputError("isothermal states need rho > 0 everywhere")

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def mass(self) -> float:
        return float(np.sum(self.rho) * self.dx)

    def momentum(self) -> float:
        return float(np.sum(self.rho * self.u) * self.dx)


# Initial state builders

def sech_density(x: np.ndarray, width: float = 1.0, background: float = 1e-3) -> np.ndarray:
    """
    Normalized (1 - background) sech(x/width) plus a uniform background.

    |rho_x/rho| <= 1/width everywhere, so the subcritical condition can hold
    on the whole box.
    """
    if width <= 0.0 or not 0.0 <= background < 1.0:
        raise RejectedInputError("need width > 0 and background in [0, 1)")
    profile = 1.0 / np.cosh(x / width)
    dx = float(x[1] - x[0])
    profile = profile / (np.sum(profile) * dx)
    uniform = np.full_like(x, 1.0 / (x.size * dx))
    return (1.0 - background) * profile + background * uniform


def gaussian_bump(x: np.ndarray, background: float = 1.0, amplitude: float = 0.5,
                  width: float = 1.0) -> np.ndarray:
    """A Gaussian bump on a constant background, normalized to unit mass."""
    if background <= 0.0 or width <= 0.0 or amplitude < 0.0:
        raise RejectedInputError("need background > 0, width > 0 and amplitude >= 0")
    rho = background + amplitude * np.exp(-(x / width) ** 2)
    return rho / (np.sum(rho) * float(x[1] - x[0]))


def sine_velocity(x: np.ndarray, L: float, amplitude: float = 1.0) -> np.ndarray:
    """amplitude * sin(2 pi x / L), periodic on the box."""
    return amplitude * np.sin(2.0 * math.pi * x / L)


def constant_velocity(x: np.ndarray, value: float = 0.0) -> np.ndarray:
    return np.full_like(x, float(value))


def initial_state(cfg: IsoConfig, density: Optional[Dict[str, Any]] = None,
                  velocity: Optional[Dict[str, Any]] = None) -> IsoState:
    """
    Build an initial state from scenario sections.

    Args:
        cfg: Solver configuration (grid)
        density: ``{"kind": "sech", "width": 1}`` or
            ``{"kind": "gaussian_bump", "background": 1, "amplitude": 0.5, "width": 1}``
        velocity: ``{"kind": "sine", "amplitude": 3}`` or ``{"kind": "constant", "value": 0}``

    Returns:
        The state at t = 0
    """
    x = cfg.grid()
    density = dict(density or {"kind": "sech"})
    velocity = dict(velocity or {"kind": "constant"})
    kind = str(density.pop("kind", "sech")).lower()
    if kind == "sech":
        rho = sech_density(x, **{key: float(value) for key, value in density.items()})
    elif kind == "gaussian_bump":
        rho = gaussian_bump(x, **{key: float(value) for key, value in density.items()})
    else:
        raise RejectedInputError(f"unknown isothermal density kind {kind!r}")
    mode = str(velocity.pop("kind", "constant")).lower()
    if mode == "sine":
        u = sine_velocity(x, cfg.L, float(velocity.get("amplitude", 1.0)))
    elif mode == "constant":
        u = constant_velocity(x, float(velocity.get("value", 0.0)))
    else:
        raise RejectedInputError(f"unknown isothermal velocity kind {mode!r}")
    return IsoState(x=x, rho=rho, u=u)


@dataclass
class IsoSolution:
    """
    Stored snapshots of a run and its conservation ledger.

    Attributes:
        states: Snapshots at the stored times
        P0: Frozen momentum used by the source
        mass: Total mass at each snapshot
        momentum: Total momentum at each snapshot
        source: Accumulated momentum added by the source at each snapshot
        steps: Number of time steps taken
    """

    states: List[IsoState]
    P0: float
    mass: List[float]
    momentum: List[float]
    source: List[float]
    steps: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([state.t for state in self.states])

    def mass_drift(self) -> float:
        return float(np.max(np.abs(np.array(self.mass) - self.mass[0])))

    def momentum_defect(self) -> float:
        """max |P(t) - P(0) - accumulated source|."""
        expected = self.momentum[0] + np.array(self.source)
        return float(np.max(np.abs(np.array(self.momentum) - expected)))


def _rusanov_divergence(rho: np.ndarray, m: np.ndarray, A: float, dx: float):
    """Flux differences (F_{i+1/2} - F_{i-1/2})/dx with periodic neighbours."""
    u = m / rho
    flux_rho = m
    flux_m = m * u + A * rho
    speed = np.abs(u) + math.sqrt(A)
    rho_r, m_r = np.roll(rho, -1), np.roll(m, -1)
    flux_rho_r, flux_m_r = np.roll(flux_rho, -1), np.roll(flux_m, -1)
    alpha = np.maximum(speed, np.roll(speed, -1))
    face_rho = 0.5 * (flux_rho + flux_rho_r) - 0.5 * alpha * (rho_r - rho)
    face_m = 0.5 * (flux_m + flux_m_r) - 0.5 * alpha * (m_r - m)
    return (face_rho - np.roll(face_rho, 1)) / dx, (face_m - np.roll(face_m, 1)) / dx


def _source(rho: np.ndarray, m: np.ndarray, C: float, P0: float) -> np.ndarray:
    return -C * m + C * rho * P0


def solve_iso_damped(ic: IsoState, cfg: IsoConfig, T: Optional[float] = None) -> IsoSolution:
    """
    Advance the damped isothermal system to time T.

    dt = cfl * dx / max(|u| + sqrt(A)), shortened to land on store times.

    Args:
        ic: Initial state on the grid of ``cfg``
        cfg: Solver configuration; gamma must be 1
        T: Final time (``cfg.T`` when omitted)

    Returns:
        Snapshots every ``cfg.store_every`` plus the final state, and the ledger
    """
    if cfg.gamma != 1.0:
        raise RejectedInputError(f"the finite-volume solver handles gamma = 1 only, got {cfg.gamma}")
    if ic.x.size != cfg.nx or not math.isclose(ic.dx, cfg.dx, rel_tol=1e-9):
        raise RejectedInputError("initial state does not live on the configured grid")
    T = cfg.T if T is None else float(T)
    dx = cfg.dx
    rho = ic.rho.copy()
    m = ic.rho * ic.u
    P0 = ic.momentum() if cfg.P0 is None else float(cfg.P0)

    t = float(ic.t)
    t_end = t + T
    next_store = min(t + cfg.store_every, t_end)
    applied = 0.0
    solution = IsoSolution(states=[replace(ic)], P0=P0, mass=[ic.mass()],
                           momentum=[ic.momentum()], source=[0.0])
    steps = 0

    while t < t_end - 1e-12 * max(1.0, t_end):
        u = m / rho
        speed = float(np.max(np.abs(u))) + math.sqrt(cfg.A)
        dt = cfg.cfl * dx / speed if speed > 0.0 else next_store - t
        dt = min(dt, next_store - t)

        div_rho, div_m = _rusanov_divergence(rho, m, cfg.A, dx)
        rho_half = rho - 0.5 * dt * div_rho
        m_half = m + 0.5 * dt * (-div_m + _source(rho, m, cfg.C, P0))
        if np.any(~(rho_half > cfg.rho_min)):
            raise NumericalFailure(f"density fell below rho_min={cfg.rho_min} at t={t:.6g}")

        div_rho, div_m = _rusanov_divergence(rho_half, m_half, cfg.A, dx)
        source_half = _source(rho_half, m_half, cfg.C, P0)
        rho = rho - dt * div_rho
        m = m + dt * (-div_m + source_half)
        applied += dt * float(np.sum(source_half)) * dx
        steps += 1
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(m))):
            raise NumericalFailure(f"non-finite state at t={t + dt:.6g}")
        if np.any(~(rho > cfg.rho_min)):
            raise NumericalFailure(f"density fell below rho_min={cfg.rho_min} at t={t + dt:.6g} "
                                   f"(min rho={float(np.min(rho)):.3g})")

        t = next_store if dt == next_store - t else t + dt
        if t >= next_store - 1e-12 * max(1.0, t_end):
            t = next_store
            state = IsoState(x=ic.x, rho=rho, u=m / rho, t=t)
            solution.states.append(state)
            solution.mass.append(state.mass())
            solution.momentum.append(state.momentum())
            solution.source.append(applied)
            next_store = min(t + cfg.store_every, t_end)

    solution.steps = steps
    logger.info(f"Isothermal run reached t={t:.6g} in {steps} steps; "
                f"mass drift {solution.mass_drift():.3g}, momentum defect {solution.momentum_defect():.3g}")
    return solution


def solution_frame(solution: IsoSolution, rs: Optional[List[Any]] = None) -> pd.DataFrame:
    """
    Long table with columns t, x, rho, u, r, s.

    Args:
        solution: Solver output
        rs: Matching list of (r, s) fields; columns are NaN when omitted
    """
    blocks = []
    for index, state in enumerate(solution.states):
        block = pd.DataFrame({"t": np.full(state.x.size, state.t), "x": state.x,
                              "rho": state.rho, "u": state.u})
        block["r"] = rs[index].r if rs is not None else np.nan
        block["s"] = rs[index].s if rs is not None else np.nan
        blocks.append(block)
    return pd.concat(blocks, ignore_index=True)
