"""
Particle Ensemble Module

Lagrangian discretization of (rho, u): each particle carries a position, a
velocity, the pointwise density and threshold variable d = u_x + psi*rho at
its location, a constant mass weight and the accumulated exponent
I(t) = int_0^t (psi*rho)(x_i(s), s) ds.
"""
from dataclasses import dataclass, field, replace
from typing import Dict

import numpy as np

from app.utils.errors import RejectedInputError

# Order of the stacked state used by the integrator
STATE_FIELDS = ("x", "u", "rho", "d", "I")


@dataclass(frozen=True)
class ParticleEnsemble:
    """
    Immutable snapshot of the particle state.

    Attributes:
        x: Positions
        u: Velocities
        rho: Pointwise densities, nonnegative
        d: u_x + psi*rho at each particle
        m: Mass weights summing to one, constant in time
        I: Accumulated int_0^t psi*rho ds
        t: Snapshot time
    """

    x: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    d: np.ndarray
    m: np.ndarray
    I: np.ndarray
    t: float = 0.0
    mass_tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        arrays = {}
        for name in ("x", "u", "rho", "d", "m", "I"):
            values = np.array(getattr(self, name), dtype=float)
            values.setflags(write=False)
            arrays[name] = values
            object.__setattr__(self, name, values)
        n = arrays["x"].size
        if n < 1 or any(values.shape != (n,) for values in arrays.values()):
            raise RejectedInputError("ensemble fields must be 1D arrays of one common length")
        if np.any(arrays["m"] < 0.0):
            raise RejectedInputError("particle masses must be nonnegative")
        if abs(float(arrays["m"].sum()) - 1.0) > self.mass_tol:
            raise RejectedInputError(f"masses sum to {arrays['m'].sum()!r}, expected 1")
        if np.any(arrays["rho"] < 0.0):
            raise RejectedInputError("densities must be nonnegative")

    @property
    def n(self) -> int:
        return int(self.x.size)

    def state(self) -> np.ndarray:
        """Stacked (5, n) array in ``STATE_FIELDS`` order."""
        return np.vstack([self.x, self.u, self.rho, self.d, self.I])

    def with_state(self, state: np.ndarray, t: float) -> "ParticleEnsemble":
        """Return a new snapshot carrying ``state`` at time ``t``; masses are shared."""
        x, u, rho, d, I = state
        return replace(self, x=x, u=u, rho=rho, d=d, I=I, t=float(t))

    def momentum(self) -> float:
        return float(np.dot(self.m, self.u))

    def total_mass(self) -> float:
        return float(self.m.sum())

    def is_ordered(self) -> bool:
        """True while positions are strictly increasing in particle index."""
        return bool(np.all(np.diff(self.x) > 0.0))

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {"x": self.x, "u": self.u, "rho": self.rho, "d": self.d, "m": self.m, "I": self.I}
