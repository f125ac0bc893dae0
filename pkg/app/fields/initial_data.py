"""
Initial Data Module

Initial density profiles, initial velocity modes and the equal-mass quantile
sampling that turns them into a particle ensemble.
"""
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.stats import norm

from app.fields.ensemble import ParticleEnsemble
from app.fields.forces import influence_field, primitive_field
from app.fields.influence import InfluenceFunction
from app.fields.tabulated import TabulatedFunction, load_tabulated
from app.utils.errors import RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class DensityKind(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    TABULATED = "tabulated"


class VelocityMode(str, Enum):
    SLOPE_OFFSET = "slope_offset"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class DensityProfile:
    """
    A probability density rho_0.

    Gaussian(center, width) and Uniform(a, b) are normalized by construction;
    a tabulated profile is normalized by its trapezoid integral.
    """

    kind: DensityKind
    center: float = 0.0
    width: float = 1.0
    a: float = 0.0
    b: float = 1.0
    table: Optional[TabulatedFunction] = None

    def __post_init__(self):
        if self.kind is DensityKind.GAUSSIAN and not self.width > 0.0:
            raise RejectedInputError(f"Gaussian width must be positive, got {self.width}")
        if self.kind is DensityKind.UNIFORM and not self.b > self.a:
            raise RejectedInputError(f"uniform support [{self.a}, {self.b}] is empty")
        if self.kind is DensityKind.TABULATED:
            if self.table is None:
                raise RejectedInputError("tabulated density needs samples")
            if np.any(self.table.values < 0.0):
                raise RejectedInputError("tabulated density takes negative values")
            total = self._table_mass()
            if not np.isfinite(total) or total <= 0.0:
                raise RejectedInputError("tabulated density is not normalizable")

    @classmethod
    def gaussian(cls, center: float = 0.0, width: float = 1.0) -> "DensityProfile":
        return cls(DensityKind.GAUSSIAN, center=center, width=width)

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "DensityProfile":
        return cls(DensityKind.UNIFORM, a=a, b=b)

    @classmethod
    def tabulated(cls, x: np.ndarray, values: np.ndarray) -> "DensityProfile":
        return cls(DensityKind.TABULATED, table=TabulatedFunction(x, values, extrapolation="zero"))

    def _table_mass(self) -> float:
        return float(trapezoid(self.table.values, self.table.x))

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is DensityKind.GAUSSIAN:
            return norm.pdf(x, loc=self.center, scale=self.width)
        if self.kind is DensityKind.UNIFORM:
            inside = (x >= self.a) & (x <= self.b)
            return np.where(inside, 1.0 / (self.b - self.a), 0.0)
        return self.table(x) / self._table_mass()

    def quantiles(self, probs: np.ndarray) -> np.ndarray:
        probs = np.asarray(probs, dtype=float)
        if self.kind is DensityKind.GAUSSIAN:
            return norm.ppf(probs, loc=self.center, scale=self.width)
        if self.kind is DensityKind.UNIFORM:
            return self.a + (self.b - self.a) * probs
        cdf = cumulative_trapezoid(self.table.values, self.table.x, initial=0.0) / self._table_mass()
        # flat stretches of the CDF (vacuum) map to their left end
        keep = np.concatenate(([True], np.diff(cdf) > 0.0))
        return np.interp(probs, cdf[keep], self.table.x[keep])

    def describe(self) -> Dict[str, Any]:
        if self.kind is DensityKind.GAUSSIAN:
            return {"kind": self.kind.value, "center": self.center, "width": self.width}
        if self.kind is DensityKind.UNIFORM:
            return {"kind": self.kind.value, "a": self.a, "b": self.b}
        return {"kind": self.kind.value, "samples": int(self.table.x.size)}


@dataclass(frozen=True)
class InitialDataSpec:
    """
    Initial data (rho_0, u_0).

    With ``SLOPE_OFFSET`` the velocity slope is u_0'(x) = -(psi*rho_0)(x) + eps,
    so d_0 = eps at every point and u_0(0) = 0. Sampling integrates the slope
    against the particle measure itself: u_0(x_i) = eps x_i - sum_j m_j
    (Psi(x_i - x_j) - Psi(-x_j)). With ``EXPLICIT`` the velocity is
    given by samples.
    """

    rho0: DensityProfile
    u0_mode: VelocityMode = VelocityMode.SLOPE_OFFSET
    eps: float = 0.0
    u0_table: Optional[TabulatedFunction] = None

    def __post_init__(self):
        if self.u0_mode is VelocityMode.EXPLICIT and self.u0_table is None:
            raise RejectedInputError("explicit velocity mode needs velocity samples")

    def with_offset(self, eps: float) -> "InitialDataSpec":
        """The member of the slope-offset family with offset ``eps``."""
        if self.u0_mode is not VelocityMode.SLOPE_OFFSET:
            raise RejectedInputError("only slope-offset initial data form a family in eps")
        return replace(self, eps=float(eps))

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> "InitialDataSpec":
        """
        Build initial data from a scenario section.

        Args:
            spec: ``{"rho0": {"kind": "gaussian", "center": 0, "width": 1},
                "u0": {"kind": "slope_offset", "eps": 0.1}}``; tabulated
                entries carry a ``path`` to a two-column file

        Returns:
            The initial data description
        """
        rho_spec = dict(spec.get("rho0") or {})
        kind = str(rho_spec.get("kind", "gaussian")).lower()
        if kind == DensityKind.GAUSSIAN.value:
            rho0 = DensityProfile.gaussian(float(rho_spec.get("center", 0.0)), float(rho_spec.get("width", 1.0)))
        elif kind == DensityKind.UNIFORM.value:
            rho0 = DensityProfile.uniform(float(rho_spec.get("a", 0.0)), float(rho_spec.get("b", 1.0)))
        elif kind == DensityKind.TABULATED.value:
            if "path" not in rho_spec:
                raise RejectedInputError("tabulated density needs a 'path'")
            rho0 = DensityProfile.tabulated(*load_tabulated(rho_spec["path"]))
        else:
            raise RejectedInputError(f"unknown density kind {kind!r}")

        u_spec = dict(spec.get("u0") or {})
        mode = str(u_spec.get("kind", VelocityMode.SLOPE_OFFSET.value)).lower()
        if mode == VelocityMode.SLOPE_OFFSET.value:
            return cls(rho0, VelocityMode.SLOPE_OFFSET, eps=float(u_spec.get("eps", 0.0)))
        if mode == VelocityMode.EXPLICIT.value:
            if "path" not in u_spec:
                raise RejectedInputError("explicit velocity needs a 'path'")
            table = TabulatedFunction(*load_tabulated(u_spec["path"]), extrapolation="constant")
            return cls(rho0, VelocityMode.EXPLICIT, u0_table=table)
        raise RejectedInputError(f"unknown velocity mode {mode!r}")

    def describe(self) -> Dict[str, Any]:
        info = {"rho0": self.rho0.describe(), "u0_mode": self.u0_mode.value}
        if self.u0_mode is VelocityMode.SLOPE_OFFSET:
            info["eps"] = self.eps
        return info


def sample_initial(spec: InitialDataSpec, n: int, psi: InfluenceFunction) -> ParticleEnsemble:
    """
    Equal-mass quantile sampling of the initial data.

    Particle i sits at the (i - 1/2)/n quantile of rho_0 and carries mass 1/n.

    Args:
        spec: Initial data
        n: Number of particles, at least 2
        psi: Influence function used for psi*rho_0

    Returns:
        The initial ensemble at t = 0
    """
    if int(n) < 2:
        raise RejectedInputError(f"need at least two particles, got {n}")
    n = int(n)
    probs = (np.arange(n) + 0.5) / n
    x = spec.rho0.quantiles(probs)
    if not np.all(np.isfinite(x)):
        raise RejectedInputError("initial density quantiles are not finite")
    m = np.full(n, 1.0 / n)
    rho = spec.rho0.pdf(x)

    if spec.u0_mode is VelocityMode.SLOPE_OFFSET:
        # u_0 + sum_j m_j Psi(x - x_j) = eps x, whose discrete slope is eps on every gap
        d = np.full(n, spec.eps)
        u = spec.eps * x - (primitive_field(x, m, psi) - float(psi.primitive(-x) @ m))
    else:
        table = spec.u0_table
        u = table(x)
        conv, _ = influence_field(x, m, np.zeros(n), psi)
        slope = np.interp(x, table.x, np.gradient(table.values, table.x))
        d = slope + conv

    logger.debug(f"Sampled {n} particles from {spec.rho0.kind.value} density, min d0={d.min():.6g}")
    return ParticleEnsemble(x=x, u=u, rho=rho, d=d, m=m, I=np.zeros(n))


def offset_family(spec: InitialDataSpec, n: int,
                  psi: InfluenceFunction) -> Callable[[float], ParticleEnsemble]:
    """The one-parameter family eps -> sample_initial(spec.with_offset(eps))."""
    spec.with_offset(spec.eps)

    def build(eps: float) -> ParticleEnsemble:
        return sample_initial(spec.with_offset(eps), n, psi)

    return build
