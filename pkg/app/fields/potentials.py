"""
Interaction Potentials Module

Symmetric interaction potentials K: none, the 1D Newtonian potential
K(x) = k|x|/2, and smooth potentials given through K' and K'' with
B = ||K''||_inf.
"""
import math
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import erf

from app.fields.tabulated import TabulatedFunction, load_tabulated
from app.utils.errors import RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class PotentialKind(str, Enum):
    NONE = "none"
    NEWTONIAN = "newtonian"
    SMOOTH = "smooth"


class InteractionPotential:
    """Base class; ``kind`` tells the force routines which evaluation applies."""

    kind = PotentialKind.NONE

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind.value}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.describe()})"


class NoPotential(InteractionPotential):
    """Pure alignment dynamics."""

    kind = PotentialKind.NONE


class NewtonianPotential(InteractionPotential):
    """
    K(x) = k|x|/2, so K'(x) = (k/2) sgn(x) and K'' = k delta_0.

    k > 0 is attractive, k < 0 repulsive.
    """

    kind = PotentialKind.NEWTONIAN

    def __init__(self, k: float):
        self.k = float(k)
        if not math.isfinite(self.k):
            raise RejectedInputError(f"Newtonian strength must be finite, got {k}")

    def kprime(self, dx) -> np.ndarray:
        return 0.5 * self.k * np.sign(np.asarray(dx, dtype=float))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "k": self.k}


class SmoothPotential(InteractionPotential):
    """
    A potential described by an odd K' and an even, bounded K''.

    Args:
        kprime: Callable evaluating K' on arrays
        kpp: Callable evaluating K'' on arrays
        B: ||K''||_inf; estimated from ``kpp`` on ``probe`` when omitted
        probe: Points used to estimate B and to check parity
    """

    kind = PotentialKind.SMOOTH

    def __init__(self, kprime: Callable[[np.ndarray], np.ndarray],
                 kpp: Callable[[np.ndarray], np.ndarray],
                 B: Optional[float] = None,
                 probe: Optional[np.ndarray] = None,
                 label: str = "custom"):
        self._kprime = kprime
        self._kpp = kpp
        self.label = label
        self.probe = np.linspace(-10.0, 10.0, 2001) if probe is None else np.asarray(probe, dtype=float)
        sampled_B = float(np.max(np.abs(self._kpp(self.probe))))
        self.B = sampled_B if B is None else float(B)
        if not math.isfinite(self.B) or self.B < 0.0:
            raise RejectedInputError(f"B must be a finite nonnegative number, got {self.B}")
        if sampled_B > self.B * (1.0 + 1e-12) + 1e-15:
            raise RejectedInputError(f"sampled |K''| reaches {sampled_B}, above declared B={self.B}")
        kp = np.asarray(self._kprime(self.probe))
        kp_mirror = np.asarray(self._kprime(-self.probe))
        if not np.allclose(kp, -kp_mirror, atol=1e-10 * max(1.0, float(np.max(np.abs(kp)))), rtol=0.0):
            raise RejectedInputError("K' must be odd (K symmetric)")

    def kprime(self, dx) -> np.ndarray:
        dx = np.asarray(dx, dtype=float)
        # K'(0) = 0 removes the self force
        return np.where(dx == 0.0, 0.0, self._kprime(dx))

    def kpp(self, dx) -> np.ndarray:
        return np.asarray(self._kpp(np.asarray(dx, dtype=float)), dtype=float)

    def kpp_sign(self) -> str:
        """``"repulsive"`` if K'' >= 0 on the probe, ``"attractive"`` if <= 0, ``"zero"`` or ``"mixed"``."""
        values = self.kpp(self.probe)
        if np.all(values == 0.0):
            return "zero"
        if np.all(values >= 0.0):
            return "repulsive"
        if np.all(values <= 0.0):
            return "attractive"
        return "mixed"

    @classmethod
    def quadratic(cls, strength: float = 1.0) -> "SmoothPotential":
        """K(x) = strength x^2 / 2: K' linear, K'' constant."""
        return cls(lambda x: strength * np.asarray(x, dtype=float),
                   lambda x: np.full(np.shape(x), float(strength)),
                   B=abs(strength), label="quadratic")

    @classmethod
    def gaussian(cls, B: float, width: float = 1.0, sign: float = 1.0) -> "SmoothPotential":
        """
        K''(x) = sign * B * exp(-x^2/width^2), K' its odd antiderivative.

        sign = +1 gives K'' >= 0 (repulsive label), sign = -1 gives K'' <= 0.
        """
        if width <= 0.0:
            raise RejectedInputError(f"width must be positive, got {width}")
        amplitude = math.copysign(float(B), sign)
        scale = amplitude * width * math.sqrt(math.pi) / 2.0
        return cls(lambda x: scale * erf(np.asarray(x, dtype=float) / width),
                   lambda x: amplitude * np.exp(-(np.asarray(x, dtype=float) / width) ** 2),
                   B=abs(B), label="gaussian")

    @classmethod
    def from_kpp_samples(cls, x: np.ndarray, kpp: np.ndarray,
                         B: Optional[float] = None) -> "SmoothPotential":
        """
        Build K' by integrating tabulated K'' from 0.

        K'' is interpolated linearly and is zero outside the table, so K' is
        held constant there.
        """
        kpp_table = TabulatedFunction(x, kpp, extrapolation="zero")
        if not (kpp_table.x[0] < 0.0 < kpp_table.x[-1]):
            raise RejectedInputError("K'' table must straddle x = 0")
        if not kpp_table.is_even(atol=1e-10, samples=kpp_table.x[kpp_table.x <= -kpp_table.x[0]]):
            raise RejectedInputError("K'' table must be even (K symmetric)")
        integral = cumulative_trapezoid(kpp_table.values, kpp_table.x, initial=0.0)
        integral = integral - np.interp(0.0, kpp_table.x, integral)
        kprime_table = TabulatedFunction(kpp_table.x, integral, extrapolation="constant")
        probe = np.linspace(kpp_table.x[0], kpp_table.x[-1], 4 * kpp_table.x.size + 1)
        probe = probe[np.abs(probe) <= min(-kpp_table.x[0], kpp_table.x[-1])]
        return cls(kprime_table, kpp_table, B=B if B is not None else kpp_table.max_abs(),
                   probe=probe, label="tabulated")

    @classmethod
    def from_kpp_file(cls, path: Union[str, Path], B: Optional[float] = None) -> "SmoothPotential":
        x, values = load_tabulated(path)
        return cls.from_kpp_samples(x, values, B=B)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "B": self.B, "label": self.label}


def potential_from_spec(spec: Optional[Dict[str, Any]]) -> InteractionPotential:
    """
    Build a potential from a scenario section.

    Args:
        spec: ``None``/``{"kind": "none"}``, ``{"kind": "newtonian", "k": -1}``,
            ``{"kind": "smooth", "form": "gaussian", "B": 1, "width": 1, "sign": 1}``,
            ``{"kind": "smooth", "form": "quadratic", "strength": 1}`` or
            ``{"kind": "smooth", "form": "tabulated", "path": ..., "B": ...}``

    Returns:
        The interaction potential
    """
    if not spec:
        return NoPotential()
    kind = str(spec.get("kind", "none")).lower()
    if kind == PotentialKind.NONE.value:
        return NoPotential()
    if kind == PotentialKind.NEWTONIAN.value:
        if "k" not in spec:
            raise RejectedInputError("Newtonian potential needs 'k'")
        return NewtonianPotential(float(spec["k"]))
    if kind == PotentialKind.SMOOTH.value:
        form = str(spec.get("form", "gaussian")).lower()
        if form == "gaussian":
            return SmoothPotential.gaussian(float(spec.get("B", 1.0)), float(spec.get("width", 1.0)),
                                            float(spec.get("sign", 1.0)))
        if form == "quadratic":
            return SmoothPotential.quadratic(float(spec.get("strength", 1.0)))
        if form == "tabulated":
            if "path" not in spec:
                raise RejectedInputError("tabulated K'' needs a 'path'")
            B = spec.get("B")
            return SmoothPotential.from_kpp_file(spec["path"], B=None if B is None else float(B))
        raise RejectedInputError(f"unknown smooth potential form {form!r}")
    raise RejectedInputError(f"unknown potential kind {spec.get('kind')!r}")
