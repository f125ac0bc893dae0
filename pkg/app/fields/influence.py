"""
Influence Function Module

Symmetric, bounded alignment kernels psi with their uniform bounds
0 <= psi_m <= psi(x) <= psi_M.
"""
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.special import hyp2f1

from app.fields.tabulated import TabulatedFunction, load_tabulated
from app.utils.errors import RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


class InfluenceKind(str, Enum):
    CONSTANT = "constant"
    CUCKER_SMALE = "cucker_smale"
    TABULATED = "tabulated"


class InfluenceFunction:
    """
    An alignment kernel psi.

    Three families are supported:

    - ``Constant(c)``: psi = c, so psi_m = psi_M = c (c = 0 is the pure
      Euler-Poisson limit without alignment).
    - ``CuckerSmale(gamma_cs)``: psi(x) = (1 + x^2)^(-gamma_cs), psi_m = 0, psi_M = 1.
    - ``Tabulated(samples)``: linear interpolation of an even sample table,
      constant extrapolation clamped to [psi_m, psi_M].
    """

    def __init__(self, kind: InfluenceKind, psi_m: float, psi_M: float,
                 c: float = 0.0, gamma_cs: float = 1.0,
                 table: Optional[TabulatedFunction] = None):
        self.kind = InfluenceKind(kind)
        self.psi_m = float(psi_m)
        self.psi_M = float(psi_M)
        self.c = float(c)
        self.gamma_cs = float(gamma_cs)
        self.table = table
        if self.psi_m < 0.0:
            raise RejectedInputError(f"psi_m must be nonnegative, got {self.psi_m}")
        if self.psi_M < self.psi_m:
            raise RejectedInputError(f"psi_M={self.psi_M} is below psi_m={self.psi_m}")

    @classmethod
    def constant(cls, c: float) -> "InfluenceFunction":
        if c < 0.0:
            raise RejectedInputError(f"constant influence must be nonnegative, got {c}")
        return cls(InfluenceKind.CONSTANT, psi_m=c, psi_M=c, c=c)

    @classmethod
    def cucker_smale(cls, gamma_cs: float = 1.0) -> "InfluenceFunction":
        if gamma_cs < 0.0:
            raise RejectedInputError(f"Cucker-Smale exponent must be nonnegative, got {gamma_cs}")
        psi_m = 1.0 if gamma_cs == 0.0 else 0.0
        return cls(InfluenceKind.CUCKER_SMALE, psi_m=psi_m, psi_M=1.0, gamma_cs=gamma_cs)

    @classmethod
    def tabulated(cls, x: np.ndarray, values: np.ndarray,
                  psi_m: Optional[float] = None, psi_M: Optional[float] = None) -> "InfluenceFunction":
        """
        Build a kernel from samples.

        Args:
            x: Strictly increasing abscissae
            values: Kernel samples, nonnegative
            psi_m: Declared lower bound (defaults to the sample minimum)
            psi_M: Declared upper bound (defaults to the sample maximum)
        """
        table = TabulatedFunction(x, values, extrapolation="constant")
        low, high = table.bounds()
        if low < 0.0:
            raise RejectedInputError("tabulated influence function takes negative values")
        psi_m = low if psi_m is None else float(psi_m)
        psi_M = high if psi_M is None else float(psi_M)
        if low < psi_m or high > psi_M:
            raise RejectedInputError(
                f"samples span [{low}, {high}], outside declared bounds [{psi_m}, {psi_M}]")
        probe = np.linspace(-abs(table.x).max(), abs(table.x).max(), 257)
        if not table.is_even(atol=1e-10, samples=probe):
            raise RejectedInputError("tabulated influence function is not symmetric")
        return cls(InfluenceKind.TABULATED, psi_m=psi_m, psi_M=psi_M, table=table)

    @classmethod
    def from_file(cls, path: Union[str, Path], **bounds) -> "InfluenceFunction":
        x, values = load_tabulated(path)
        return cls.tabulated(x, values, **bounds)

    @classmethod
    def from_spec(cls, spec: Dict[str, Any]) -> "InfluenceFunction":
        """
        Build a kernel from a scenario section.

        Args:
            spec: ``{"kind": "constant", "c": 1}``, ``{"kind": "cucker_smale",
                "gamma_cs": 1}`` or ``{"kind": "tabulated", "path": ...}``

        Returns:
            The influence function
        """
        kind = str(spec.get("kind", "")).lower()
        if kind == InfluenceKind.CONSTANT.value:
            return cls.constant(float(spec.get("c", 1.0)))
        if kind == InfluenceKind.CUCKER_SMALE.value:
            return cls.cucker_smale(float(spec.get("gamma_cs", 1.0)))
        if kind == InfluenceKind.TABULATED.value:
            if "path" not in spec:
                raise RejectedInputError("tabulated influence function needs a 'path'")
            bounds = {key: spec[key] for key in ("psi_m", "psi_M") if key in spec}
            return cls.from_file(spec["path"], **bounds)
        raise RejectedInputError(f"unknown influence function kind {spec.get('kind')!r}")

    def __call__(self, dx) -> np.ndarray:
        dx = np.asarray(dx, dtype=float)
        if self.kind is InfluenceKind.CONSTANT:
            return np.full(dx.shape, self.c)
        if self.kind is InfluenceKind.CUCKER_SMALE:
            base = 1.0 + dx * dx
            if self.gamma_cs == 1.0:
                return 1.0 / base
            return base ** (-self.gamma_cs)
        return np.clip(self.table(dx), self.psi_m, self.psi_M)

    def primitive(self, dx) -> np.ndarray:
        """
        The odd antiderivative Psi(x) = int_0^x psi, so Psi(0) = 0.

        Cucker-Smale kernels use int_0^x (1 + s^2)^-g ds = x 2F1(1/2, g; 3/2; -x^2).
        """
        dx = np.asarray(dx, dtype=float)
        if self.kind is InfluenceKind.CONSTANT:
            return self.c * dx
        if self.kind is InfluenceKind.CUCKER_SMALE:
            if self.gamma_cs == 1.0:
                return np.arctan(dx)
            return dx * hyp2f1(0.5, self.gamma_cs, 1.5, -dx * dx)
        return self.table.integral(dx)

    @property
    def is_constant(self) -> bool:
        return self.kind is InfluenceKind.CONSTANT

    def describe(self) -> Dict[str, Any]:
        info = {"kind": self.kind.value, "psi_m": self.psi_m, "psi_M": self.psi_M}
        if self.kind is InfluenceKind.CONSTANT:
            info["c"] = self.c
        elif self.kind is InfluenceKind.CUCKER_SMALE:
            info["gamma_cs"] = self.gamma_cs
        return info

    def __repr__(self) -> str:
        return f"InfluenceFunction({self.describe()})"
