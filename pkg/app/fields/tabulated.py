"""
Tabulated Functions Module

Sampled one-dimensional functions loaded from two-column text files and
evaluated by linear interpolation.
"""
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from app.utils.errors import RejectedInputError
from app.utils.logger import get_logger

logger = get_logger(__name__)


def validate_samples(x: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Check a sample table: matching 1D shapes, finite, strictly increasing x.

    Args:
        x: Abscissae
        values: Function values at ``x``

    Returns:
        The arrays as float64
    """
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if x.ndim != 1 or values.shape != x.shape:
        raise RejectedInputError("tabulated function needs two 1D columns of equal length")
    if x.size < 2:
        raise RejectedInputError("tabulated function needs at least two samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(values))):
        raise RejectedInputError("tabulated function contains non-finite entries")
    if np.any(np.diff(x) <= 0.0):
        raise RejectedInputError("tabulated abscissae must be strictly increasing")
    return x, values


def load_tabulated(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Load a two-column numeric text file ``x value``.

    Args:
        path: File with whitespace or comma separated columns; ``#`` comments allowed

    Returns:
        Tuple of (x, values)
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise RejectedInputError(f"cannot read tabulated function {path}: {e}") from e
    try:
        table = np.loadtxt(text.replace(",", " ").splitlines(), ndmin=2)
    except ValueError as e:
        raise RejectedInputError(f"malformed tabulated function {path}: {e}") from e
    if table.shape[1] != 2:
        raise RejectedInputError(f"{path} must have exactly two columns, found {table.shape[1]}")
    logger.info(f"Loaded {table.shape[0]} samples from {path}")
    return validate_samples(table[:, 0], table[:, 1])


class TabulatedFunction:
    """
    Linear interpolant of a sample table.

    Outside the table the function is either held at the end values
    (``extrapolation="constant"``) or set to zero (``extrapolation="zero"``).
    """

    def __init__(self, x: np.ndarray, values: np.ndarray, extrapolation: str = "constant"):
        if extrapolation not in ("constant", "zero"):
            raise RejectedInputError(f"unknown extrapolation mode {extrapolation!r}")
        self.x, self.values = validate_samples(x, values)
        self.extrapolation = extrapolation

    @classmethod
    def from_file(cls, path: Union[str, Path], extrapolation: str = "constant") -> "TabulatedFunction":
        x, values = load_tabulated(path)
        return cls(x, values, extrapolation)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.extrapolation == "zero":
            return np.interp(points, self.x, self.values, left=0.0, right=0.0)
        return np.interp(points, self.x, self.values)

    def bounds(self) -> Tuple[float, float]:
        """Smallest and largest sampled value (the interpolant stays inside)."""
        low, high = float(self.values.min()), float(self.values.max())
        if self.extrapolation == "zero":
            low, high = min(low, 0.0), max(high, 0.0)
        return low, high

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_even(self, atol: float = 1e-12, samples: Optional[np.ndarray] = None) -> bool:
        probe = self.x if samples is None else np.asarray(samples, dtype=float)
        return bool(np.allclose(self(probe), self(-probe), atol=atol, rtol=0.0))

    def integral(self, points, origin: float = 0.0) -> np.ndarray:
        """
        Exact integral of the interpolant from ``origin`` to each point.

        The interpolant is piecewise linear, so its primitive is piecewise
        quadratic; outside the table it continues with the extrapolated value.
        """
        points = np.asarray(points, dtype=float)
        return self._primitive(points) - self._primitive(np.asarray(origin, dtype=float))

    def _primitive(self, points: np.ndarray) -> np.ndarray:
        x, values = self.x, self.values
        nodes = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(x) * (values[1:] + values[:-1]))))
        left = 0.0 if self.extrapolation == "zero" else values[0]
        right = 0.0 if self.extrapolation == "zero" else values[-1]
        cell = np.clip(np.searchsorted(x, points, side="right") - 1, 0, x.size - 2)
        offset = points - x[cell]
        width = x[cell + 1] - x[cell]
        slope = (values[cell + 1] - values[cell]) / width
        inside = nodes[cell] + values[cell] * offset + 0.5 * slope * offset * offset
        below = left * (points - x[0])
        above = nodes[-1] + right * (points - x[-1])
        return np.where(points < x[0], below, np.where(points > x[-1], above, inside))
