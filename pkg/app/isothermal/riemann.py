"""
Riemann Invariants Module

Transforms between (rho, u) and the Riemann invariants (R, S) of the
pressure system with p = A rho^gamma, together with the characteristic
speeds lambda <= mu.
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from app.utils.errors import RejectedInputError


@dataclass(frozen=True)
class RiemannPair:
    """
    Riemann invariants and characteristic speeds.

    Attributes:
        R: u - sqrt(A) ln rho (gamma = 1) or u - 2 sqrt(A gamma)/(gamma-1) rho^theta
        S: u + sqrt(A) ln rho (gamma = 1) or u + 2 sqrt(A gamma)/(gamma-1) rho^theta
        lam: u - sqrt(A gamma) rho^theta
        mu: u + sqrt(A gamma) rho^theta
    """

    R: np.ndarray
    S: np.ndarray
    lam: np.ndarray
    mu: np.ndarray


def _check_law(A: float, gamma: float):
    if A < 0.0 or not math.isfinite(A):
        raise RejectedInputError(f"pressure coefficient must be finite and nonnegative, got {A}")
    if not gamma >= 1.0:
        raise RejectedInputError(f"gamma must be at least 1, got {gamma}")


def theta(gamma: float) -> float:
    """(gamma - 1)/2."""
    return 0.5 * (gamma - 1.0)


def riemann_forward(rho, u, A: float, gamma: float = 1.0) -> RiemannPair:
    """
    (rho, u) -> (R, S, lambda, mu).

    Args:
        rho: Densities, positive
        u: Velocities
        A: Pressure coefficient
        gamma: Pressure exponent, at least 1

    Returns:
        The Riemann pair
    """
    _check_law(A, gamma)
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(~(rho > 0.0)):
        raise RejectedInputError("Riemann invariants need rho > 0")
    sound = math.sqrt(A * gamma) * rho ** theta(gamma)
    if gamma == 1.0:
        w = math.sqrt(A) * np.log(rho)
    else:
        w = 2.0 * math.sqrt(A * gamma) / (gamma - 1.0) * rho ** theta(gamma)
    return RiemannPair(R=u - w, S=u + w, lam=u - sound, mu=u + sound)


def riemann_inverse(R, S, A: float, gamma: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    (R, S) -> (rho, u).

    For gamma > 1 the pair must satisfy S > R; S = R is the vacuum boundary.

    Returns:
        Tuple (rho, u)
    """
    _check_law(A, gamma)
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    if A == 0.0:
        raise RejectedInputError("without pressure the invariants do not determine rho")
    u = 0.5 * (R + S)
    if gamma == 1.0:
        return np.exp((S - R) / (2.0 * math.sqrt(A))), u
    gap = S - R
    if np.any(~(gap > 0.0)):
        raise RejectedInputError("gamma > 1 needs S > R")
    rho = ((gamma - 1.0) * gap / (4.0 * math.sqrt(A * gamma))) ** (2.0 / (gamma - 1.0))
    return rho, u
