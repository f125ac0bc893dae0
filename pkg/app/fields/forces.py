"""
Forces Module

Nonlocal force evaluations on a particle ensemble with pure particle
(Dirac-mass) quadrature: (f * rho)(x_i) = sum_j m_j f(x_i - x_j).

Two layers are provided. The per-index functions (``convolve_influence``,
``alignment_accel``, ...) sum sequentially in particle order and serve as the
reference evaluation. The ``*_field`` functions evaluate every particle at
once with matrix products and are what the integrator calls.
"""
import math
from typing import Tuple

import numpy as np

from app.fields.ensemble import ParticleEnsemble
from app.fields.influence import InfluenceFunction
from app.fields.potentials import SmoothPotential
from app.utils.errors import RejectedInputError


def _check_index(ens: ParticleEnsemble, i: int) -> int:
    if not 0 <= int(i) < ens.n:
        raise RejectedInputError(f"particle index {i} outside [0, {ens.n})")
    return int(i)


def _sequential_sum(terms: np.ndarray) -> float:
    total = 0.0
    for value in terms.tolist():
        total += value
    return total


def convolve_influence(ens: ParticleEnsemble, psi: InfluenceFunction, i: int) -> float:
    """
    (psi * rho)(x_i) = sum_j m_j psi(x_i - x_j), self term included.

    The result lies in [psi_m, psi_M] because the weights sum to one.
    """
    i = _check_index(ens, i)
    return _sequential_sum(ens.m * psi(ens.x[i] - ens.x))


def alignment_accel(ens: ParticleEnsemble, psi: InfluenceFunction, i: int) -> float:
    """sum_j m_j psi(x_i - x_j) (u_j - u_i)."""
    i = _check_index(ens, i)
    return _sequential_sum(ens.m * psi(ens.x[i] - ens.x) * (ens.u - ens.u[i]))


def newtonian_accel(ens: ParticleEnsemble, k: float, i: int) -> float:
    """
    -k (d_x phi)(x_i) with d_x phi(x_i) = (M_<(i) - M_>(i)) / 2.

    Coincident particles (and the particle itself) contribute to neither side,
    which is the half-half split of tied mass.
    """
    i = _check_index(ens, i)
    signed = ens.m * np.sign(ens.x[i] - ens.x)
    return -float(k) * 0.5 * math.fsum(signed.tolist())


def newtonian_accel_sorted(ens: ParticleEnsemble, k: float) -> np.ndarray:
    """All Newtonian accelerations from sorted prefix sums of mass, O(n log n)."""
    return newtonian_field(ens.x, ens.m, k)


def smooth_accel(ens: ParticleEnsemble, K: SmoothPotential, i: int) -> float:
    """-(K' * rho)(x_i) = -sum_j m_j K'(x_i - x_j), with K'(0) = 0."""
    i = _check_index(ens, i)
    return -_sequential_sum(ens.m * K.kprime(ens.x[i] - ens.x))


def convolve_Kpp(ens: ParticleEnsemble, K: SmoothPotential, i: int) -> float:
    """(K'' * rho)(x_i); bounded by B in absolute value."""
    i = _check_index(ens, i)
    return _sequential_sum(ens.m * K.kpp(ens.x[i] - ens.x))


# Whole-ensemble evaluations

def pair_differences(x: np.ndarray) -> np.ndarray:
    """Matrix of x_i - x_j."""
    return x[:, None] - x[None, :]


def influence_field(x: np.ndarray, m: np.ndarray, u: np.ndarray,
                    psi: InfluenceFunction) -> Tuple[np.ndarray, np.ndarray]:
    """
    psi*rho and the alignment acceleration at every particle.

    Args:
        x: Positions
        m: Mass weights
        u: Velocities
        psi: Influence function

    Returns:
        Tuple of (psi*rho, alignment acceleration)
    """
    if psi.is_constant:
        total_mass = m.sum()
        conv = np.full(x.shape, psi.c * total_mass)
        align = psi.c * (np.dot(m, u) - u * total_mass)
        return conv, align
    weights = psi(pair_differences(x))
    conv = weights @ m
    align = weights @ (m * u) - u * conv
    return conv, align


def primitive_field(x: np.ndarray, m: np.ndarray, psi: InfluenceFunction) -> np.ndarray:
    """
    sum_j m_j Psi(x_i - x_j) at every particle, Psi the odd primitive of psi.

    Along the pure alignment flow u_i plus this field is constant in time for
    every particle, so adjacent particles keep their order exactly when the
    sum increases with the index.
    """
    if psi.is_constant:
        return psi.c * (x * m.sum() - np.dot(m, x))
    return psi.primitive(pair_differences(x)) @ m


def newtonian_field(x: np.ndarray, m: np.ndarray, k: float) -> np.ndarray:
    """
    -k d_x phi at every particle via sorted prefix sums.

    Prefix sums are accumulated in extended precision so the result matches
    the direct signed sum to round-off of a single addition.
    """
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    prefix = np.concatenate(([0.0], np.cumsum(m[order].astype(np.longdouble))))
    below = prefix[np.searchsorted(xs, x, side="left")]
    above = prefix[-1] - prefix[np.searchsorted(xs, x, side="right")]
    return (-float(k) * 0.5 * (below - above)).astype(float)


def smooth_field(x: np.ndarray, m: np.ndarray, K: SmoothPotential) -> Tuple[np.ndarray, np.ndarray]:
    """
    -(K'*rho) and (K''*rho) at every particle.

    Returns:
        Tuple of (-K'*rho, K''*rho)
    """
    diffs = pair_differences(x)
    return -(K.kprime(diffs) @ m), K.kpp(diffs) @ m

