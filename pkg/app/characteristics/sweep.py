"""
Empirical Threshold Module

This module locates the critical offset eps* of a one-parameter family of
initial data numerically: the bracket [eps_lo, eps_hi] is checked (blow-up
at eps_lo, survival at eps_hi) and then bisected.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np

from app.characteristics.integrator import IntegratorConfig, integrate
from app.fields.ensemble import ParticleEnsemble
from app.models.model_spec import CharModel
from app.utils.config import section_value
from app.utils.errors import RejectedInputError, ThresholdSearchError
from app.utils.logger import get_logger

logger = get_logger(__name__)

ICFamily = Callable[[float], ParticleEnsemble]


@dataclass(frozen=True)
class EmpiricalThreshold:
    """
    Result of a threshold search.

    Attributes:
        eps_star: Midpoint of the final bracket
        eps_lo: Final offset known to blow up
        eps_hi: Final offset known to survive
        n_runs: Number of integrations performed
    """

    eps_star: float
    eps_lo: float
    eps_hi: float
    n_runs: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def survives(model: CharModel, ens0: ParticleEnsemble, cfg: IntegratorConfig,
             guard: float = 10.0) -> bool:
    """
    True when the run reaches t_max without blow-up and max|d| stays within
    ``guard`` * (psi_M + sqrt(max(B, |k|, 1))).
    """
    trajectory, report = integrate(model, ens0, cfg)
    if report is not None:
        return False
    peak = float(np.max(np.abs(trajectory.d)))
    limit = guard * model.survival_scale
    if peak > limit:
        logger.warning(f"Run reached t_max but max|d|={peak:.6g} exceeds the guard {limit:.6g}; counted as blow-up")
        return False
    return True


def empirical_threshold(model: CharModel, ic_family: ICFamily, eps_lo: float, eps_hi: float,
                        cfg: Optional[IntegratorConfig] = None,
                        tol_eps: Optional[float] = None,
                        guard: Optional[float] = None,
                        workers: Optional[int] = None) -> EmpiricalThreshold:
    """
    Bisect the offset family for the survival boundary.

    Args:
        model: Characteristic model
        ic_family: Maps an offset eps to the initial ensemble
        eps_lo: Offset expected to blow up
        eps_hi: Offset expected to survive
        cfg: Integrator configuration
        tol_eps: Final bracket width (settings ``sweep.tol_eps``)
        guard: Survival magnitude guard (settings ``sweep.guard``)
        workers: Threads for the two bracket probes (settings ``sweep.workers``)

    Returns:
        The empirical threshold
    """
    if not eps_lo < eps_hi:
        raise RejectedInputError(f"need eps_lo < eps_hi, got [{eps_lo}, {eps_hi}]")
    cfg = cfg or IntegratorConfig.from_settings()
    tol_eps = float(section_value("sweep", "tol_eps", 1e-3) if tol_eps is None else tol_eps)
    guard = float(section_value("sweep", "guard", 10.0) if guard is None else guard)
    workers = int(section_value("sweep", "workers", 2) if workers is None else workers)

    def probe(eps: float) -> bool:
        return survives(model, ic_family(eps), cfg, guard)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        lo_future = pool.submit(probe, eps_lo)
        hi_future = pool.submit(probe, eps_hi)
        lo_survives, hi_survives = lo_future.result(), hi_future.result()
    n_runs = 2
    if lo_survives or not hi_survives:
        raise ThresholdSearchError(
            f"[{eps_lo}, {eps_hi}] is not a bracket: eps_lo {'survives' if lo_survives else 'blows up'}, "
            f"eps_hi {'survives' if hi_survives else 'blows up'}")

    lo, hi = float(eps_lo), float(eps_hi)
    while hi - lo > tol_eps:
        mid = 0.5 * (lo + hi)
        alive = probe(mid)
        n_runs += 1
        logger.info(f"Probe eps={mid:.6g}: {'survives' if alive else 'blows up'}")
        if alive:
            hi = mid
        else:
            lo = mid
    result = EmpiricalThreshold(eps_star=0.5 * (lo + hi), eps_lo=lo, eps_hi=hi, n_runs=n_runs)
    logger.info(f"Empirical threshold eps*={result.eps_star:.6g} after {n_runs} runs")
    return result
