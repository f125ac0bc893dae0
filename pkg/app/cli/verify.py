"""
Verification Batteries Module

Self-checks runnable from the command line. Each suite is a list of small,
deterministic checks; a check returns a ``CheckResult`` with the measured
value and the limit it was held to.

Suites:
    invariants  conservation, sign preservation and beta along characteristics
    oracles     brute-force and closed-form cross-checks
    thresholds  properties of the analytic threshold curves
    isothermal  Riemann transforms, solver conservation and the invariant region
"""
import math
import sys
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy.optimize import brentq
from tqdm import tqdm

from app.characteristics.diagnostics import beta_residual
from app.characteristics.integrator import IntegratorConfig, integrate
from app.fields.forces import (
    convolve_influence,
    influence_field,
    newtonian_accel,
    newtonian_accel_sorted,
)
from app.fields.influence import InfluenceFunction
from app.fields.initial_data import DensityProfile, InitialDataSpec, sample_initial
from app.isothermal.monitor import monitor_invariant_region, rs_local_ode
from app.isothermal.riemann import riemann_forward, riemann_inverse
from app.isothermal.solver import IsoConfig, IsoState, initial_state, solve_iso_damped
from app.models.model_spec import CharModel, ModelKind, ModelSpec
from app.thresholds.classifiers import ThresholdQuery, Verdict, classify_ea, classify_general_refined
from app.thresholds.roots import sigma_minus_eap, sigma_minus_eap_refined, sigma_plus_eap
from app.utils.config import section_value
from app.utils.logger import get_logger

logger = get_logger(__name__)

SUITES = ("invariants", "oracles", "thresholds", "isothermal")


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check."""

    suite: str
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"[{status}] {self.suite}/{self.name}: {self.value:.3g} (limit {self.limit:.3g})"
        return f"{text} {self.detail}".rstrip()

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


Check = Callable[[np.random.Generator], CheckResult]


def _at_most(suite: str, name: str, value: float, limit: float, detail: str = "") -> CheckResult:
    return CheckResult(suite, name, bool(value <= limit), float(value), float(limit), detail)


def _small_ea(eps: float, n: int = 24, t_max: float = 2.0):
    psi = InfluenceFunction.cucker_smale(1.0)
    model = CharModel(ModelSpec(ModelKind.EA), psi)
    ens = sample_initial(InitialDataSpec(DensityProfile.gaussian(), eps=eps), n, psi)
    cfg = IntegratorConfig(dt0=1e-2, t_max=t_max)
    return model, ens, cfg


# invariants

def check_momentum(rng: np.random.Generator) -> CheckResult:
    model, ens, cfg = _small_ea(0.1)
    trajectory, _ = integrate(model, ens, cfg)
    drift = float(np.max(np.abs(trajectory.momentum() - trajectory.momentum()[0])))
    return _at_most("invariants", "momentum", drift / cfg.t_max, 1e-10, "per unit time")


def check_sign_preservation(rng: np.random.Generator) -> CheckResult:
    model, ens, cfg = _small_ea(0.05)
    trajectory, report = integrate(model, ens, cfg)
    worst = math.inf if report is not None else max(-float(np.min(trajectory.d)), 0.0)
    return _at_most("invariants", "sign_preservation", worst, 1e-9)


def check_critical_fixed_point(rng: np.random.Generator) -> CheckResult:
    model, ens, cfg = _small_ea(0.0)
    trajectory, _ = integrate(model, ens, cfg)
    return _at_most("invariants", "critical_fixed_point", float(np.max(np.abs(trajectory.d))), 1e-12)


def check_accumulated_influence(rng: np.random.Generator) -> CheckResult:
    model, ens, cfg = _small_ea(0.1)
    trajectory, _ = integrate(model, ens, cfg)
    t = trajectory.times[1:, None]
    ratio = trajectory.I[1:] / t
    excess = max(float(np.max(ratio - model.psi.psi_M)), float(np.max(model.psi.psi_m - ratio)), 0.0)
    return _at_most("invariants", "accumulated_influence", excess, 1e-9)


def check_beta(rng: np.random.Generator) -> CheckResult:
    model, ens, cfg = _small_ea(0.1)
    trajectory, _ = integrate(model, ens, cfg)
    return _at_most("invariants", "beta_ea", beta_residual(trajectory, cfg.rho_floor), 1e-6)


# oracles

def check_brute_force_convolution(rng: np.random.Generator) -> CheckResult:
    psi = InfluenceFunction.cucker_smale(1.0)
    ens = sample_initial(InitialDataSpec(DensityProfile.gaussian(), eps=0.1), 50, psi)
    brute = []
    for i in range(ens.n):
        total = 0.0
        for j in range(ens.n):
            dx = ens.x[i] - ens.x[j]
            total += ens.m[j] * (1.0 / (1.0 + dx * dx))
        brute.append(total)
    per_index = [convolve_influence(ens, psi, i) for i in range(ens.n)]
    exact = float(np.max(np.abs(np.array(per_index) - np.array(brute))))
    field, _ = influence_field(ens.x, ens.m, ens.u, psi)
    vectorized = float(np.max(np.abs(field - np.array(brute))))
    return CheckResult("oracles", "brute_force_convolution", exact == 0.0 and vectorized <= 1e-14,
                       exact, 0.0, f"field deviation {vectorized:.3g}")


def check_newtonian_prefix(rng: np.random.Generator) -> CheckResult:
    psi = InfluenceFunction.constant(1.0)
    ens = sample_initial(InitialDataSpec(DensityProfile.gaussian(), eps=0.0), 800, psi)
    sorted_field = newtonian_accel_sorted(ens, -1.0)
    direct = np.array([newtonian_accel(ens, -1.0, i) for i in range(ens.n)])
    return _at_most("oracles", "newtonian_prefix_sum", float(np.max(np.abs(sorted_field - direct))), 1e-14)


def check_sigma_plus_oracle(rng: np.random.Generator) -> CheckResult:
    expected = brentq(lambda s: 2.0 - s - math.exp(-s), -10.0, -1e-9, xtol=1e-15)
    value = sigma_plus_eap(-1.0, 1.0, 1.0)
    return _at_most("oracles", "sigma_plus_root", abs(value - expected), 1e-10)


def check_riemann_roundtrip(rng: np.random.Generator) -> CheckResult:
    count = int(section_value("verify", "random_states", 1000))
    worst = 0.0
    for gamma in (1.0, 1.4, 2.0):
        rho = rng.uniform(0.05, 5.0, count)
        u = rng.uniform(-3.0, 3.0, count)
        pair = riemann_forward(rho, u, 1.5, gamma)
        back_rho, back_u = riemann_inverse(pair.R, pair.S, 1.5, gamma)
        worst = max(worst, float(np.max(np.abs(back_rho - rho) / rho)), float(np.max(np.abs(back_u - u))))
    return _at_most("oracles", "riemann_roundtrip", worst, 1e-12)


# thresholds

def check_sharpness(rng: np.random.Generator) -> CheckResult:
    worst = 0.0
    for k in (-0.5, -1.0, -3.0):
        for rho0 in (0.1, 0.5, 1.0, 4.0):
            for psi in (0.25, 1.0, 2.0):
                worst = max(worst, abs(sigma_plus_eap(k, rho0, psi)
                                       - sigma_minus_eap_refined(k, rho0, psi, psi)))
    return _at_most("thresholds", "constant_psi_sharpness", worst, 1e-10)


def check_ordering(rng: np.random.Generator) -> CheckResult:
    violations = 0
    for k in (-0.25, -1.0, -4.0):
        for rho0 in np.linspace(0.0, 5.0, 11):
            low, high = sigma_minus_eap(k, rho0), sigma_plus_eap(k, rho0, 1.0)
            violations += int(not low <= high <= 0.0)
    return _at_most("thresholds", "sigma_ordering", violations, 0)


def check_monotone(rng: np.random.Generator) -> CheckResult:
    values = np.array([sigma_plus_eap(-1.0, rho0, 1.0) for rho0 in np.linspace(0.0, 5.0, 26)])
    return _at_most("thresholds", "sigma_plus_monotone", float(np.max(np.diff(values), initial=0.0)), 0.0)


def check_refined_matches_ea(rng: np.random.Generator) -> CheckResult:
    mismatches = 0
    for d0 in np.linspace(0.0, 3.0, 13):
        q = ThresholdQuery.from_d0(1.0, d0, 1.0)
        mismatches += int(classify_general_refined(q, 0.0, 1.0, 1.0, "derived").verdict is not Verdict.SUBCRITICAL
                          or (d0 > 0.0 and classify_ea(q).verdict is not Verdict.SUBCRITICAL))
    return _at_most("thresholds", "refined_reduces_to_ea", mismatches, 0)


# isothermal

def check_constant_state(rng: np.random.Generator) -> CheckResult:
    cfg = IsoConfig(nx=64, L=10.0, T=1.0, store_every=0.5)
    x = cfg.grid()
    rho = np.full(cfg.nx, 1.0 / cfg.L)
    solution = solve_iso_damped(IsoState(x=x, rho=rho, u=np.full(cfg.nx, 0.7)), cfg)
    final = solution.states[-1]
    change = max(float(np.max(np.abs(final.rho - rho))), float(np.max(np.abs(final.u - solution.states[0].u))))
    return _at_most("isothermal", "constant_state", change, 1e-12)


def check_iso_conservation(rng: np.random.Generator) -> CheckResult:
    cfg = IsoConfig(nx=128, L=40.0, T=2.0)
    solution = solve_iso_damped(initial_state(cfg, {"kind": "sech", "width": 1.0},
                                              {"kind": "sine", "amplitude": 3.0}), cfg)
    return _at_most("isothermal", "mass_drift", solution.mass_drift(), 1e-10,
                    f"momentum defect {solution.momentum_defect():.3g}")


def check_invariant_region(rng: np.random.Generator) -> CheckResult:
    cfg = IsoConfig(nx=256, L=40.0, T=2.0)
    solution = solve_iso_damped(initial_state(cfg, {"kind": "sech", "width": 1.0},
                                              {"kind": "sine", "amplitude": 3.0}), cfg)
    report = monitor_invariant_region(solution.states, cfg)
    return _at_most("isothermal", "invariant_region", max(report.below, report.above), 0.05,
                    f"span [{report.min_rs:.4g}, {report.max_rs:.4g}], m0 {report.m0:.4g}")


def check_local_ode(rng: np.random.Generator) -> CheckResult:
    C = 2.0
    worst = 0.0
    for r0 in np.linspace(0.0, 6.0, 20):
        for s0 in np.linspace(0.0, 6.0, 20):
            bound = max(r0, s0, 2.0 * C)
            r, s = rs_local_ode(r0, s0, C, 2.0, dt=1e-2)
            worst = max(worst, -r, -s, r - bound, s - bound)
    return _at_most("isothermal", "local_invariant_region", max(worst, 0.0), 1e-9)


BATTERIES: Dict[str, List[Check]] = {
    "invariants": [check_momentum, check_sign_preservation, check_critical_fixed_point,
                   check_accumulated_influence, check_beta],
    "oracles": [check_brute_force_convolution, check_newtonian_prefix, check_sigma_plus_oracle,
                check_riemann_roundtrip],
    "thresholds": [check_sharpness, check_ordering, check_monotone, check_refined_matches_ea],
    "isothermal": [check_constant_state, check_iso_conservation, check_invariant_region, check_local_ode],
}


def run_suite(suite: str, seed: Optional[int] = None) -> List[CheckResult]:
    """
    Run one suite, or every suite for ``"all"``.

    Args:
        suite: Suite name or ``"all"``
        seed: Seed of the random states (settings ``verify.seed``)

    Returns:
        One result per check; a check that raises is recorded as failed
    """
    names = list(SUITES) if suite == "all" else [suite]
    if any(name not in BATTERIES for name in names):
        raise KeyError(suite)
    seed = int(section_value("verify", "seed", 12345) if seed is None else seed)
    rng = np.random.default_rng(seed)
    checks = [(name, check) for name in names for check in BATTERIES[name]]
    results = []
    for name, check in tqdm(checks, desc="verify", disable=not sys.stderr.isatty()):
        try:
            result = check(rng)
        except Exception as e:
            logger.error(f"Check {check.__name__} raised: {str(e)}")
            result = CheckResult(name, check.__name__.replace("check_", ""), False, math.nan, math.nan,
                                 f"raised {type(e).__name__}: {e}")
        results.append(result)
    passed = sum(result.passed for result in results)
    logger.info(f"verify {suite}: {passed}/{len(results)} checks passed")
    return results
