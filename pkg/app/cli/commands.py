"""
Commands Module

The batch front-end: ``classify``, ``simulate``, ``sweep`` and ``verify``.
Each command returns a process exit code; :func:`run` parses arguments,
dispatches and maps package errors onto exit codes.

Exit codes:
    classify  0 all Subcritical, 2 any Supercritical, 3 otherwise
    simulate  0 survival, 2 blow-up, 1 numerical failure
    sweep     0 done, 65 bracket check failed
    verify    0 all checks pass, 1 otherwise
    any       64 invalid scenario or unknown suite
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from app.characteristics.diagnostics import blowup_time_bounds
from app.characteristics.integrator import integrate
from app.characteristics.sweep import empirical_threshold
from app.cli.scenario import Scenario
from app.cli.verify import SUITES, run_suite
from app.fields.forces import influence_field
from app.fields.initial_data import offset_family
from app.isothermal.monitor import monitor_invariant_region, rs_fields
from app.isothermal.solver import solution_frame, solve_iso_damped
from app.models.model_spec import ModelKind
from app.thresholds.classifiers import (
    Classification,
    ThresholdQuery,
    Verdict,
    classify,
)
from app.utils.config import get_setting, section_value
from app.utils.errors import NumericalFailure, ScenarioError, ThresholdLabError, ThresholdSearchError
from app.utils.logger import get_logger
from app.utils.writers import flatten_params, write_csv, write_json

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_BLOWUP = 2
EXIT_SUPERCRITICAL = 2
EXIT_UNDECIDED = 3
EXIT_USAGE = 64
EXIT_SEARCH = 65

CLASSIFY_COLUMNS = ["x", "rho0", "dxu0", "psi_conv", "d0", "verdict", "sigma_minus", "sigma_plus"]


def _out_dir(out: Optional[str]) -> Path:
    path = Path(out or section_value("output", "directory", "./out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _header(scenario: Scenario) -> Dict[str, Any]:
    params = {"scenario": scenario.name, "seed": scenario.seed, "model": scenario.model.describe()}
    if scenario.model.is_characteristic:
        params.update(flatten_params("integrator", scenario.integrator_config().as_dict()))
        params["n_particles"] = scenario.n_particles
    else:
        params.update(flatten_params("isothermal", scenario.iso_config().as_dict()))
    return params


def _write_metadata(out: Path, scenario: Scenario, command: str, extra: Optional[Dict[str, Any]] = None):
    payload = {"command": command, "scenario": scenario.describe(), "seed": scenario.seed,
               "settings": {section: get_setting(section, {}) for section in ("thresholds", "sweep")}}
    payload.update(extra or {})
    write_json(payload, out / "metadata.json")


def _exit_for(verdicts: List[Verdict]) -> int:
    if verdicts and all(v is Verdict.SUBCRITICAL for v in verdicts):
        return EXIT_OK
    if any(v is Verdict.SUPERCRITICAL for v in verdicts):
        return EXIT_SUPERCRITICAL
    return EXIT_UNDECIDED


def _row(x: float, q: ThresholdQuery, result: Classification) -> Dict[str, Any]:
    return {"x": x, "rho0": q.rho0, "dxu0": q.dxu0, "psi_conv": q.psi_conv, "d0": q.d0,
            "verdict": result.verdict.value, "sigma_minus": result.sigma_minus,
            "sigma_plus": result.sigma_plus}


def classification_table(scenario: Scenario) -> pd.DataFrame:
    """Classify the initial data at every particle (or every cell for the isothermal model)."""
    rows = []
    if scenario.model.is_characteristic:
        psi = scenario.influence()
        ens = scenario.ensemble()
        conv, _ = influence_field(ens.x, ens.m, ens.u, psi)
        for i in range(ens.n):
            q = ThresholdQuery(rho0=float(ens.rho[i]), dxu0=float(ens.d[i] - conv[i]), psi_conv=float(conv[i]))
            rows.append(_row(float(ens.x[i]), q, classify(q, scenario.model, psi.psi_m, psi.psi_M)))
    else:
        cfg = scenario.iso_config()
        state = scenario.iso_initial_state()
        dxu0 = (np.roll(state.u, -1) - np.roll(state.u, 1)) / (2.0 * state.dx)
        dxrho0 = (np.roll(state.rho, -1) - np.roll(state.rho, 1)) / (2.0 * state.dx)
        for i in range(state.x.size):
            q = ThresholdQuery(rho0=float(state.rho[i]), dxu0=float(dxu0[i]), psi_conv=cfg.C)
            rows.append(_row(float(state.x[i]), q, classify(q, scenario.model, dxrho0=float(dxrho0[i]))))
    return pd.DataFrame(rows, columns=CLASSIFY_COLUMNS)


def cmd_classify(scenario: Scenario, out: Optional[str] = None) -> int:
    """
    Write classification.csv and return the verdict exit code.

    Args:
        scenario: Loaded scenario
        out: Output directory

    Returns:
        0 if every point is Subcritical, 2 if any is Supercritical, 3 otherwise
    """
    out_dir = _out_dir(out)
    table = classification_table(scenario)
    write_csv(table, out_dir / "classification.csv", _header(scenario))
    counts = table["verdict"].value_counts().to_dict()
    _write_metadata(out_dir, scenario, "classify", {"verdicts": counts})
    logger.info(f"Classified {len(table)} points: {counts}")
    return _exit_for([Verdict(v) for v in table["verdict"]])


def cmd_simulate(scenario: Scenario, out: Optional[str] = None) -> int:
    """
    Run the scenario and write its outputs.

    Returns:
        0 on survival, 2 on blow-up (report.json written)
    """
    out_dir = _out_dir(out)
    if not scenario.model.is_characteristic:
        return _simulate_isothermal(scenario, out_dir)

    model = scenario.char_model()
    ens0 = scenario.ensemble()
    trajectory, report = integrate(model, ens0, scenario.integrator_config())
    if "trajectory" in scenario.outputs:
        write_csv(trajectory.to_frame(), out_dir / "trajectory.csv", _header(scenario))
    extra: Dict[str, Any] = {"t_final": float(trajectory.times[-1]), "samples": len(trajectory)}
    if report is None:
        _write_metadata(out_dir, scenario, "simulate", extra)
        logger.info(f"Survived to t={trajectory.times[-1]:.6g}")
        return EXIT_OK
    write_json(report.to_dict(), out_dir / "report.json")
    extra["blowup"] = blowup_time_bounds(report, np.asarray(ens0.d))
    _write_metadata(out_dir, scenario, "simulate", extra)
    return EXIT_BLOWUP


def _simulate_isothermal(scenario: Scenario, out_dir: Path) -> int:
    cfg = scenario.iso_config()
    solution = solve_iso_damped(scenario.iso_initial_state(), cfg)
    fields = [rs_fields(state, cfg) for state in solution.states]
    if "fields" in scenario.outputs:
        write_csv(solution_frame(solution, fields), out_dir / "fields.csv", _header(scenario))
    region = monitor_invariant_region(solution.states, cfg)
    _write_metadata(out_dir, scenario, "simulate", {
        "invariant_region": region.as_dict(),
        "mass_drift": solution.mass_drift(),
        "momentum_defect": solution.momentum_defect(),
        "P0": solution.P0,
        "steps": solution.steps,
    })
    return EXIT_OK


def analytic_thresholds(scenario: Scenario, eps: float) -> Dict[str, Optional[float]]:
    """
    Binding analytic thresholds of the offset family.

    Every member has d0 = eps at every particle, so the family is
    subcritical above the largest sigma_+ and supercritical below the
    largest sigma_- over the particles.
    """
    psi = scenario.influence()
    ens = scenario.ensemble(eps)
    sub: List[float] = []
    sup: List[float] = []
    for i in range(ens.n):
        result = classify(ThresholdQuery.from_d0(float(ens.rho[i]), eps), scenario.model, psi.psi_m, psi.psi_M)
        if result.sigma_plus is not None:
            sub.append(result.sigma_plus)
        if result.sigma_minus is not None:
            sup.append(result.sigma_minus)
    if scenario.model.kind is ModelKind.EAP and scenario.model.k > 0.0:
        sup = []
    return {"analytic_sub": max(sub) if sub else None, "analytic_super": max(sup) if sup else None}


def cmd_sweep(scenario: Scenario, eps_lo: Optional[float] = None, eps_hi: Optional[float] = None,
              out: Optional[str] = None) -> int:
    """Search the empirical threshold of the slope-offset family and write sweep.json."""
    if not scenario.is_offset_family():
        raise ScenarioError("sweep needs a characteristic model with slope-offset initial velocity")
    eps_lo = float(scenario.sweep.get("eps_lo", -1.0) if eps_lo is None else eps_lo)
    eps_hi = float(scenario.sweep.get("eps_hi", 1.0) if eps_hi is None else eps_hi)
    out_dir = _out_dir(out)
    model = scenario.char_model()
    family = offset_family(scenario.initial_spec(), scenario.n_particles, scenario.influence())
    result = empirical_threshold(model, family, eps_lo, eps_hi, scenario.integrator_config(),
                                 tol_eps=scenario.sweep.get("tol_eps"), guard=scenario.sweep.get("guard"))
    summary = result.to_dict()
    summary.update(analytic_thresholds(scenario, result.eps_star))
    write_json(summary, out_dir / "sweep.json")
    _write_metadata(out_dir, scenario, "sweep", {"bracket": [eps_lo, eps_hi]})
    return EXIT_OK


def cmd_verify(suite: str, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    """Run a verification suite, print one line per check and optionally write verify.json."""
    if suite != "all" and suite not in SUITES:
        logger.error(f"Unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
        return EXIT_USAGE
    results = run_suite(suite, seed)
    for result in results:
        print(result.line())
    passed = sum(result.passed for result in results)
    print(f"{passed}/{len(results)} checks passed")
    if out:
        write_json({"suite": suite, "passed": passed, "total": len(results),
                    "checks": [result.as_dict() for result in results]}, _out_dir(out) / "verify.json")
    return EXIT_OK if passed == len(results) else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="critical-thresholds",
        description="Classify, simulate and verify critical thresholds of 1D Euler-alignment dynamics")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, text in (("classify", "classify initial data point by point"),
                       ("simulate", "integrate a scenario and write its outputs"),
                       ("sweep", "bisect the slope offset for the empirical threshold")):
        sub = commands.add_parser(name, help=text)
        sub.add_argument("--scenario", required=True, help="scenario YAML file")
        sub.add_argument("--out", default=None, help="output directory")
        sub.add_argument("--seed", type=int, default=None, help="seed echoed into outputs")
        if name == "sweep":
            sub.add_argument("--eps-lo", type=float, default=None, help="offset expected to blow up")
            sub.add_argument("--eps-hi", type=float, default=None, help="offset expected to survive")

    verify = commands.add_parser("verify", help="run the self-check batteries")
    verify.add_argument("suite", nargs="?", default="all", help=f"one of {', '.join(SUITES)} or all")
    verify.add_argument("--out", default=None, help="directory for verify.json")
    verify.add_argument("--seed", type=int, default=None, help="seed of the random states")
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv`` and execute the command.

    Returns:
        The process exit code
    """
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.out, args.seed)
        scenario = Scenario.load(args.scenario, seed=args.seed)
        if args.command == "classify":
            return cmd_classify(scenario, args.out)
        if args.command == "simulate":
            return cmd_simulate(scenario, args.out)
        return cmd_sweep(scenario, args.eps_lo, args.eps_hi, args.out)
    except ThresholdSearchError as e:
        logger.error(f"Threshold search failed: {str(e)}")
        return EXIT_SEARCH
    except ScenarioError as e:
        logger.error(f"Invalid scenario: {str(e)}")
        return EXIT_USAGE
    except NumericalFailure as e:
        logger.error(f"Numerical failure: {str(e)}")
        return EXIT_FAILURE
    except ThresholdLabError as e:
        logger.error(f"Error: {str(e)}")
        return EXIT_FAILURE
