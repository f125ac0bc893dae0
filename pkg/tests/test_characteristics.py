"""
Tests for the characteristic integrator, its diagnostics and the threshold search.
"""
import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from app.characteristics.diagnostics import (
    asymptotic_alignment_check,
    beta_residual,
    blowup_time_bounds,
    exact_criterion_margin,
    implicit_rho_residual,
    rough_density_defect,
)
from app.characteristics.integrator import (
    BlowupReport,
    BlowupTrigger,
    IntegratorConfig,
    integrate,
    rhs,
    rk4_step,
)
from app.characteristics.sweep import EmpiricalThreshold, empirical_threshold, survives
from app.cli.scenario import Scenario
from app.fields.ensemble import ParticleEnsemble
from app.fields.initial_data import DensityProfile, InitialDataSpec, offset_family
from app.fields.potentials import NoPotential, SmoothPotential
from app.models.model_spec import CharModel, ModelKind, ModelSpec
from app.thresholds.roots import sigma_plus_eap
from app.utils.errors import NumericalFailure, RejectedInputError, ThresholdSearchError, UnsupportedModelError

SCENARIOS = Path(__file__).resolve().parent.parent / "config" / "scenarios"


class TestIntegratorConfig:
    """Test suite for step-control settings."""

    def test_from_settings_with_overrides(self):
        cfg = IntegratorConfig.from_settings(t_max=3.0, max_samples=10, dt0=None)
        assert cfg.t_max == 3.0
        assert cfg.max_samples == 10
        assert cfg.dt0 == pytest.approx(1e-3)

    def test_sample_stride(self):
        assert IntegratorConfig(dt0=1e-2, t_max=1.0, max_samples=11).sample_stride == 10
        assert IntegratorConfig(dt0=1e-2, t_max=1.0, max_samples=4096).sample_stride == 1

    def test_rejects_bad_values(self):
        with pytest.raises(RejectedInputError):
            IntegratorConfig(dt0=0.0)
        with pytest.raises(RejectedInputError):
            IntegratorConfig(dt0=1e-3, dt_min=1e-2)


class TestRHS:
    """Test suite for the characteristic right-hand side."""

    def test_ea_fields(self, ea_model, gaussian_spec, cs_psi, make_ensemble):
        ens = make_ensemble(gaussian_spec, cs_psi, n=12)
        rates = rhs(ea_model, ens)
        assert rates.shape == (5, 12)
        np.testing.assert_array_equal(rates[0], ens.u)
        # d = eps everywhere, so d' = -eps (eps - psi*rho) and rho' = -rho (eps - psi*rho)
        np.testing.assert_allclose(rates[3] / rates[2], ens.d / ens.rho)

    def test_eap_source(self, eap_repulsive, uniform_spec, unit_psi, make_ensemble):
        ens = make_ensemble(uniform_spec, unit_psi, n=10)
        rates = rhs(eap_repulsive, ens)
        # psi = 1 gives psi*rho = 1, so d' = -d (d - 1) + rho with k = -1
        expected = -ens.d * (ens.d - 1.0) + ens.rho
        np.testing.assert_allclose(rates[3], expected, atol=1e-14)
        np.testing.assert_allclose(rates[4], 1.0)

    def test_rejects_non_finite(self, ea_model, gaussian_spec, cs_psi, make_ensemble):
        ens = make_ensemble(gaussian_spec, cs_psi, n=6)
        state = ens.state()
        state[1, 0] = np.nan
        with pytest.raises(RejectedInputError):
            rhs(ea_model, ens.with_state(state, 0.0))

    def test_rk4_fourth_order(self, eap_repulsive, uniform_spec, unit_psi, make_ensemble):
        ens = make_ensemble(uniform_spec, unit_psi, n=8)
        state, m = ens.state(), ens.m

        def advance(dt, steps):
            current = state
            for _ in range(steps):
                current = rk4_step(eap_repulsive, m, current, dt)
            return current

        reference = advance(0.0125, 16)
        coarse = np.max(np.abs(advance(0.1, 2) - reference))
        fine = np.max(np.abs(advance(0.05, 4) - reference))
        assert coarse / fine > 10.0


class TestIntegrateEA:
    """Test suite for pure alignment runs."""

    def test_subcritical_survives(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=32, eps=0.1)
        trajectory, report = integrate(ea_model, ens, quick_cfg(t_max=10.0))
        assert report is None
        assert trajectory.times[-1] == pytest.approx(10.0)
        assert np.min(trajectory.d) > 0.0
        assert np.max(trajectory.d) <= cs_psi.psi_M + 1e-6

    def test_supercritical_blows_up(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=32, eps=-0.1)
        trajectory, report = integrate(ea_model, ens, quick_cfg(t_max=20.0))
        assert isinstance(report, BlowupReport)
        assert math.isfinite(report.t_star) and 0.0 < report.t_star <= 10.0
        assert report.trigger in (BlowupTrigger.D_NEG_CAP, BlowupTrigger.RHO_CAP, BlowupTrigger.DT_COLLAPSE)
        assert trajectory.times[-1] <= report.t_star

    def test_critical_fixed_point(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=20, eps=0.0)
        trajectory, report = integrate(ea_model, ens, quick_cfg(t_max=10.0))
        assert report is None
        assert trajectory.times[-1] == pytest.approx(10.0)
        assert np.max(np.abs(trajectory.d)) <= 1e-12
        assert np.all(np.diff(trajectory.x, axis=1) > 0.0)

    def test_small_positive_offset_survives(self, ea_model, gaussian_spec, cs_psi, make_ensemble):
        ens = make_ensemble(gaussian_spec, cs_psi, n=64, eps=9e-4)
        trajectory, report = integrate(ea_model, ens, IntegratorConfig(dt0=1e-2, t_max=30.0))
        assert report is None
        assert np.min(trajectory.d) > 0.0
        assert np.all(np.diff(trajectory.x, axis=1) > 0.0)

    def test_conservation(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=24, eps=0.2)
        trajectory, _ = integrate(ea_model, ens, quick_cfg(t_max=5.0))
        momentum = trajectory.momentum()
        assert np.max(np.abs(momentum - momentum[0])) / 5.0 <= 1e-10
        np.testing.assert_array_equal(trajectory.m, ens.m)
        assert np.all(np.diff(trajectory.x, axis=1) > 0.0)

    def test_accumulated_influence_bounds(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=16, eps=0.1)
        trajectory, _ = integrate(ea_model, ens, quick_cfg(t_max=3.0))
        t = trajectory.times[1:, None]
        assert np.all(trajectory.I[1:] <= cs_psi.psi_M * t + 1e-12)
        assert np.all(trajectory.I[1:] >= cs_psi.psi_m * t - 1e-12)

    def test_sample_grid(self, ea_model, gaussian_spec, cs_psi, make_ensemble):
        ens = make_ensemble(gaussian_spec, cs_psi, n=8)
        cfg = IntegratorConfig(dt0=1e-2, t_max=1.0, max_samples=11)
        trajectory, _ = integrate(ea_model, ens, cfg)
        np.testing.assert_allclose(trajectory.times, np.linspace(0.0, 1.0, 11), atol=1e-12)

    def test_frame_layout(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=5)
        trajectory, _ = integrate(ea_model, ens, quick_cfg(t_max=0.1))
        frame = trajectory.to_frame()
        assert list(frame.columns) == ["t", "particle", "x", "u", "rho", "d", "I"]
        assert len(frame) == len(trajectory) * 5
        assert trajectory.snapshot(0).t == 0.0


class TestCrossing:
    """Test suite for particles that cross while the step collapses."""

    @pytest.fixture
    def colliding(self):
        """Two particles closing at unit speed; with psi = 1 they meet at t = ln 2."""
        def build(d0):
            return ParticleEnsemble(x=[0.0, 1.0], u=[1.0, -1.0], rho=[1.0, 1.0], d=[d0, d0],
                                    m=[0.5, 0.5], I=[0.0, 0.0])
        return build

    @pytest.fixture
    def ea_unit(self, unit_psi):
        return CharModel(ModelSpec(ModelKind.EA), unit_psi, NoPotential())

    def test_crossing_with_nonnegative_d_is_a_numerical_failure(self, ea_unit, colliding):
        with pytest.raises(NumericalFailure):
            integrate(ea_unit, colliding(0.5), IntegratorConfig(dt0=1e-2, t_max=2.0))

    def test_crossing_with_negative_d_is_a_blowup(self, ea_unit, colliding):
        # d' = d - d^2 from -1/2 stays finite until t = ln 3, after the crossing
        _, report = integrate(ea_unit, colliding(-0.5), IntegratorConfig(dt0=1e-2, t_max=2.0))
        assert report is not None
        assert report.trigger is BlowupTrigger.DT_COLLAPSE
        assert report.t_star == pytest.approx(math.log(2.0), abs=1e-2)
        assert report.d_last < -1.0


class TestIntegrateEAP:
    """Test suite for Newtonian runs."""

    def test_attractive_always_blows_up(self, eap_attractive, unit_psi, make_ensemble):
        spec = InitialDataSpec(DensityProfile.gaussian())
        cfg = IntegratorConfig(dt0=1e-2, t_max=100.0)
        for d0 in (-1.0, 0.0, 1.0):
            _, report = integrate(eap_attractive, make_ensemble(spec, unit_psi, n=16, eps=d0), cfg)
            assert report is not None, f"d0={d0} did not blow up"
            assert report.t_star <= 100.0

    def test_beta_affine_in_time(self, eap_repulsive, uniform_spec, unit_psi, make_ensemble):
        ens = make_ensemble(uniform_spec, unit_psi, n=16)
        trajectory, report = integrate(eap_repulsive, ens, IntegratorConfig(dt0=5e-3, t_max=2.0))
        assert report is None
        assert trajectory.k == -1.0
        assert beta_residual(trajectory) <= 1e-6

    def test_repulsive_momentum(self, eap_repulsive, uniform_spec, unit_psi, make_ensemble):
        ens = make_ensemble(uniform_spec, unit_psi, n=16)
        trajectory, _ = integrate(eap_repulsive, ens, IntegratorConfig(dt0=1e-2, t_max=2.0))
        momentum = trajectory.momentum()
        assert np.max(np.abs(momentum - momentum[0])) / 2.0 <= 1e-10


class TestIntegrateGeneral:
    """Test suite for smooth potential runs."""

    def test_repulsive_band(self, general_repulsive, unit_psi, make_ensemble):
        spec = InitialDataSpec(DensityProfile.gaussian())
        cfg = IntegratorConfig(dt0=1e-2, t_max=5.0)
        _, report = integrate(general_repulsive, make_ensemble(spec, unit_psi, n=16, eps=0.0), cfg)
        assert report is None
        _, report = integrate(general_repulsive, make_ensemble(spec, unit_psi, n=16, eps=-1.5), cfg)
        assert report is not None

    def test_refined_probes(self, unit_psi, make_ensemble):
        potential = SmoothPotential.gaussian(3.0 / 16.0, width=1.0, sign=1.0)
        model = CharModel(ModelSpec(ModelKind.GENERAL_K_REFINED, B=3.0 / 16.0, psi_m=1.0, psi_M=1.0),
                          unit_psi, potential)
        spec = InitialDataSpec(DensityProfile.gaussian())
        cfg = IntegratorConfig(dt0=1e-2, t_max=10.0)
        assert survives(model, make_ensemble(spec, unit_psi, n=16, eps=0.3), cfg)
        assert not survives(model, make_ensemble(spec, unit_psi, n=16, eps=-1.5), cfg)

    def test_velocity_slope_tracks_d(self, general_repulsive, unit_psi, make_ensemble):
        """Between neighbours u_x = d - psi*rho, so the push on u and the K''*rho source on d agree."""
        spec = InitialDataSpec(DensityProfile.gaussian())
        ens = make_ensemble(spec, unit_psi, n=200, eps=0.5)
        trajectory, report = integrate(general_repulsive, ens, IntegratorConfig(dt0=1e-2, t_max=1.0))
        assert report is None
        final = trajectory.snapshot()
        slope = np.diff(final.u) / np.diff(final.x)
        predicted = 0.5 * (final.d[1:] + final.d[:-1]) - 1.0
        core = slice(40, 159)
        np.testing.assert_allclose(slope[core], predicted[core], atol=2e-2)
        # the source has visibly moved d away from its initial value
        assert np.max(np.abs(final.d - 0.5)) > 0.1


class TestDiagnostics:
    """Test suite for trajectory diagnostics."""

    @pytest.fixture
    def ea_run(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=16, eps=0.1)
        return integrate(ea_model, ens, quick_cfg(t_max=4.0))

    def test_beta_conserved_for_ea(self, ea_run):
        trajectory, _ = ea_run
        assert beta_residual(trajectory) <= 1e-6

    def test_beta_undefined_for_general_k(self, general_repulsive, unit_psi, make_ensemble, quick_cfg):
        spec = InitialDataSpec(DensityProfile.gaussian())
        trajectory, _ = integrate(general_repulsive, make_ensemble(spec, unit_psi, n=6), quick_cfg(t_max=0.1))
        with pytest.raises(UnsupportedModelError):
            beta_residual(trajectory)

    def test_implicit_density_formula(self, eap_repulsive, uniform_spec, unit_psi, make_ensemble):
        ens = make_ensemble(uniform_spec, unit_psi, n=16)

        def residual(dt0):
            trajectory, report = integrate(eap_repulsive, ens, IntegratorConfig(dt0=dt0, t_max=1.0))
            assert report is None
            return implicit_rho_residual(trajectory, ens.n // 2)

        coarse, fine = residual(4e-3), residual(2e-3)
        assert fine <= 1e-4
        # trapezoid quadrature on the stored grid is second order
        assert coarse / fine >= 3.0

    def test_exact_criterion_needs_repulsive_eap(self, ea_run):
        trajectory, _ = ea_run
        with pytest.raises(UnsupportedModelError):
            exact_criterion_margin(trajectory, 0)

    def test_exact_criterion_sign(self, eap_repulsive, unit_psi, make_ensemble):
        """Deep below sigma_- the margin is negative, inside the rough region beta_0 >= 0 is rejected."""
        spec = InitialDataSpec(DensityProfile.uniform(0.0, 1.0))
        ens = make_ensemble(spec, unit_psi, n=8, eps=-3.0)
        trajectory, _ = integrate(eap_repulsive, ens, IntegratorConfig(dt0=1e-2, t_max=5.0))
        # rho blows up before beta_0/k = 3, so the stored horizon cannot reach it
        with pytest.raises(RejectedInputError):
            exact_criterion_margin(trajectory, 4)
        ens = make_ensemble(spec, unit_psi, n=8, eps=0.5)
        trajectory, _ = integrate(eap_repulsive, ens, IntegratorConfig(dt0=1e-2, t_max=1.0))
        with pytest.raises(RejectedInputError):
            exact_criterion_margin(trajectory, 4)

    def test_exact_criterion_positive_inside_subcritical_gap(self, eap_repulsive, unit_psi, make_ensemble):
        spec = InitialDataSpec(DensityProfile.uniform(0.0, 1.0))
        ens = make_ensemble(spec, unit_psi, n=8, eps=-0.5)
        trajectory, report = integrate(eap_repulsive, ens, IntegratorConfig(dt0=1e-2, t_max=2.0))
        assert report is None
        assert exact_criterion_margin(trajectory, 4) > 0.0

    def test_rough_density_bound(self, ea_run, cs_psi):
        trajectory, _ = ea_run
        assert rough_density_defect(trajectory, cs_psi.psi_M) <= 1e-9

    def test_asymptotic_alignment_decays(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=16, eps=0.3)
        short, _ = integrate(ea_model, ens, quick_cfg(t_max=2.0))
        long, _ = integrate(ea_model, ens, quick_cfg(t_max=8.0))
        assert asymptotic_alignment_check(long, cs_psi) < asymptotic_alignment_check(short, cs_psi)

    def test_asymptotic_alignment_after_blowup(self, ea_run, cs_psi):
        trajectory, _ = ea_run
        report = BlowupReport(0, 1.0, BlowupTrigger.D_NEG_CAP, -1e8, 1.0)
        with pytest.raises(RejectedInputError):
            asymptotic_alignment_check(trajectory, cs_psi, report)

    def test_blowup_time_bounds(self):
        report = BlowupReport(particle=1, t_star=1.5, trigger=BlowupTrigger.D_NEG_CAP, d_last=-1e8, rho_last=1.0)
        bounds = blowup_time_bounds(report, np.array([0.1, -0.5]))
        assert bounds == {"particle": 1, "t_star": 1.5, "d0": -0.5, "printed": 0.5, "riccati": 2.0}


class TestEmpiricalThreshold:
    """Test suite for the bisection harness."""

    def test_bisection_with_mocked_runs(self, ea_model, quick_cfg):
        with patch("app.characteristics.sweep.survives", side_effect=lambda model, eps, cfg, guard: eps >= 0.123):
            result = empirical_threshold(ea_model, lambda eps: eps, -1.0, 1.0, quick_cfg(), tol_eps=1e-3, workers=1)
        assert isinstance(result, EmpiricalThreshold)
        assert result.eps_lo < 0.123 <= result.eps_hi
        assert result.eps_hi - result.eps_lo <= 1e-3
        assert result.n_runs == 2 + 11

    def test_bad_bracket(self, ea_model, quick_cfg):
        with patch("app.characteristics.sweep.survives", return_value=True):
            with pytest.raises(ThresholdSearchError):
                empirical_threshold(ea_model, lambda eps: eps, -1.0, 1.0, quick_cfg())
        with pytest.raises(RejectedInputError):
            empirical_threshold(ea_model, lambda eps: eps, 1.0, -1.0, quick_cfg())

    def test_guard_counts_large_d_as_blowup(self, ea_model, gaussian_spec, cs_psi, make_ensemble, quick_cfg):
        ens = make_ensemble(gaussian_spec, cs_psi, n=8, eps=0.1)
        assert survives(ea_model, ens, quick_cfg(t_max=0.5))
        assert not survives(ea_model, ens, quick_cfg(t_max=0.5), guard=0.01)

    def test_ea_threshold_near_zero(self, ea_model, gaussian_spec, cs_psi, quick_cfg):
        family = offset_family(gaussian_spec, 12, cs_psi)
        result = empirical_threshold(ea_model, family, -0.5, 0.5, quick_cfg(t_max=10.0), tol_eps=0.05)
        assert result.eps_lo < 0.0 <= result.eps_hi
        assert abs(result.eps_star) <= 0.05

    def test_ea_threshold_at_full_resolution(self, ea_model, gaussian_spec, cs_psi):
        family = offset_family(gaussian_spec, 64, cs_psi)
        cfg = IntegratorConfig(dt0=1e-2, t_max=20.0)
        result = empirical_threshold(ea_model, family, -0.1, 0.15, cfg, tol_eps=1e-3, workers=1)
        assert result.eps_hi - result.eps_lo <= 1e-3
        assert abs(result.eps_star) <= 1e-3

    def test_eap_threshold_matches_sigma_plus(self, eap_repulsive, unit_psi):
        """rho_0 = 1 on [0, 1] and psi = 1: every particle has the same sharp threshold."""
        family = offset_family(InitialDataSpec(DensityProfile.uniform(0.0, 1.0)), 16, unit_psi)
        cfg = IntegratorConfig(dt0=1e-2, t_max=20.0)
        result = empirical_threshold(eap_repulsive, family, -2.0, 0.0, cfg, tol_eps=1e-3, workers=1)
        assert result.eps_star == pytest.approx(sigma_plus_eap(-1.0, 1.0, 1.0), abs=2e-2)

    def test_general_repulsive_threshold_in_band(self):
        scenario = Scenario.load(SCENARIOS / "general_repulsive.yaml")
        scenario.n_particles = 32
        model = scenario.char_model()
        cfg = IntegratorConfig(dt0=1e-2, t_max=25.0)
        assert survives(model, scenario.ensemble(0.0), cfg)
        assert not survives(model, scenario.ensemble(-1.2), cfg)
        result = empirical_threshold(model, scenario.ensemble, -1.5, 0.5, cfg, tol_eps=1e-2, workers=1)
        assert -1.0 - 1e-2 <= result.eps_star <= 1e-2
