"""
Tests for the threshold roots and the pointwise classifiers.
"""
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from app.models.model_spec import Attraction, ModelKind, ModelSpec
from app.thresholds.classifiers import (
    Classification,
    LowerForm,
    ThresholdQuery,
    Verdict,
    classify,
    classify_ea,
    classify_eap,
    classify_general,
    classify_general_refined,
    classify_isothermal,
    refined_bounds,
)
from app.thresholds.roots import (
    bracketed_negative_root,
    general_upper_bound,
    riccati_blowup_bounds,
    sigma_minus_eap,
    sigma_minus_eap_refined,
    sigma_plus_eap,
    threshold_function,
)
from app.utils.errors import NumericalFailure, RejectedInputError


def q(d0, rho0=1.0):
    return ThresholdQuery.from_d0(rho0, d0)


class TestRoots:
    """Test suite for the EAP threshold curves."""

    def test_sigma_minus_closed_form(self):
        assert sigma_minus_eap(-1.0, 1.0) == pytest.approx(-math.sqrt(2.0))
        assert sigma_minus_eap(-2.0, 0.5) == pytest.approx(-math.sqrt(2.0))
        assert sigma_minus_eap(-1.0, 0.0) == 0.0

    def test_sigma_plus_unit_case(self):
        """k = -1, rho0 = 1, psi = 1 reduces to 2 - sigma - exp(-sigma) = 0."""
        expected = brentq(lambda s: 2.0 - s - math.exp(-s), -3.0, -0.5, xtol=1e-14)
        assert sigma_plus_eap(-1.0, 1.0, 1.0) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(-1.1462, abs=1e-4)

    @settings(max_examples=40, deadline=None)
    @given(k=st.floats(-5.0, -0.05), rho0=st.floats(0.01, 5.0), psi=st.floats(0.01, 5.0))
    def test_sigma_plus_against_oracle(self, k, rho0, psi):
        root = sigma_plus_eap(k, rho0, psi)
        lower = sigma_minus_eap(k, rho0)
        assert lower - 1e-12 <= root <= 0.0
        g = lambda s: threshold_function(s, k, rho0, psi)
        assert g(root) >= 0.0
        oracle = lower if g(lower) == 0.0 else brentq(g, lower, 0.0, xtol=1e-14)
        assert root == pytest.approx(oracle, abs=1e-9)

    def test_sigma_plus_ordering_and_monotonicity(self):
        previous = 0.0
        for rho0 in (0.1, 0.5, 1.0, 2.0, 4.0):
            plus = sigma_plus_eap(-1.0, rho0, 1.0)
            assert sigma_minus_eap(-1.0, rho0) <= plus <= 0.0
            assert plus <= previous
            previous = plus

    def test_psi_zero_is_euler_poisson_limit(self):
        assert sigma_plus_eap(-1.0, 2.0, 0.0) == sigma_minus_eap(-1.0, 2.0)

    def test_tiny_psi_is_stable(self):
        """The series branch keeps sigma_+ next to the Euler-Poisson value for small psi."""
        plus = sigma_plus_eap(-1.0, 1.0, 1e-6)
        assert plus == pytest.approx(-math.sqrt(2.0), abs=1e-5)

    def test_vacuum(self):
        assert sigma_plus_eap(-1.0, 0.0, 1.0) == 0.0

    def test_requires_repulsion(self):
        with pytest.raises(RejectedInputError):
            sigma_plus_eap(1.0, 1.0, 1.0)
        with pytest.raises(RejectedInputError):
            sigma_minus_eap(-1.0, -0.1)

    def test_refined_equals_sigma_plus_when_bounds_coincide(self):
        refined = sigma_minus_eap_refined(-1.0, 1.0, 1.0, psi_exp=1.0)
        assert refined == pytest.approx(sigma_plus_eap(-1.0, 1.0, 1.0), abs=1e-11)

    def test_refined_below_sigma_plus(self):
        refined = sigma_minus_eap_refined(-1.0, 1.0, 0.5)
        assert refined <= sigma_plus_eap(-1.0, 1.0, 1.0) + 1e-12

    def test_bracket_expansion_limit(self):
        with pytest.raises(NumericalFailure):
            bracketed_negative_root(lambda s: 1.0, -1.0, max_doublings=5)

    def test_bracket_root(self):
        root = bracketed_negative_root(lambda s: s + 3.0, -1.0, tol=1e-13)
        assert root == pytest.approx(-3.0, abs=1e-12)

    def test_general_upper_bound(self):
        assert general_upper_bound(0.0, 1.0) == pytest.approx(1.0)
        assert general_upper_bound(2.0, 1.0) == pytest.approx(2.0)

    def test_riccati_bounds(self):
        assert riccati_blowup_bounds(-0.5) == {"printed": 0.5, "riccati": 2.0}
        with pytest.raises(RejectedInputError):
            riccati_blowup_bounds(0.0)


class TestClassifyEA:
    """Test suite for the pure alignment dichotomy."""

    def test_dichotomy(self):
        assert classify_ea(q(0.3)).verdict is Verdict.SUBCRITICAL
        assert classify_ea(q(-0.3)).verdict is Verdict.SUPERCRITICAL
        assert classify_ea(q(0.0)).verdict is Verdict.CRITICAL

    def test_query_from_slope(self):
        query = ThresholdQuery(rho0=0.4, dxu0=-0.7 + 0.3, psi_conv=0.7)
        assert query.d0 == pytest.approx(0.3)
        assert classify_ea(query).verdict is Verdict.SUBCRITICAL

    def test_rejects_negative_density(self):
        with pytest.raises(RejectedInputError):
            ThresholdQuery(rho0=-1.0, dxu0=0.0, psi_conv=0.0)


class TestClassifyEAP:
    """Test suite for the Newtonian classifier."""

    def test_repulsive_examples(self):
        assert classify_eap(q(0.5), -1.0).verdict is Verdict.SUBCRITICAL
        assert classify_eap(q(-2.0), -1.0).verdict is Verdict.SUPERCRITICAL
        gap = classify_eap(q(-1.3), -1.0)
        assert gap.verdict is Verdict.INDETERMINATE
        assert gap.sigma_minus < -1.3 < gap.sigma_plus

    def test_boundary_is_indeterminate(self):
        plus = sigma_plus_eap(-1.0, 1.0, 1.0)
        assert classify_eap(q(plus), -1.0).verdict is Verdict.INDETERMINATE

    def test_attractive_is_unconditional(self):
        for d0 in (-1.0, 0.0, 1.0, 100.0):
            assert classify_eap(q(d0, rho0=0.2), 1.0).verdict is Verdict.SUPERCRITICAL

    def test_attractive_vacuum_falls_back_to_ea(self):
        assert classify_eap(q(0.5, rho0=0.0), 1.0).verdict is Verdict.SUBCRITICAL

    @settings(max_examples=40, deadline=None)
    @given(d0=st.floats(0.0, 10.0), rho0=st.floats(1e-6, 5.0))
    def test_nonnegative_d0_always_subcritical(self, d0, rho0):
        assert classify_eap(q(d0, rho0), -1.0).verdict is Verdict.SUBCRITICAL

    def test_refined_sigma_minus_used_with_psi_m(self):
        plain = classify_eap(q(-1.3), -1.0, psi_M=1.0)
        refined = classify_eap(q(-1.3), -1.0, psi_M=1.0, psi_m=1.0)
        assert plain.sigma_minus == pytest.approx(-math.sqrt(2.0))
        # with psi_m = psi_M the gap closes
        assert refined.sigma_minus == pytest.approx(refined.sigma_plus, abs=1e-11)
        assert refined.verdict is Verdict.SUPERCRITICAL

    def test_k_zero_rejected(self):
        with pytest.raises(RejectedInputError):
            classify_eap(q(0.1), 0.0)


class TestClassifyGeneral:
    """Test suite for the one-signed smooth potential classifier."""

    def test_repulsive(self):
        assert classify_general(q(-2.5), 4.0, Attraction.REPULSIVE).verdict is Verdict.SUPERCRITICAL
        assert classify_general(q(0.0), 4.0, Attraction.REPULSIVE).verdict is Verdict.SUBCRITICAL
        assert classify_general(q(-1.0), 4.0, Attraction.REPULSIVE).verdict is Verdict.INDETERMINATE

    def test_attractive(self):
        assert classify_general(q(-0.1), 1.0, Attraction.ATTRACTIVE).verdict is Verdict.SUPERCRITICAL
        assert classify_general(q(5.0), 1.0, Attraction.ATTRACTIVE).verdict is Verdict.INDETERMINATE


class TestClassifyRefined:
    """Test suite for the sign-independent refined classifier."""

    def test_bounds_for_three_sixteenths(self):
        derived, upper = refined_bounds(3.0 / 16.0, 1.0, 1.0, LowerForm.DERIVED)
        printed, _ = refined_bounds(3.0 / 16.0, 1.0, 1.0, LowerForm.PRINTED)
        assert derived == pytest.approx(0.25)
        assert printed == pytest.approx(-0.75)
        assert upper == pytest.approx((1.0 - math.sqrt(1.75)) / 2.0)

    def test_printed_form_b_zero(self):
        """B = 0, psi = 1: bounds -1 and 0, so d0 = -0.5 is claimed by both and reported indeterminate."""
        result = classify_general_refined(q(-0.5), 0.0, 1.0, 1.0, lower_form="printed")
        assert result.verdict is Verdict.INDETERMINATE
        assert result.sigma_plus is None and result.sigma_minus is None

    def test_derived_form_b_zero_matches_ea(self):
        for d0 in (-0.5, 0.0, 0.25, 3.0):
            refined = classify_general_refined(q(d0), 0.0, 1.0, 1.0, lower_form="derived").verdict
            assert refined is classify_ea(q(d0)).verdict or classify_ea(q(d0)).verdict is Verdict.CRITICAL

    def test_sub_branch_disabled(self):
        result = classify_general_refined(q(10.0), 1.0, 1.0, 1.0)
        assert result.verdict is Verdict.INDETERMINATE
        assert result.sigma_plus is None

    def test_supercritical_probe(self):
        assert classify_general_refined(q(-1.5), 3.0 / 16.0, 1.0, 1.0).verdict is Verdict.SUPERCRITICAL

    def test_needs_positive_psi_m(self):
        with pytest.raises(RejectedInputError):
            classify_general_refined(q(0.0), 0.1, 0.0, 1.0)


class TestClassifyIsothermal:
    """Test suite for the isothermal subcritical condition."""

    def test_condition(self):
        assert classify_isothermal(0.0, 0.5, 1.0, 1.0, 2.0).verdict is Verdict.SUBCRITICAL
        result = classify_isothermal(-3.0, 0.5, 1.0, 1.0, 2.0)
        assert result.verdict is Verdict.INDETERMINATE
        assert result.sigma_minus == pytest.approx(-1.5)

    def test_needs_density(self):
        with pytest.raises(RejectedInputError):
            classify_isothermal(0.0, 0.0, 0.0, 1.0, 2.0)


class TestDispatch:
    """Test suite for the model dispatcher."""

    def test_dispatch_by_kind(self):
        assert classify(q(-0.1), ModelSpec(ModelKind.EA)).verdict is Verdict.SUPERCRITICAL
        assert classify(q(0.5), ModelSpec(ModelKind.EAP, k=1.0)).verdict is Verdict.SUPERCRITICAL
        repulsive = ModelSpec(ModelKind.GENERAL_K, B=4.0, sign=Attraction.REPULSIVE)
        assert classify(q(-2.5), repulsive).verdict is Verdict.SUPERCRITICAL
        refined = ModelSpec(ModelKind.GENERAL_K_REFINED, B=0.1875, psi_m=1.0, psi_M=1.0)
        assert classify(q(0.3), refined).verdict is Verdict.SUBCRITICAL
        iso = ModelSpec(ModelKind.ISOTHERMAL_DAMPED, A=1.0, C=2.0)
        query = ThresholdQuery(rho0=1.0, dxu0=0.0, psi_conv=2.0)
        assert classify(query, iso, dxrho0=0.5).verdict is Verdict.SUBCRITICAL

    def test_classification_ordering_enforced(self):
        with pytest.raises(RejectedInputError):
            Classification(Verdict.INDETERMINATE, sigma_plus=-1.0, sigma_minus=0.0)
        assert Classification(Verdict.SUBCRITICAL, 0.0, -1.0).as_dict()["verdict"] == "Subcritical"
