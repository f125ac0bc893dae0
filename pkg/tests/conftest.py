"""
Shared fixtures for the test suite.
"""
import pytest

from app.characteristics.integrator import IntegratorConfig
from app.fields.influence import InfluenceFunction
from app.fields.initial_data import DensityProfile, InitialDataSpec, sample_initial
from app.fields.potentials import NewtonianPotential, NoPotential, SmoothPotential
from app.models.model_spec import Attraction, CharModel, ModelKind, ModelSpec


@pytest.fixture
def cs_psi():
    """Cucker-Smale kernel (1 + x^2)^-1."""
    return InfluenceFunction.cucker_smale(1.0)


@pytest.fixture
def unit_psi():
    """Constant influence psi = 1."""
    return InfluenceFunction.constant(1.0)


@pytest.fixture
def ea_model(cs_psi):
    return CharModel(ModelSpec(ModelKind.EA), cs_psi, NoPotential())


@pytest.fixture
def eap_repulsive(unit_psi):
    return CharModel(ModelSpec(ModelKind.EAP, k=-1.0), unit_psi, NewtonianPotential(-1.0))


@pytest.fixture
def eap_attractive(unit_psi):
    return CharModel(ModelSpec(ModelKind.EAP, k=1.0), unit_psi, NewtonianPotential(1.0))


@pytest.fixture
def general_repulsive(unit_psi):
    potential = SmoothPotential.gaussian(1.0, width=1.0, sign=1.0)
    return CharModel(ModelSpec(ModelKind.GENERAL_K, B=1.0, sign=Attraction.REPULSIVE), unit_psi, potential)


@pytest.fixture
def gaussian_spec():
    return InitialDataSpec(DensityProfile.gaussian(), eps=0.1)


@pytest.fixture
def uniform_spec():
    return InitialDataSpec(DensityProfile.uniform(0.0, 1.0), eps=0.5)


@pytest.fixture
def make_ensemble():
    """Factory: ``make_ensemble(spec, psi, n=24, eps=None)``."""
    def build(spec, psi, n=24, eps=None):
        if eps is not None:
            spec = spec.with_offset(eps)
        return sample_initial(spec, n, psi)
    return build


@pytest.fixture
def quick_cfg():
    """Factory for coarse desk-scale integrator settings."""
    def build(t_max=2.0, dt0=1e-2, **overrides):
        return IntegratorConfig(dt0=dt0, t_max=t_max, **overrides)
    return build
