"""
Scenario Module

A scenario is one YAML document describing a run: the model, the influence
function, the interaction potential, the initial data, the discretization
and which outputs to write. Anything numeric a scenario leaves out comes
from config/settings.yaml.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from app.characteristics.integrator import IntegratorConfig
from app.fields.ensemble import ParticleEnsemble
from app.fields.influence import InfluenceFunction
from app.fields.initial_data import InitialDataSpec, VelocityMode, sample_initial
from app.fields.potentials import InteractionPotential, potential_from_spec
from app.isothermal.solver import IsoConfig, IsoState, initial_state
from app.models.model_spec import CharModel, ModelSpec
from app.utils.config import get_setting
from app.utils.errors import RejectedInputError, ScenarioError
from app.utils.logger import get_logger

logger = get_logger(__name__)

OUTPUT_KINDS = ("trajectory", "report", "fields")
DEFAULT_PARTICLES = 400


def _resolve_tables(document: Dict[str, Any], base: Path):
    """Relative table paths in a scenario are relative to the scenario file."""
    initial = document.get("initial_data") or {}
    sections = [document.get("psi"), document.get("potential"),
                initial.get("rho0") if isinstance(initial, dict) else None]
    for section in sections:
        if isinstance(section, dict) and section.get("path") and not Path(str(section["path"])).is_absolute():
            section["path"] = str(base / str(section["path"]))


@dataclass
class Scenario:
    """
    A parsed scenario file.

    Attributes:
        name: Label used in logs and metadata
        model: Model specification
        psi_spec: Influence function section
        potential_spec: Interaction potential section
        initial_data: Initial data section
        n_particles: Ensemble size (characteristic models)
        integrator: Overrides of the ``integrator`` settings
        isothermal: Overrides of the ``isothermal`` settings
        sweep: Default bracket and search settings for ``sweep``
        outputs: Requested outputs among trajectory, report, fields
        seed: Seed echoed into outputs and used by randomized checks
        raw: The document as read
    """

    name: str
    model: ModelSpec
    psi_spec: Dict[str, Any] = field(default_factory=dict)
    potential_spec: Dict[str, Any] = field(default_factory=dict)
    initial_data: Dict[str, Any] = field(default_factory=dict)
    n_particles: int = DEFAULT_PARTICLES
    integrator: Dict[str, Any] = field(default_factory=dict)
    isothermal: Dict[str, Any] = field(default_factory=dict)
    sweep: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=lambda: ["trajectory", "report"])
    seed: int = 0
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, document: Dict[str, Any], name: str = "scenario") -> "Scenario":
        """
        Build a scenario from a parsed document.

        Args:
            document: Mapping with sections model, psi, potential,
                initial_data, n_particles, integrator, isothermal, sweep,
                outputs and seed
            name: Fallback label

        Returns:
            The scenario
        """
        if not isinstance(document, dict):
            raise ScenarioError("a scenario must be a mapping")
        unknown = [kind for kind in document.get("outputs", []) or [] if kind not in OUTPUT_KINDS]
        if unknown:
            raise ScenarioError(f"unknown outputs {unknown}; choose from {list(OUTPUT_KINDS)}")
        model = ModelSpec.from_spec(document.get("model") or {})
        default_seed = (get_setting("verify", {}) or {}).get("seed", 0)
        try:
            scenario = cls(
                name=str(document.get("name", name)),
                model=model,
                psi_spec=dict(document.get("psi") or {"kind": "constant", "c": 1.0}),
                potential_spec=dict(document.get("potential") or {"kind": "none"}),
                initial_data=dict(document.get("initial_data") or {}),
                n_particles=int(document.get("n_particles", DEFAULT_PARTICLES)),
                integrator=dict(document.get("integrator") or {}),
                isothermal=dict(document.get("isothermal") or {}),
                sweep=dict(document.get("sweep") or {}),
                outputs=list(document.get("outputs") or ["trajectory", "report"]),
                seed=int(document.get("seed", default_seed)),
                raw=document,
            )
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"malformed scenario: {e}") from e
        if scenario.model.is_characteristic:
            # pairing and component errors surface at load time
            scenario.char_model()
            scenario.initial_spec()
        else:
            scenario.iso_config()
        return scenario

    @classmethod
    def load(cls, path: Union[str, Path], seed: Optional[int] = None) -> "Scenario":
        """Read a scenario file; ``seed`` overrides the file's seed."""
        path = Path(path)
        try:
            with open(path, "r") as handle:
                document = yaml.safe_load(handle) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ScenarioError(f"cannot read scenario {path}: {e}") from e
        if isinstance(document, dict):
            _resolve_tables(document, path.parent)
        scenario = cls.from_dict(document, name=path.stem)
        if seed is not None:
            scenario.seed = int(seed)
        logger.info(f"Loaded scenario '{scenario.name}' ({scenario.model.kind.value}) from {path}")
        return scenario

    def influence(self) -> InfluenceFunction:
        try:
            return InfluenceFunction.from_spec(self.psi_spec)
        except RejectedInputError as e:
            raise ScenarioError(f"influence function: {e}") from e

    def potential(self) -> InteractionPotential:
        try:
            return potential_from_spec(self.potential_spec)
        except RejectedInputError as e:
            raise ScenarioError(f"potential: {e}") from e

    def char_model(self) -> CharModel:
        if not self.model.is_characteristic:
            raise ScenarioError(f"{self.model.kind.value} is not a characteristic model")
        return CharModel(self.model, self.influence(), self.potential())

    def initial_spec(self) -> InitialDataSpec:
        try:
            return InitialDataSpec.from_spec(self.initial_data)
        except RejectedInputError as e:
            raise ScenarioError(f"initial data: {e}") from e

    def is_offset_family(self) -> bool:
        return self.model.is_characteristic and self.initial_spec().u0_mode is VelocityMode.SLOPE_OFFSET

    def ensemble(self, eps: Optional[float] = None) -> ParticleEnsemble:
        """Initial ensemble; ``eps`` replaces the slope offset when given."""
        spec = self.initial_spec()
        if eps is not None:
            spec = spec.with_offset(eps)
        return sample_initial(spec, self.n_particles, self.influence())

    def integrator_config(self) -> IntegratorConfig:
        try:
            return IntegratorConfig.from_settings(**self.integrator)
        except (RejectedInputError, TypeError, ValueError) as e:
            raise ScenarioError(f"integrator: {e}") from e

    def iso_config(self) -> IsoConfig:
        overrides = dict(self.isothermal)
        overrides.update({"A": self.model.A, "C": self.model.C})
        try:
            return IsoConfig.from_settings(**overrides)
        except (RejectedInputError, TypeError, ValueError) as e:
            raise ScenarioError(f"isothermal: {e}") from e

    def iso_initial_state(self) -> IsoState:
        cfg = self.iso_config()
        try:
            return initial_state(cfg, self.initial_data.get("density"), self.initial_data.get("velocity"))
        except (RejectedInputError, TypeError) as e:
            raise ScenarioError(f"isothermal initial data: {e}") from e

    def describe(self) -> Dict[str, Any]:
        """Resolved scenario for metadata and CSV headers."""
        info: Dict[str, Any] = {"name": self.name, "model": self.model.describe(), "seed": self.seed,
                                "outputs": list(self.outputs)}
        if self.model.is_characteristic:
            info.update({"psi": self.influence().describe(), "potential": self.potential().describe(),
                         "initial_data": self.initial_spec().describe(), "n_particles": self.n_particles,
                         "integrator": self.integrator_config().as_dict()})
        else:
            info.update({"isothermal": self.iso_config().as_dict(), "initial_data": self.initial_data})
        return info
