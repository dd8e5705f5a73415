"""
Config
---------------------------
YAML configuration files. Top-level mappings:

* `scenario` - a simulation scenario, see :py:class:`ScenarioConfig`
* `fit` - fields of :py:class:`~occupancy_engine.core.sampler.FitConfig` shared by the models,
  with model-specific overrides in the nested `spatial` and `nonspatial` mappings
* `study` - fields of :py:class:`~occupancy_engine.study.StudyConfig`

Keys are field names. Matrices are lists of rows, fixed parameters live in a nested `fixed` mapping:

.. code-block:: yaml

    fit:
      chains: 3
      fixed: {sigma1: 1.0e+6}
      nonspatial:
        fixed:
          P: [[0.9, 0.2], [0.1, 0.8]]
"""
import logging
import pathlib
from typing import Any, Optional, Union

import numpy as np
import yaml

from .core.compat import BaseModel, Extra, validator
from .core.errors import ConfigError
from .core.keywords import SAMPLED_MODELS, Model
from .core.sampler import FitConfig
from .core.space import BandwidthMatrix, InitialDistribution, StateSpace, TransitionMatrix
from .simulate import SimulationScenario, derive_seeds, make_grid, random_transition_matrix

logger = logging.getLogger(__name__)

SECTIONS = ("scenario", "fit", "study")


class ScenarioConfig(BaseModel, extra=Extra.forbid):
    """
    Flat description of a simulation scenario on a grid.
    Without `P` the transition matrix is drawn from the flat Dirichlet prior with a seed derived from `seed`;
    without `phi` the initial distribution is uniform.
    """

    rows: int = 10
    cols: int = 10
    S: int = 3
    T: int = 5
    e: float = 0.3
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0
    replicates: int = 1
    datasets: int = 1
    labels: Optional[list[str]] = None
    phi: Optional[list[float]] = None
    P: Optional[list[list[float]]] = None
    seed: int = 0

    @validator("S", "T", "rows", "cols", "datasets")
    def validate_positive(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} has to be at least 1, but got {value}")
        return value

    @validator("P")
    def validate_rows(cls, P):
        if P is not None and any(len(row) != len(P) for row in P):
            raise ValueError(f"P has to be square, but got rows of lengths {[len(row) for row in P]}")
        return P

    def to_scenario(self) -> SimulationScenario:
        states = StateSpace(self.labels) if self.labels else StateSpace.of_size(self.S)
        if states.S != self.S:
            raise ConfigError(f"{len(self.labels)} labels given for S={self.S}")
        draw_seed, seed = derive_seeds(self.seed, 2)
        P = (
            TransitionMatrix(self.P)
            if self.P is not None
            else random_transition_matrix(self.S, np.random.default_rng(draw_seed))
        )
        phi = InitialDistribution(self.phi if self.phi is not None else np.full(self.S, 1.0 / self.S), atol=1e-9)
        return SimulationScenario(
            frame=make_grid(self.rows, self.cols),
            states=states,
            T=self.T,
            phi=phi,
            P=P,
            e=self.e,
            bandwidth=BandwidthMatrix(self.sigma1, self.sigma2, self.rho),
            replicates=self.replicates,
            seed=seed,
        )


class ConfigFile(BaseModel):
    """Sections of a config file keyed by name; the model overrides of `fit` are kept as `fit.<model>`."""

    sections: dict[str, dict] = {}
    path: Optional[str] = None

    @classmethod
    def from_mapping(cls, content: Any, path: Optional[str] = None) -> "ConfigFile":
        """Splits a parsed YAML document into sections, checking the layout on the way."""
        source = path or "config"
        if content is None:
            content = {}
        if not isinstance(content, dict):
            raise ConfigError(f"{source}: expected a mapping of sections, but got {type(content).__name__}")
        unknown = [name for name in content if name not in SECTIONS]
        if unknown:
            raise ConfigError(f"{source}: unknown sections {unknown}, expected some of {list(SECTIONS)}")
        sections = {}
        for name, values in content.items():
            values = {} if values is None else values
            if not isinstance(values, dict):
                raise ConfigError(f"{source}: section `{name}` has to be a mapping")
            sections[name] = dict(values)
        fit = sections.get("fit", {})
        for model in SAMPLED_MODELS:
            specific = fit.pop(model.value, None)
            if specific is None:
                continue
            if not isinstance(specific, dict):
                raise ConfigError(f"{source}: section `fit.{model.value}` has to be a mapping")
            sections[f"fit.{model.value}"] = dict(specific)
        logger.debug(f"loaded sections {list(sections)} from {source}")
        return cls(sections=sections, path=path)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))

    def fit_config(self, model: Union[Model, str], overrides: Optional[dict] = None) -> FitConfig:
        """`fit`, then `fit.<model>`, then `overrides`, the later winning."""
        model = Model(model)
        values = self.section("fit")
        specific = self.section(f"fit.{model.value}")
        fixed = {**(values.pop("fixed", None) or {}), **(specific.pop("fixed", None) or {})}
        values.update(specific)
        values.update({key: value for key, value in (overrides or {}).items() if value is not None})
        fixed.update(values.pop("fixed", None) or {})
        return build(FitConfig, dict(values, model=model, fixed=fixed), f"fit.{model.value}")

    def scenario(self, overrides: Optional[dict] = None) -> ScenarioConfig:
        values = self.section("scenario")
        values.update({key: value for key, value in (overrides or {}).items() if value is not None})
        return build(ScenarioConfig, values, "scenario")


def build(model_class, values: dict, section: str):
    """Instantiates `model_class` from config values, reporting problems as :py:class:`ConfigError`."""
    unknown = sorted(set(values) - set(model_class.__fields__))
    if unknown:
        raise ConfigError(f"[{section}]: unknown keys {unknown}")
    try:
        return model_class(**values)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def load_config(path: Union[str, pathlib.Path]) -> ConfigFile:
    path = pathlib.Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        content = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ConfigFile.from_mapping(content, str(path))
