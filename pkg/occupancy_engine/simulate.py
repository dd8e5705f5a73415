"""
Simulate
---------------------------
Generative model of occupancy panels and resampled records:
site states follow independent Markov chains, and every record is either the state of its own site
or, with the resampling-error probability, a state drawn from the local dominance around the site.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Optional, Union

import numpy as np

from .core.compat import ARRAY_CONFIG, BaseModel, Extra, validate_arguments, validator
from .core.errors import ShapeMismatch
from .core.kernel import dominance_field, kernel_matrix
from .core.panel import ObservationSet, OccupancyPanel
from .core.space import BandwidthMatrix, InitialDistribution, SiteFrame, StateSpace, TransitionMatrix
from .core.types import SeedType
from .core.updates import sample_categorical_rows

logger = logging.getLogger(__name__)


@validate_arguments
def make_grid(rows: int, cols: int) -> SiteFrame:
    """
    Sites on the integer grid `(1, 1)`, `(2, 1)`, ..., `(cols, rows)`, the first coordinate running fastest.
    """
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"a grid needs at least one row and one column, but got {rows=}, {cols=}")
    x, y = np.meshgrid(np.arange(1, cols + 1), np.arange(1, rows + 1))
    return SiteFrame(np.column_stack([x.ravel(), y.ravel()]))


def random_transition_matrix(S: int, rng: np.random.Generator) -> TransitionMatrix:
    """Transition matrix with every column drawn from the flat Dirichlet distribution."""
    return TransitionMatrix(np.column_stack([rng.dirichlet(np.ones(S)) for _ in range(S)]), atol=1e-9)


def derive_seeds(seed: SeedType, n: int) -> list[int]:
    """`n` independent integer seeds derived from one master seed."""
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [int(child.generate_state(1, np.uint32)[0]) for child in sequence.spawn(n)]


class SimulationScenario(BaseModel):
    """
    Parameters of the data-generating process.

    Parameters
    ----------
    frame : SiteFrame
        site positions
    states : StateSpace
        ecological states
    T : int
        number of periods
    phi : InitialDistribution
        distribution of the states at the first period
    P : TransitionMatrix
        transition probabilities
    e : float
        resampling-error probability
    bandwidth : BandwidthMatrix
        bandwidth of the kernel that erroneous records are drawn through
    replicates : Union[int, np.ndarray]
        number of records per survey, either one number or an I×T table; 0 marks a missing survey
    seed : int
        seed of the random stream
    """

    frame: SiteFrame
    states: StateSpace
    T: int
    phi: InitialDistribution
    P: TransitionMatrix
    e: float
    bandwidth: BandwidthMatrix
    replicates: Union[int, Any] = 1
    seed: int = 0

    class Config:
        arbitrary_types_allowed = True
        extra = Extra.forbid

    @validator("T")
    def validate_horizon(cls, T):
        if T < 1:
            raise ValueError(f"at least one period is needed, but got {T=}")
        return T

    @validator("e")
    def validate_error(cls, e):
        if not 0 <= e <= 1:
            raise ValueError(f"resampling-error probability has to lie in [0, 1], but got {e=}")
        return e

    @validator("P")
    def validate_dimensions(cls, P, values):
        S = values["states"].S if "states" in values else P.S
        phi = values.get("phi")
        if P.S != S or (phi is not None and phi.S != S):
            raise ValueError(f"parameters do not match the {S} states")
        return P

    @validator("replicates")
    def validate_replicates(cls, replicates, values):
        if isinstance(replicates, (int, np.integer)):
            if replicates < 0:
                raise ValueError(f"replicate count cannot be negative, but got {replicates}")
            return int(replicates)
        table = np.asarray(replicates)
        if "frame" in values and "T" in values and table.shape != (values["frame"].I, values["T"]):
            raise ValueError(f"replicate table of shape {table.shape} does not match I×T")
        if not np.issubdtype(table.dtype, np.integer) or np.any(table < 0):
            raise ValueError("replicate table has to hold non-negative integers")
        return table.astype(np.int64)

    @property
    def I(self) -> int:  # noqa: E741
        return self.frame.I

    @property
    def S(self) -> int:
        return self.states.S

    def replicate_table(self) -> np.ndarray:
        if isinstance(self.replicates, int):
            return np.full((self.I, self.T), self.replicates, dtype=np.int64)
        return self.replicates


class SimulatedDataset(BaseModel):
    """
    One simulated dataset with its truth.

    Parameters
    ----------
    z : OccupancyPanel
        latent states
    observations : ObservationSet
        records, with the true error flags in `observations.m`
    scenario : SimulationScenario
        the scenario it was drawn from
    """

    z: OccupancyPanel
    observations: ObservationSet
    scenario: SimulationScenario

    def truth(self) -> dict:
        """Values of the generating parameters, for the sidecar file of the dataset."""
        bw = self.scenario.bandwidth
        return dict(
            labels=self.scenario.states.labels,
            seed=self.scenario.seed,
            e=self.scenario.e,
            P=self.scenario.P.p.tolist(),
            phi=self.scenario.phi.phi.tolist(),
            sigma1=bw.sigma1,
            sigma2=bw.sigma2,
            rho=bw.rho,
            z=self.z.z.tolist(),
            m=self.observations.m.tolist(),
        )


def simulate_occupancy(scenario: SimulationScenario, rng: Optional[np.random.Generator] = None) -> OccupancyPanel:
    """
    Latent states of all sites: the first period from `phi`, each next one from the column of `P`
    of the previous state. Sites evolve independently.
    """
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    I, T = scenario.I, scenario.T  # noqa: E741
    z = np.empty((I, T), dtype=np.int64)
    z[:, 0] = sample_categorical_rows(rng, np.tile(scenario.phi.phi, (I, 1)))
    for t in range(1, T):
        z[:, t] = sample_categorical_rows(rng, scenario.P.p[:, z[:, t - 1]].T)
    return OccupancyPanel(z, S=scenario.S)


def simulate_observations(
    z: OccupancyPanel, scenario: SimulationScenario, rng: Optional[np.random.Generator] = None
) -> ObservationSet:
    """
    Records of every survey. A record is an error with probability `e`;
    an error shows a state drawn from the local dominance of its site, otherwise the record is the site state.
    """
    if z.I != scenario.I or z.T != scenario.T:
        raise ShapeMismatch(f"panel of shape {z.z.shape} does not match the scenario ({scenario.I}, {scenario.T})")
    rng = np.random.default_rng(scenario.seed) if rng is None else rng
    counts = scenario.replicate_table().ravel()
    cells = np.repeat(np.arange(scenario.I * scenario.T), counts)
    site, time = cells // scenario.T, cells % scenario.T
    g = dominance_field(z.z, kernel_matrix(scenario.frame, scenario.bandwidth), scenario.S)
    m = (rng.random(cells.size) < scenario.e).astype(np.int8)
    shown = sample_categorical_rows(rng, g[site, time]) if cells.size else np.empty(0, dtype=np.int64)
    state = np.where(m == 1, shown, z.z[site, time])
    return ObservationSet(scenario.I, scenario.T, site, time, state, m=m)


def simulate_dataset(scenario: SimulationScenario) -> SimulatedDataset:
    """Latent states, then records, from one random stream seeded with `scenario.seed`."""
    rng = np.random.default_rng(scenario.seed)
    z = simulate_occupancy(scenario, rng)
    return SimulatedDataset(z=z, observations=simulate_observations(z, scenario, rng), scenario=scenario)


@validate_arguments(config=ARRAY_CONFIG)
def run_scenario_batch(
    scenario: SimulationScenario, n_replicates: int, redraw_transitions: bool = False, workers: int = 1
) -> list[SimulatedDataset]:
    """
    Independent datasets of one scenario.
    Every replicate gets its own seed derived from `scenario.seed`, so the batch does not depend
    on the order or the process the datasets are generated in.

    Parameters
    ----------
    n_replicates : int
        number of datasets
    redraw_transitions : bool
        draw a new transition matrix from the flat Dirichlet prior for every replicate
    workers : int
        number of processes
    """
    if n_replicates < 1:
        raise ShapeMismatch(f"at least one replicate is needed, but got {n_replicates}")
    scenarios = []
    for seed in derive_seeds(scenario.seed, n_replicates):
        update: dict = dict(seed=seed)
        if redraw_transitions:
            draw_seed, seed = derive_seeds(seed, 2)
            update = dict(seed=seed, P=random_transition_matrix(scenario.S, np.random.default_rng(draw_seed)))
        scenarios += [scenario.copy(update=update)]
    if workers > 1 and n_replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            datasets = list(pool.map(simulate_dataset, scenarios))
    else:
        datasets = [simulate_dataset(item) for item in scenarios]
    logger.info(f"simulated {n_replicates} datasets, e={scenario.e}, {scenario.I} sites, {scenario.T} periods")
    return datasets
