"""
Sampler
---------------------------
The sampler is described here.
:py:class:`GibbsSampler` is the main abstraction that moves a :py:class:`~occupancy_engine.core.state.ChainState`
one sweep further through the posterior of the occupancy model.
:py:func:`run_chain` and :py:func:`run_chains` drive it to produce
:py:class:`~occupancy_engine.core.draws.PosteriorDraws`.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Optional

import numpy as np

from .compat import BaseModel, Extra, validator
from .draws import ChainDraws, PosteriorDraws
from .errors import (
    CacheIncoherent,
    ChainError,
    EmptyData,
    OccupancyError,
    ShapeMismatch,
    ZeroSupport,
    error_handler,
    format_errors,
)
from .kernel import kernel_matrix, uniform_kernel, weighted_state_sums
from .keywords import NAIVE, Model, SPATIAL
from .normalization import normalize_distribution, normalize_matrix
from .panel import ObservationSet
from .space import MIN_BANDWIDTH, BandwidthMatrix, SiteFrame, StateSpace
from .state import CACHE_ATOL, ChainState, occupancy_counts
from .types import BANDWIDTH_NAMES, PARAMETER_NAMES, SeedType, SweepStage
from .updates import update_bandwidth, update_e, update_m, update_phi, update_transitions, update_z

logger = logging.getLogger(__name__)

MAX_RHO_STEP = 2.0
INIT_ATTEMPTS = 100


class FitConfig(BaseModel, extra=Extra.forbid):
    """
    Settings of an MCMC fit.

    Parameters
    ----------
    model : Model
        `spatial` or `nonspatial`
    chains : int
        number of independent chains
    iterations : int
        sweeps after the burn-in, before thinning
    burn_in : int
        discarded sweeps
    thin : int
        every `thin`-th sweep after the burn-in is retained
    bandwidth_max : float
        upper bound `U` of the uniform prior of the bandwidth scales
    fix_rho_zero : bool
        hold the kernel correlation at 0
    adapt : bool
        tune the Metropolis steps during the burn-in, towards `target_acceptance`
    fixed : dict[str, Any]
        parameters held at the given value for the whole run
    audit_every : int
        compare the dominance cache with a full recomputation every `audit_every` sweeps, 0 switches it off
    workers : int
        number of processes the chains are spread over
    """

    model: Model = SPATIAL
    chains: int = 3
    iterations: int = 3000
    burn_in: int = 3000
    thin: int = 3
    bandwidth_max: float = 20.0
    fix_rho_zero: bool = False
    adapt: bool = True
    adapt_interval: int = 50
    target_acceptance: float = 0.44
    initial_step: float = 0.5
    store_states: bool = False
    audit_every: int = 0
    rhat_threshold: float = 1.1
    workers: int = 1
    seed: int = 0
    fixed: dict[str, Any] = {}

    @validator("model")
    def validate_model(cls, model):
        if model == NAIVE:
            raise ValueError("the naive estimator is not fitted by MCMC")
        return model

    @validator("chains", "thin", "workers", "adapt_interval")
    def validate_positive(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} has to be at least 1, but got {value}")
        return value

    @validator("iterations", "burn_in", "audit_every", "seed")
    def validate_non_negative(cls, value, field):
        if value < 0:
            raise ValueError(f"{field.name} cannot be negative, but got {value}")
        return value

    @validator("bandwidth_max", "initial_step")
    def validate_scale(cls, value, field):
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"{field.name} has to be positive, but got {value}")
        return value

    @validator("target_acceptance")
    def validate_rate(cls, value):
        if not 0 < value < 1:
            raise ValueError(f"target_acceptance has to lie in (0, 1), but got {value}")
        return value

    @validator("fixed")
    def validate_fixed(cls, fixed, values):
        unknown = sorted(set(fixed) - set(PARAMETER_NAMES))
        if unknown:
            raise ValueError(f"unknown parameters {unknown}, expected some of {PARAMETER_NAMES}")
        fixed = dict(fixed)
        if "P" in fixed:
            fixed["P"] = normalize_matrix(fixed["P"])
        if "phi" in fixed:
            fixed["phi"] = normalize_distribution(fixed["phi"])
        if "e" in fixed:
            fixed["e"] = float(fixed["e"])
            if not 0 <= fixed["e"] <= 1:
                raise ValueError(f"e has to lie in [0, 1], but got {fixed['e']}")
        for name in ("sigma1", "sigma2"):
            if name in fixed:
                fixed[name] = float(fixed[name])
                if not fixed[name] >= MIN_BANDWIDTH:
                    raise ValueError(f"{name} has to be at least {MIN_BANDWIDTH}, but got {fixed[name]}")
        if "rho" in fixed:
            fixed["rho"] = float(fixed["rho"])
            if not -1 < fixed["rho"] < 1:
                raise ValueError(f"rho has to lie in (-1, 1), but got {fixed['rho']}")
            if values.get("fix_rho_zero") and fixed["rho"] != 0:
                raise ValueError("fix_rho_zero contradicts a fixed non-zero rho")
        return fixed

    def free_bandwidth(self) -> tuple[str, ...]:
        """Bandwidth parameters updated by Metropolis steps."""
        if self.model != SPATIAL:
            return ()
        held = set(self.fixed) | ({"rho"} if self.fix_rho_zero else set())
        return tuple(name for name in BANDWIDTH_NAMES if name not in held)

    @property
    def retained(self) -> int:
        """number of draws kept per chain"""
        return self.iterations // self.thin


class CacheAudit(BaseModel):
    """
    Sweep handler which recomputes the dominance cache from scratch and compares it with the maintained one.
    Raises :py:class:`~occupancy_engine.core.errors.CacheIncoherent` on drift beyond `atol`.
    """

    every: int = 100
    atol: float = CACHE_ATOL

    def __call__(self, state: ChainState, sampler: "GibbsSampler"):
        if self.every and state.iteration % self.every == 0:
            deviation = state.cache_deviation()
            logger.debug(f"cache audit at sweep {state.iteration}: deviation {deviation:.3g}")
            if deviation > self.atol:
                raise CacheIncoherent(f"dominance cache deviates by {deviation:.3g} at sweep {state.iteration}")


class ProgressLogger(BaseModel):
    """Sweep handler which logs the current parameters every `every` sweeps."""

    every: int = 500

    def __call__(self, state: ChainState, sampler: "GibbsSampler"):
        if self.every and state.iteration % self.every == 0:
            bandwidth = "" if state.bandwidth is None else f", bandwidth={state.bandwidth}"
            logger.info(f"sweep {state.iteration}: e={state.e:.4f}, errors={int(state.m.sum())}{bandwidth}")


def cache_audit(every: int = 100, atol: float = CACHE_ATOL) -> CacheAudit:
    return CacheAudit(every=every, atol=atol)


def progress_logger(every: int = 500) -> ProgressLogger:
    return ProgressLogger(every=every)


def initial_states(data: ObservationSet, S: int) -> np.ndarray:
    """
    Starting latent states: the modal record of every survey, lowest code on ties.
    A missing survey takes the state of the nearest surveyed period of the same site, the earlier one on ties;
    a site without any record takes the modal state of all records.
    """
    I, T = data.I, data.T  # noqa: E741
    table = np.zeros((I * T, S), dtype=np.int64)
    np.add.at(table, (data.site * T + data.time, data.state), 1)
    observed = (table.sum(axis=1) > 0).reshape(I, T)
    z = np.where(observed, table.argmax(axis=1).reshape(I, T), -1)
    global_mode = int(np.bincount(data.state, minlength=S).argmax())
    for i in range(I):
        times = np.flatnonzero(observed[i])
        if not times.size:
            z[i] = global_mode
            continue
        for t in np.flatnonzero(z[i] < 0):
            z[i, t] = z[i, times[np.argmin(np.abs(times - t))]]
    return z.astype(np.int64)


def repair_support(z: np.ndarray, data: ObservationSet, S: int) -> np.ndarray:
    """
    Makes every recorded state held by at least one site at its period, so that every record
    disagreeing with its own site can be a resampling error.
    A site that recorded the missing state moves into it, provided its current state stays held by another site.
    """
    for _ in range(data.T * S + 1):
        occupancy = occupancy_counts(z, S)
        disagrees = data.state != z[data.site, data.time]
        unsupported = np.flatnonzero(disagrees & (occupancy[data.time, data.state] == 0))
        if not unsupported.size:
            return z
        t, y = int(data.time[unsupported[0]]), int(data.state[unsupported[0]])
        recorders = np.unique(data.site[(data.time == t) & (data.state == y)])
        movable = [j for j in recorders if occupancy[t, z[j, t]] > 1]
        if not movable:
            raise ZeroSupport(f"state {y} is recorded at period {t} but no site can hold it")
        z[movable[0], t] = y
    return z


def _error_log_likelihood(data: ObservationSet, m: np.ndarray, W: np.ndarray, D: np.ndarray) -> float:
    flagged = m == 1
    with np.errstate(divide="ignore"):
        values = np.log(W[data.site[flagged], data.time[flagged], data.state[flagged]])
    return float(np.sum(values - np.log(D[data.site[flagged]])))


def initial_bandwidth(
    data: ObservationSet,
    frame: SiteFrame,
    z: np.ndarray,
    m: np.ndarray,
    S: int,
    config: FitConfig,
    rng: np.random.Generator,
) -> BandwidthMatrix:
    """Draws the bandwidth from its prior until the error records have a finite likelihood."""
    fixed = config.fixed
    for _ in range(INIT_ATTEMPTS):
        sigma1 = fixed.get("sigma1", None) or rng.uniform(MIN_BANDWIDTH, config.bandwidth_max)
        sigma2 = fixed.get("sigma2", None) or rng.uniform(MIN_BANDWIDTH, config.bandwidth_max)
        rho = fixed.get("rho", 0.0 if config.fix_rho_zero else None)
        rho = rng.uniform(-1.0, 1.0) if rho is None else rho
        bw = BandwidthMatrix(sigma1, sigma2, rho)
        K = kernel_matrix(frame, bw)
        if np.isfinite(_error_log_likelihood(data, m, weighted_state_sums(z, K, S), K.sum(axis=1))):
            return bw
    bw = BandwidthMatrix(
        fixed.get("sigma1", config.bandwidth_max), fixed.get("sigma2", config.bandwidth_max), fixed.get("rho", 0.0)
    )
    logger.warning(f"no prior draw of the bandwidth gave a finite likelihood, starting from {bw}")
    return bw


def init_chain(
    data: ObservationSet, frame: SiteFrame, states: StateSpace, config: FitConfig, seed: SeedType = 0
) -> ChainState:
    """
    Creates the starting state of a chain.
    Latent states start from the records (see :py:func:`initial_states`), error flags mark the records
    that disagree with them, the parameters are drawn from their priors unless they are fixed.
    """
    validate_fit_inputs(data, frame, states)
    S = states.S
    rng = np.random.default_rng(seed)
    fixed = config.fixed

    z = repair_support(initial_states(data, S), data, S)
    m = (data.state != z[data.site, data.time]).astype(np.int8)
    P = fixed["P"] if "P" in fixed else np.column_stack([rng.dirichlet(np.ones(S)) for _ in range(S)])
    if P.shape != (S, S):
        raise ShapeMismatch(f"fixed transition matrix of shape {P.shape} does not match {S} states")
    phi = fixed["phi"] if "phi" in fixed else rng.dirichlet(np.ones(S))
    if phi.shape != (S,):
        raise ShapeMismatch(f"fixed initial distribution of shape {phi.shape} does not match {S} states")
    e = fixed["e"] if "e" in fixed else rng.beta(1.0, 1.0)

    if config.model == SPATIAL:
        bandwidth = initial_bandwidth(data, frame, z, m, S, config, rng)
        K = kernel_matrix(frame, bandwidth)
    else:
        bandwidth, K = None, uniform_kernel(data.I)
    steps = {name: min(config.initial_step, MAX_RHO_STEP) for name in config.free_bandwidth()}
    return ChainState.build(z, m, P, phi, e, K, bandwidth=bandwidth, step_sizes=steps)


class GibbsSampler(BaseModel):
    """
    The class which moves a :py:class:`~occupancy_engine.core.state.ChainState` through one sweep
    of the Metropolis-within-Gibbs sampler per call.
    A sweep updates all error flags, all latent states (sites fastest, then periods),
    the transition matrix, the initial distribution, the error probability
    and, for the spatial model, the bandwidth.

    Parameters
    ----------

    data : ObservationSet
        the records the chain is conditioned on

    frame : SiteFrame
        site positions, used for the kernel

    states : StateSpace
        the ecological states

    config : FitConfig
        fit settings; fixed parameters are never updated

    handlers: dict[SweepStage, list[Callable]] = {}
        This variable is responsible for the usage of external handlers on
        the certain stages of a sweep.

        * key: :py:class:`~occupancy_engine.core.types.SweepStage` - stage after which the handler is called
        * value: list[Callable] - the handlers, called as `handler(state, sampler)`
    """

    data: ObservationSet
    frame: SiteFrame
    states: StateSpace
    config: FitConfig = FitConfig()
    handlers: dict[SweepStage, list[Callable]] = {}

    class Config:
        arbitrary_types_allowed = True

    def __init__(
        self,
        data: ObservationSet,
        frame: SiteFrame,
        states: StateSpace,
        config: Optional[FitConfig] = None,
        handlers: Optional[dict] = None,
        **kwargs,
    ):
        if frame.I != data.I:
            raise ShapeMismatch(f"the site frame has {frame.I} sites, the observations {data.I}")
        data.check_states(states.S)
        config = FitConfig() if config is None else config
        handlers = {stage: list(funcs) for stage, funcs in (handlers or {}).items()}
        if config.audit_every:
            handlers.setdefault(SweepStage.FINISH_SWEEP, []).append(cache_audit(config.audit_every))
        super().__init__(data=data, frame=frame, states=states, config=config, handlers=handlers, **kwargs)

    def __call__(self, state: ChainState, rng: np.random.Generator) -> ChainState:
        fixed = self.config.fixed

        update_m(state, self.data, rng)
        self._run_handlers(state, SweepStage.UPDATE_M)

        update_z(state, self.data, rng)
        self._run_handlers(state, SweepStage.UPDATE_Z)

        if "P" not in fixed:
            update_transitions(state, rng)
        self._run_handlers(state, SweepStage.UPDATE_TRANSITIONS)

        if "phi" not in fixed:
            update_phi(state, rng)
        self._run_handlers(state, SweepStage.UPDATE_PHI)

        if "e" not in fixed:
            update_e(state, rng)
        self._run_handlers(state, SweepStage.UPDATE_E)

        free = self.config.free_bandwidth()
        if free:
            decisions = update_bandwidth(state, self.data, self.frame, rng, self.config.bandwidth_max, free)
            state.acceptance_log += [(state.iteration, name, step, accepted) for name, step, accepted in decisions]
            self._run_handlers(state, SweepStage.UPDATE_BANDWIDTH)

        state.iteration += 1
        self._run_handlers(state, SweepStage.FINISH_SWEEP)
        return state

    def adapt(self, state: ChainState):
        """
        Scales every Metropolis step up when the acceptance rate of the last batch is above the target
        and down otherwise, by an amount that shrinks with the number of batches.
        """
        batch = max(state.iteration // self.config.adapt_interval, 1)
        delta = min(0.25, 1.0 / np.sqrt(batch))
        for name, step in state.step_sizes.items():
            proposed = state.proposed.get(name, 0)
            if not proposed:
                continue
            rate = state.accepted.get(name, 0) / proposed
            step = step * np.exp(delta if rate > self.config.target_acceptance else -delta)
            state.step_sizes[name] = min(step, MAX_RHO_STEP) if name == "rho" else step
            logger.debug(f"sweep {state.iteration}: {name} acceptance {rate:.2f}, step {state.step_sizes[name]:.4g}")
        state.proposed, state.accepted = {}, {}

    def _run_handlers(self, state: ChainState, stage: SweepStage):
        [handler(state, self) for handler in self.handlers.get(stage, [])]


def chain_seeds(seed: SeedType, chains: int) -> list[np.random.SeedSequence]:
    """Independent seeds of the chains of a fit."""
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return sequence.spawn(chains)


def run_chain(
    data: ObservationSet,
    frame: SiteFrame,
    states: StateSpace,
    config: FitConfig,
    chain_seed: SeedType,
    chain: int = 0,
    handlers: Optional[dict] = None,
) -> ChainDraws:
    """
    Runs one chain: `config.burn_in` discarded sweeps, then `config.iterations` sweeps thinned by `config.thin`.
    The initial values and the sweeps use separate random streams spawned from `chain_seed`.
    Update errors are re-raised as :py:class:`~occupancy_engine.core.errors.ChainError` with the sweep they happened in.
    """
    sequence = chain_seed if isinstance(chain_seed, np.random.SeedSequence) else np.random.SeedSequence(chain_seed)
    init_seed, sweep_seed = sequence.spawn(2)
    sampler = GibbsSampler(data, frame, states, config, handlers)
    try:
        state = init_chain(data, frame, states, config, init_seed)
        sampler._run_handlers(state, SweepStage.CHAIN_INIT)
    except OccupancyError as exc:
        raise ChainError(f"initialization failed: {exc}", chain=chain) from exc
    rng = np.random.default_rng(sweep_seed)
    logger.info(f"chain {chain}: {config.model.value} model, {config.burn_in} + {config.iterations} sweeps")

    S, retained = states.S, config.retained
    draws = dict(
        P=np.empty((retained, S, S)),
        phi=np.empty((retained, S)),
        e=np.empty(retained),
        iterations=np.empty(retained, dtype=np.int64),
    )
    spatial = config.model == SPATIAL
    if spatial:
        draws.update({name: np.empty(retained) for name in BANDWIDTH_NAMES})
    if config.store_states:
        draws["z"] = np.empty((retained, data.I, data.T), dtype=np.int64)

    d = 0
    for iteration in range(config.burn_in + config.iterations):
        try:
            sampler(state, rng)
        except OccupancyError as exc:
            raise ChainError(str(exc), chain=chain, iteration=iteration) from exc
        if config.adapt and iteration < config.burn_in and (iteration + 1) % config.adapt_interval == 0:
            sampler.adapt(state)
        if iteration >= config.burn_in and (iteration - config.burn_in + 1) % config.thin == 0:
            draws["P"][d], draws["phi"][d], draws["e"][d] = state.P, state.phi, state.e
            draws["iterations"][d] = iteration
            if spatial:
                for name in BANDWIDTH_NAMES:
                    draws[name][d] = getattr(state.bandwidth, name)
            if config.store_states:
                draws["z"][d] = state.z
            d += 1
    logger.info(f"chain {chain}: finished with {retained} draws")
    return ChainDraws(acceptance=state.acceptance_log, **draws)


def run_chains(
    data: ObservationSet,
    frame: SiteFrame,
    states: StateSpace,
    config: FitConfig,
    handlers: Optional[dict] = None,
) -> PosteriorDraws:
    """
    Runs `config.chains` independent chains, over `config.workers` processes when there are more than one.
    Chains keep their order whatever the process that ran them. Handlers have to be picklable
    to cross process boundaries.
    Failures of all chains are collected and raised together as one
    :py:class:`~occupancy_engine.core.errors.ChainError`.
    """
    seeds = chain_seeds(config.seed, config.chains)
    results: list[Optional[ChainDraws]] = [None] * config.chains
    error_msgs: list = []
    if config.workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, config.chains)) as pool:
            futures = [
                pool.submit(run_chain, data, frame, states, config, seed, chain, handlers)
                for chain, seed in enumerate(seeds)
            ]
            for chain, future in enumerate(futures):
                try:
                    results[chain] = future.result()
                except Exception as exc:
                    error_handler(error_msgs, f"chain {chain}: {exc}", exc)
    else:
        for chain, seed in enumerate(seeds):
            try:
                results[chain] = run_chain(data, frame, states, config, seed, chain, handlers)
            except Exception as exc:
                error_handler(error_msgs, f"chain {chain}: {exc}", exc)
    if error_msgs:
        raise ChainError(format_errors(error_msgs))
    return PosteriorDraws.from_chains(results, config.model, states.labels, burn_in=config.burn_in)


def validate_fit_inputs(data: ObservationSet, frame: SiteFrame, states: StateSpace):
    """Raises the error a fit of these inputs would stop with, before any chain starts."""
    if data.R == 0:
        raise EmptyData("the observation set has no records")
    data.check_states(states.S)
    if frame.I != data.I:
        raise ShapeMismatch(f"the site frame has {frame.I} sites, the observations {data.I}")
