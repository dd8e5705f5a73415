"""
Study
---------------------------
Simulation study: datasets are simulated at several resampling-error levels, every requested model
is fitted to each of them and the estimates are compared with the truth by their
mean squared error, squared bias and variance.
"""
import logging
import pathlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Optional

import numpy as np
import pandas as pd

from .core.compat import BaseModel, Extra, validator
from .core.draws import p_column
from .core.errors import StudyError, error_handler, format_errors
from .core.keywords import NAIVE, Model, SPATIAL
from .core.sampler import FitConfig, run_chains
from .core.space import BandwidthMatrix, InitialDistribution, StateSpace, TransitionMatrix
from .io import write_json
from .metrics import estimator_quality, matrix_quality, naive_estimate
from .posterior import summarize
from .simulate import (
    SimulatedDataset,
    SimulationScenario,
    derive_seeds,
    make_grid,
    random_transition_matrix,
    run_scenario_batch,
)

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ["e", "model", "parameter", "mse", "bias2", "var", "n", "n_excluded"]


class StudyConfig(BaseModel, extra=Extra.forbid):
    """
    Design of a simulation study.

    Parameters
    ----------
    rows, cols : int
        grid of the sites
    S, T : int
        number of states and periods
    error_levels : list[float]
        resampling-error probabilities to simulate at
    datasets : int
        datasets per error level
    replicates : int
        records per survey; the naive estimator is skipped when it is above 1
    sigma1, sigma2, rho : float
        bandwidth of the generating kernel
    models : list[Model]
        models to fit
    fits : dict[Model, FitConfig]
        sampler settings of the MCMC models
    sigma_exclusion : float
        bandwidth estimates further than this from the truth are left out of the statistics
    e_exclusion : Optional[float]
        error-probability estimates above this are left out of the statistics
    transition_draw : str
        `replicate` draws a transition matrix per dataset, `batch` one for the whole study
    output_dir : str
        where the tables are written
    seed : int
        master seed
    workers : int
        processes the fits are spread over
    """

    rows: int = 10
    cols: int = 10
    S: int = 3
    T: int = 5
    error_levels: list[float] = [0.0, 0.3, 0.6]
    datasets: int = 24
    replicates: int = 1
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0
    models: list[Model] = [NAIVE, Model.NONSPATIAL, SPATIAL]
    fits: dict[Model, FitConfig] = {}
    sigma_exclusion: float = 10.0
    e_exclusion: Optional[float] = None
    transition_draw: str = "batch"
    output_dir: str = "study"
    seed: int = 0
    workers: int = 1

    @validator("rows", "cols", "S", "T", "datasets", "replicates", "workers")
    def validate_positive(cls, value, field):
        if value < 1:
            raise ValueError(f"{field.name} has to be at least 1, but got {value}")
        return value

    @validator("error_levels")
    def validate_levels(cls, levels):
        if not levels or any(not 0 <= level <= 1 for level in levels):
            raise ValueError(f"error levels have to be a non-empty list in [0, 1], but got {levels}")
        return levels

    @validator("transition_draw")
    def validate_draw(cls, value):
        if value not in ("replicate", "batch"):
            raise ValueError(f"transition_draw is `replicate` or `batch`, but got {value!r}")
        return value

    def fit_config(self, model: Model) -> FitConfig:
        return self.fits.get(model, FitConfig(model=model))


class FitJob(BaseModel):
    """One model fitted to one dataset."""

    level: float
    index: int
    model: Model
    dataset: SimulatedDataset
    fit: Optional[FitConfig] = None


class StudyResult(BaseModel):
    """
    Parameters
    ----------
    table : Any
        `pandas.DataFrame` with one row per error level, model and parameter
    estimates : Any
        `pandas.DataFrame` with one row per dataset, model and estimated parameter
    """

    table: Any
    estimates: Any
    output_dir: Optional[str] = None


def run_fit(job: FitJob) -> dict:
    """Point estimates of one fit: `P` (with flagged columns), and `e`, `sigma1`, `sigma2` where the model has them."""
    data = job.dataset.observations
    scenario = job.dataset.scenario
    if job.model == NAIVE:
        estimate = naive_estimate(data, scenario.frame, scenario.states)
        return dict(P=estimate.p, flagged=estimate.flagged_columns)
    draws = run_chains(data, scenario.frame, scenario.states, job.fit)
    report = summarize(draws, rhat_threshold=job.fit.rhat_threshold)
    if report.flagged():
        logger.warning(f"e={job.level}, dataset {job.index}, {job.model.value}: R-hat high for {report.flagged()}")
    result = dict(P=report.P, flagged=[], e=report.estimate("e"))
    if job.model == SPATIAL:
        result.update(sigma1=report.estimate("sigma1"), sigma2=report.estimate("sigma2"))
    return result


def simulate_level(config: StudyConfig, level: float, seed: int, P: Optional[TransitionMatrix]) -> list:
    draw_seed, data_seed = derive_seeds(seed, 2)
    scenario = SimulationScenario(
        frame=make_grid(config.rows, config.cols),
        states=StateSpace.of_size(config.S),
        T=config.T,
        phi=InitialDistribution(np.full(config.S, 1.0 / config.S), atol=1e-9),
        P=P if P is not None else random_transition_matrix(config.S, np.random.default_rng(draw_seed)),
        e=level,
        bandwidth=BandwidthMatrix(config.sigma1, config.sigma2, config.rho),
        replicates=config.replicates,
        seed=data_seed,
    )
    return run_scenario_batch(scenario, config.datasets, redraw_transitions=P is None)


def plan_jobs(config: StudyConfig) -> list[FitJob]:
    """All fits of the study in a fixed order: error level, dataset, model."""
    level_seeds = derive_seeds(config.seed, len(config.error_levels) + 1)
    batch_P = None
    if config.transition_draw == "batch":
        batch_P = random_transition_matrix(config.S, np.random.default_rng(level_seeds[-1]))
    models = list(config.models)
    if NAIVE in models and config.replicates > 1:
        logger.info("the naive estimator is skipped, it does not take replicated records")
        models.remove(NAIVE)
    jobs = []
    for level, seed in zip(config.error_levels, level_seeds):
        for index, dataset in enumerate(simulate_level(config, level, seed, batch_P)):
            fit_seeds = derive_seeds(dataset.scenario.seed, len(models))
            for model, fit_seed in zip(models, fit_seeds):
                fit = None if model == NAIVE else config.fit_config(model).copy(update=dict(seed=fit_seed, workers=1))
                jobs += [FitJob(level=level, index=index, model=model, dataset=dataset, fit=fit)]
    return jobs


def exclusion_mask(config: StudyConfig, parameter: str, values: list, truths: list) -> list[bool]:
    """Estimates kept in the statistics: bandwidth estimates near the truth and error estimates below the cap."""
    if parameter.startswith("sigma"):
        return [abs(value - truth) <= config.sigma_exclusion for value, truth in zip(values, truths)]
    if parameter == "e" and config.e_exclusion is not None:
        return [value <= config.e_exclusion for value in values]
    return [True] * len(values)


def quality_table(config: StudyConfig, jobs: list[FitJob], results: list[dict]) -> pd.DataFrame:
    rows = []
    for level in config.error_levels:
        for model in config.models:
            done = [(job, result) for job, result in zip(jobs, results) if job.level == level and job.model == model]
            if not done:
                continue
            label = f"e={level}, {model.value}"
            estimates = [
                TransitionMatrix(result["P"], atol=1e-9, flagged_columns=result["flagged"]) for _, result in done
            ]
            truths = [job.dataset.scenario.P for job, _ in done]
            quality = matrix_quality(estimates, truths)
            rows += [dict(e=level, model=model.value, parameter="P", n_excluded=0, **quality.dict())]
            scalars = [("e", lambda job: job.dataset.scenario.e)]
            if model == SPATIAL:
                scalars += [
                    ("sigma1", lambda job: job.dataset.scenario.bandwidth.sigma1),
                    ("sigma2", lambda job: job.dataset.scenario.bandwidth.sigma2),
                ]
            for parameter, truth_of in scalars:
                if parameter not in done[0][1]:
                    continue
                values = [result[parameter] for _, result in done]
                truth_values = [truth_of(job) for job, _ in done]
                keep = exclusion_mask(config, parameter, values, truth_values)
                excluded = len(keep) - sum(keep)
                if excluded:
                    logger.warning(f"{label}: {excluded} estimates of {parameter} excluded")
                values = [value for value, kept in zip(values, keep) if kept]
                truth_values = [truth for truth, kept in zip(truth_values, keep) if kept]
                if not values:
                    continue
                # errors around zero, so per-dataset truths are allowed
                errors = np.asarray(values) - np.asarray(truth_values)
                quality = estimator_quality(errors, 0.0)
                rows += [dict(e=level, model=model.value, parameter=parameter, n_excluded=excluded, **quality.dict())]
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def estimates_frame(jobs: list[FitJob], results: list[dict]) -> pd.DataFrame:
    rows = []
    for job, result in zip(jobs, results):
        truth = job.dataset.scenario
        S = truth.S
        for j in range(S):
            for k in range(S):
                rows += [(job.level, job.index, job.model.value, p_column(j, k), result["P"][j][k], truth.P.p[j, k])]
        for name, value in (("e", truth.e), ("sigma1", truth.bandwidth.sigma1), ("sigma2", truth.bandwidth.sigma2)):
            if name in result:
                rows += [(job.level, job.index, job.model.value, name, result[name], value)]
    return pd.DataFrame(rows, columns=["e", "dataset", "model", "parameter", "estimate", "truth"])


def run_study(config: StudyConfig, write: bool = True) -> StudyResult:
    """
    Runs every fit of the study, over `config.workers` processes, and tabulates the quality of the estimates.
    Failed fits are collected and raised together as :py:class:`~occupancy_engine.core.errors.StudyError`
    once all fits have finished.
    """
    jobs = plan_jobs(config)
    logger.info(f"study: {len(jobs)} fits over {len(config.error_levels)} error levels")
    results: list[Optional[dict]] = [None] * len(jobs)
    error_msgs: list = []

    def describe(job):
        return f"e={job.level}, dataset {job.index}, {job.model.value}"

    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_fit, job) for job in jobs]
            for n, (job, future) in enumerate(zip(jobs, futures)):
                try:
                    results[n] = future.result()
                except Exception as exc:
                    error_handler(error_msgs, f"{describe(job)}: {exc}", exc)
    else:
        for n, job in enumerate(jobs):
            try:
                results[n] = run_fit(job)
            except Exception as exc:
                error_handler(error_msgs, f"{describe(job)}: {exc}", exc)
    if error_msgs:
        raise StudyError(format_errors(error_msgs))

    table = quality_table(config, jobs, results)
    estimates = estimates_frame(jobs, results)
    result = StudyResult(table=table, estimates=estimates)
    if write:
        output = pathlib.Path(config.output_dir)
        output.mkdir(parents=True, exist_ok=True)
        table.to_csv(output / "study.csv", index=False, float_format="%.17g")
        estimates.to_csv(output / "estimates.csv", index=False, float_format="%.17g")
        write_json(
            output / "manifest.json",
            dict(table="study.csv", estimates="estimates.csv", config=config_dict(config)),
        )
        result.output_dir = str(output)
        logger.info(f"study tables written to {output}")
    return result


def config_dict(config: StudyConfig) -> dict:
    content = config.dict(exclude={"fits"})
    content["models"] = [model.value for model in config.models]
    content["fits"] = {model.value: fit_dict(fit) for model, fit in config.fits.items()}
    return content


def fit_dict(fit: FitConfig) -> dict:
    content = fit.dict()
    content["model"] = fit.model.value
    content["fixed"] = {name: np.asarray(value).tolist() for name, value in fit.fixed.items()}
    return content
