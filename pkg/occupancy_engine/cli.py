"""
CLI
---------------------------
Command-line interface: `simulate`, `fit`, `metrics`, `diagnose` and `simstudy`.
Exit codes: 0 on success, 2 on invalid input or unreadable files, 3 when a `--strict` run did not converge.
"""
import argparse
import logging
import pathlib
import sys
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .config import ConfigFile, build, load_config
from .core.errors import ConvergenceFailure, DegenerateChains, OccupancyError, ShapeMismatch
from .core.keywords import Model, NAIVE
from .core.sampler import run_chains
from .core.space import TransitionMatrix
from .io import (
    parse_dataset,
    read_draws,
    read_matrix,
    truth_path,
    write_acceptance,
    write_dataset,
    write_draws,
    write_json,
)
from .metrics import community_metrics, naive_estimate
from .posterior import rhat, summarize
from .simulate import run_scenario_batch
from .study import StudyConfig, config_dict, fit_dict, run_study

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_CONVERGENCE = 0, 2, 3
RENORMALIZE_ATOL = 5e-3


def _config_file(path: Optional[str]) -> ConfigFile:
    return load_config(path) if path else ConfigFile()


def _out_dir(args, default: str) -> pathlib.Path:
    out = pathlib.Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    """Simulated datasets with their truth sidecars."""
    scenario_config = _config_file(args.config).scenario(dict(seed=args.seed, datasets=args.datasets))
    scenario = scenario_config.to_scenario()
    out = _out_dir(args, "simulated")
    datasets = run_scenario_batch(scenario, scenario_config.datasets)
    files = []
    for n, dataset in enumerate(datasets, 1):
        path = out / f"dataset_{n:03d}.csv"
        write_dataset(path, dataset.observations, scenario.frame, scenario.states)
        write_json(truth_path(path), dataset.truth())
        files += [path.name]
    write_json(out / "manifest.json", dict(datasets=files, scenario=scenario_config.dict()))
    return EXIT_OK


def _fit_overrides(args) -> dict:
    return dict(
        seed=args.seed,
        chains=args.chains,
        iterations=args.iters,
        burn_in=args.burnin,
        thin=args.thin,
        bandwidth_max=args.bandwidth_max,
        fix_rho_zero=True if args.fix_rho else None,
        store_states=True if args.store_states else None,
        workers=args.workers,
    )


def cmd_fit(args) -> int:
    """Fits a model to a dataset; the naive estimator writes its point estimate only."""
    observations, frame, states = parse_dataset(args.dataset, quadrat=args.quadrat, merge_rare=args.merge_rare)
    out = _out_dir(args, "fit")
    model = Model(args.model)
    if model == NAIVE:
        estimate = naive_estimate(observations, frame, states)
        rows = [
            dict(name=f"P_{j + 1}_{k + 1}", estimate=estimate.p[j, k], flagged=k in estimate.flagged_columns)
            for j in range(states.S)
            for k in range(states.S)
        ]
        pd.DataFrame(rows).to_csv(out / "summary.csv", index=False, float_format="%.17g")
        write_json(out / "manifest.json", dict(model=model.value, summary="summary.csv", labels=states.labels))
        print(pd.DataFrame(estimate.p, index=states.labels, columns=states.labels).to_string())
        return EXIT_OK

    config = _config_file(args.config).fit_config(model, _fit_overrides(args))
    draws = run_chains(observations, frame, states, config)
    report = summarize(draws, rhat_threshold=config.rhat_threshold, split=args.split)
    write_draws(out / "draws.csv", draws)
    write_acceptance(out / "acceptance.csv", draws)
    report.to_frame().to_csv(out / "summary.csv", index=False, float_format="%.17g")
    (out / "summary.txt").write_text(report.table() + "\n", encoding="utf-8")
    manifest = dict(
        model=model.value,
        dataset=str(args.dataset),
        labels=states.labels,
        draws="draws.csv",
        acceptance="acceptance.csv",
        summary="summary.csv",
        config=fit_dict(config),
    )
    if config.store_states:
        np.save(out / "states.npy", draws.z)
        manifest["states"] = "states.npy"
    write_json(out / "manifest.json", manifest)
    print(report.table())
    if args.strict and report.flagged():
        raise ConvergenceFailure(f"R-hat above {config.rhat_threshold} for {report.flagged()}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    """Equilibrium composition, mean turnover time and damping ratio of a transition matrix."""
    p = read_matrix(args.source)
    atol = args.atol if args.atol is not None else (RENORMALIZE_ATOL if args.renormalize else 1e-12)
    matrix = TransitionMatrix(p, atol=atol, renormalize=args.renormalize)
    metrics = community_metrics(matrix, strict=args.strict)
    S = matrix.S
    rows = [dict(quantity=f"w_{s + 1}", value=metrics.w[s]) for s in range(S)]
    rows += [dict(quantity="turnover", value=metrics.turnover), dict(quantity="damping", value=metrics.damping)]
    table = pd.DataFrame(rows)
    if args.out:
        path = pathlib.Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format="%.17g")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.6f}"))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    """R-hat of every parameter, Metropolis acceptance rates and a long trace table for plotting."""
    draws_path = pathlib.Path(args.draws)
    acceptance = args.acceptance or draws_path.with_name("acceptance.csv")
    draws = read_draws(draws_path, acceptance_path=acceptance, burn_in=args.burnin or 0)
    rows = []
    for name in draws.scalar_names():
        try:
            value = rhat(draws.scalar(name), split=args.split)
        except (DegenerateChains, ShapeMismatch):
            value = np.nan
        rows += [dict(parameter=name, rhat=value, flagged=bool(value > args.threshold))]
    table = pd.DataFrame(rows)
    out = _out_dir(args, "diagnose")
    table.to_csv(out / "rhat.csv", index=False, float_format="%.17g")
    draws.acceptance_rates().to_csv(out / "acceptance_rates.csv", index=False, float_format="%.17g")
    trace = draws.to_frame().melt(id_vars=["chain", "iteration"], var_name="parameter", value_name="value")
    trace.to_csv(out / "trace.csv", index=False, float_format="%.17g")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    flagged = table.loc[table["flagged"], "parameter"].tolist()
    if args.strict and flagged:
        raise ConvergenceFailure(f"R-hat above {args.threshold} for {flagged}")
    return EXIT_OK


def study_config(config_file: ConfigFile, args) -> StudyConfig:
    values = config_file.section("study")
    overrides = dict(seed=args.seed, workers=args.workers, output_dir=args.out)
    values.update({key: value for key, value in overrides.items() if value is not None})
    models = [Model(model) for model in values.get("models", [model.value for model in Model])]
    values["fits"] = {model: config_file.fit_config(model) for model in models if model != NAIVE}
    return build(StudyConfig, values, "study")


def cmd_simstudy(args) -> int:
    """Runs a simulation study and writes its quality table."""
    config = study_config(_config_file(args.config), args)
    result = run_study(config)
    write_json(pathlib.Path(config.output_dir) / "config.json", config_dict(config))
    print(result.table.to_string(index=False, float_format=lambda v: f"{v:.5f}"))
    return EXIT_OK


def _add_fit_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--chains", type=int)
    parser.add_argument("--iters", type=int, help="sweeps after the burn-in, before thinning")
    parser.add_argument("--burnin", type=int)
    parser.add_argument("--thin", type=int)
    parser.add_argument("--bandwidth-max", type=float, help="upper bound U of the bandwidth prior")
    parser.add_argument("--fix-rho", action="store_true", help="hold the kernel correlation at 0")
    parser.add_argument("--store-states", action="store_true", help="keep the latent states of every draw")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="occupancy", description="Spatial multistate dynamic occupancy models.")
    parser.add_argument("--version", action="version", version=__version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="simulate datasets of a scenario")
    simulate.add_argument("--config", help="YAML file with a `scenario` section")
    simulate.add_argument("--datasets", type=int)
    simulate.set_defaults(handler=cmd_simulate)

    fit = commands.add_parser("fit", help="fit a model to a dataset")
    fit.add_argument("dataset")
    fit.add_argument("--model", choices=[model.value for model in Model], default=Model.SPATIAL.value)
    fit.add_argument("--config", help="YAML file with a `fit` section")
    fit.add_argument("--quadrat")
    fit.add_argument("--merge-rare", type=int, metavar="THRESHOLD")
    fit.add_argument("--workers", type=int)
    fit.add_argument("--split", action="store_true", help="split chains for R-hat")
    fit.add_argument("--strict", action="store_true", help="exit with 3 if R-hat is above the threshold")
    _add_fit_flags(fit)
    fit.set_defaults(handler=cmd_fit)

    metrics = commands.add_parser("metrics", help="community metrics of a transition matrix")
    metrics.add_argument("source", help="summary CSV of a fit or a CSV matrix")
    metrics.add_argument("--renormalize", action="store_true", help="rescale columns rounded off by publication")
    metrics.add_argument("--atol", type=float, help="tolerated deviation of column sums from 1")
    metrics.add_argument("--strict", action="store_true", help="fail on a zero subdominant eigenvalue")
    metrics.set_defaults(handler=cmd_metrics)

    diagnose = commands.add_parser("diagnose", help="convergence diagnostics of stored draws")
    diagnose.add_argument("draws")
    diagnose.add_argument("--acceptance")
    diagnose.add_argument("--burnin", type=int)
    diagnose.add_argument("--split", action="store_true")
    diagnose.add_argument("--threshold", type=float, default=1.1)
    diagnose.add_argument("--strict", action="store_true")
    diagnose.set_defaults(handler=cmd_diagnose)

    simstudy = commands.add_parser("simstudy", help="run a simulation study")
    simstudy.add_argument("--config", help="YAML file with `study` and `fit` sections")
    simstudy.add_argument("--workers", type=int)
    simstudy.set_defaults(handler=cmd_simstudy)

    for command in (simulate, fit, metrics, diagnose, simstudy):
        command.add_argument("--out")
    for command in (simulate, fit, simstudy):
        command.add_argument("--seed", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except ConvergenceFailure as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_CONVERGENCE
    except (OccupancyError, ValueError, OSError) as exc:
        logger.error(f"{args.command}: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
