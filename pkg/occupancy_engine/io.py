"""
IO
---------------------------
Text formats of the engine.

A dataset file is a long-format CSV with one row per record, preceded by `#` header lines::

    # states: 1,2,3
    # periods: 10
    # site: 1,1.0,1.0
    # site: 2,2.0,1.0
    quadrat,site,x,y,t,replicate,state
    MC2,1,1.0,1.0,1,1,2

`t` and `replicate` are 1-based. An empty or `NA` state marks a missing survey.
The site table, the state list and the number of periods are optional; without them sites,
states and periods are taken from the rows.
"""
import json
import logging
import pathlib
from io import StringIO
from typing import Any, Optional, Union

import numpy as np
import pandas as pd

from .core.draws import ACCEPTANCE_COLUMNS, PosteriorDraws, p_column
from .core.errors import DuplicateRecord, ParseError, UnknownSite
from .core.normalization import merge_rare_states, relabel_states
from .core.panel import ObservationSet
from .core.space import SiteFrame, StateSpace

logger = logging.getLogger(__name__)

PathType = Union[str, pathlib.Path]
COLUMNS = ["quadrat", "site", "x", "y", "t", "replicate", "state"]
MISSING = {"", "NA"}
DEFAULT_QUADRAT = "Q1"


def _read_header(lines: list[str]) -> tuple[dict, int]:
    header: dict[str, Any] = {"sites": []}
    n = 0
    for n, line in enumerate(lines):
        if not line.startswith("#"):
            return header, n
        key, _, value = line[1:].partition(":")
        key, value = key.strip(), value.strip()
        if key == "states":
            header["states"] = [item.strip() for item in value.split(",")]
        elif key == "periods":
            try:
                header["periods"] = int(value)
            except ValueError:
                raise ParseError(f"periods has to be an integer, got {value!r}", n + 1) from None
        elif key == "site":
            items = [item.strip() for item in value.split(",")]
            try:
                header["sites"] += [(int(items[0]), float(items[1]), float(items[2]))]
            except (ValueError, IndexError):
                raise ParseError(f"site entries have the form `id,x,y`, got {value!r}", n + 1) from None
        elif key:
            logger.debug(f"ignoring header entry {key!r}")
    return header, len(lines)


def _numeric(frame: pd.DataFrame, column: str, kind=int, minimum=None) -> np.ndarray:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna().to_numpy()
    if kind is int:
        bad |= ~np.isclose(values.fillna(0) % 1, 0)
    if minimum is not None:
        bad |= (values.fillna(minimum) < minimum).to_numpy()
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(f"invalid {column} {frame[column].iloc[row]!r}", int(frame["line"].iloc[row]))
    return values.to_numpy().astype(np.int64 if kind is int else float)


def parse_dataset(
    path: PathType, quadrat: Optional[str] = None, merge_rare: Optional[int] = None
) -> tuple[ObservationSet, SiteFrame, StateSpace]:
    """
    Reads a dataset file.

    Parameters
    ----------
    path : PathType
        the CSV file
    quadrat : Optional[str]
        quadrat to read; required when the file holds several
    merge_rare : Optional[int]
        states recorded fewer than `merge_rare` times in total are merged into an `other` state

    Returns
    -------
    tuple[ObservationSet, SiteFrame, StateSpace]
        the records with 0-based sites, periods and state codes, the site positions in the order of the
        site table (or of the site ids) and the states with their original labels
    """
    lines = pathlib.Path(path).read_text(encoding="utf-8").splitlines()
    header, n_header = _read_header(lines)
    if n_header >= len(lines):
        raise ParseError("no column header found", n_header + 1)
    frame = pd.read_csv(StringIO("\n".join(lines[n_header:])), dtype=str, keep_default_na=False)
    frame.columns = [column.strip() for column in frame.columns]
    missing_columns = [column for column in COLUMNS if column not in frame.columns]
    if missing_columns:
        raise ParseError(f"missing columns {missing_columns}", n_header + 1)
    frame = frame.apply(lambda column: column.str.strip())
    frame["line"] = np.arange(len(frame)) + n_header + 2

    quadrats = sorted(frame["quadrat"].unique())
    if quadrat is None and len(quadrats) > 1:
        raise ParseError(f"the file holds quadrats {quadrats}, choose one")
    if quadrat is not None:
        if quadrat not in quadrats:
            raise ParseError(f"quadrat {quadrat!r} is not in the file, found {quadrats}")
        frame = frame[frame["quadrat"] == quadrat].reset_index(drop=True)

    site_ids = _numeric(frame, "site")
    x = _numeric(frame, "x", kind=float)
    y = _numeric(frame, "y", kind=float)
    t = _numeric(frame, "t", minimum=1) - 1
    replicate = _numeric(frame, "replicate", minimum=1)

    if header["sites"]:
        table = {site_id: (sx, sy) for site_id, sx, sy in header["sites"]}
        order = [site_id for site_id, _, _ in header["sites"]]
    else:
        table, order = {}, []
        for site_id, sx, sy in zip(site_ids, x, y):
            table.setdefault(int(site_id), (sx, sy))
        order = sorted(table)
    index = {site_id: i for i, site_id in enumerate(order)}
    for row, (site_id, sx, sy) in enumerate(zip(site_ids, x, y)):
        if site_id not in index:
            raise UnknownSite(f"line {frame['line'].iloc[row]}: site {site_id} is not in the site table")
        if not np.allclose(table[site_id], (sx, sy)):
            raise UnknownSite(f"line {frame['line'].iloc[row]}: site {site_id} is listed at {table[site_id]}")
    site = np.array([index[site_id] for site_id in site_ids], dtype=np.int64)

    keys = pd.DataFrame({"site": site, "t": t, "replicate": replicate})
    duplicated = keys.duplicated().to_numpy()
    if np.any(duplicated):
        row = int(np.flatnonzero(duplicated)[0])
        raise DuplicateRecord(
            f"line {frame['line'].iloc[row]}: site {site_ids[row]}, t {t[row] + 1}, replicate {replicate[row]} repeats"
        )

    T = max(header.get("periods", 0), int(t.max()) + 1 if t.size else 1)
    recorded = ~frame["state"].isin(MISSING).to_numpy()
    try:
        codes, labels = relabel_states(frame["state"][recorded], header.get("states"))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if merge_rare:
        codes, labels = merge_rare_states(codes, labels, merge_rare)
    # rows sorted by replicate, so the replicates of a survey keep their numbering
    order_rows = np.lexsort((replicate[recorded], t[recorded], site[recorded]))
    observations = ObservationSet(
        len(order), T, site[recorded][order_rows], t[recorded][order_rows], codes[order_rows]
    )
    sites = SiteFrame([table[site_id] for site_id in order])
    logger.info(f"read {observations.R} records of {observations.I} sites over {T} periods from {path}")
    return observations, sites, StateSpace(labels)


def _format_float(value: float) -> str:
    return repr(float(value))


def write_dataset(
    path: PathType,
    observations: ObservationSet,
    frame: SiteFrame,
    states: StateSpace,
    quadrat: str = DEFAULT_QUADRAT,
):
    """
    Writes a dataset in the canonical form: full header, sites numbered from 1,
    rows sorted by site, period and replicate, a row with an empty state for every missing survey.
    Writing what :py:func:`parse_dataset` read from a canonical file gives the same bytes.
    """
    header = [f"# states: {','.join(states.labels)}", f"# periods: {observations.T}"]
    header += [f"# site: {i + 1},{_format_float(x)},{_format_float(y)}" for i, (x, y) in enumerate(frame.coords)]
    rows = [",".join(COLUMNS)]
    counts = observations.counts()
    for i in range(observations.I):
        position = f"{_format_float(frame.coords[i, 0])},{_format_float(frame.coords[i, 1])}"
        for t in range(observations.T):
            if counts[i, t] == 0:
                rows += [f"{quadrat},{i + 1},{position},{t + 1},1,"]
            for n, code in enumerate(observations.replicates(i, t)):
                rows += [f"{quadrat},{i + 1},{position},{t + 1},{n + 1},{states.labels[code]}"]
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(header + rows) + "\n", encoding="utf-8")
    logger.info(f"wrote {observations.R} records to {path}")


def write_json(path: PathType, content: dict):
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(content, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: PathType) -> dict:
    return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))


def truth_path(dataset_path: PathType) -> pathlib.Path:
    """Sidecar file of the generating parameters of a simulated dataset."""
    dataset_path = pathlib.Path(dataset_path)
    return dataset_path.with_name(dataset_path.stem + ".truth.json")


def write_draws(path: PathType, draws: PosteriorDraws):
    """One row per retained draw: chain, iteration, `P` row-major, `e`, `phi` and the bandwidth."""
    frame = draws.to_frame()
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")


def write_acceptance(path: PathType, draws: PosteriorDraws):
    frame = draws.acceptance_frame()
    frame["accepted"] = frame["accepted"].astype(int)
    frame.to_csv(path, index=False, float_format="%.17g")


def read_draws(
    path: PathType,
    labels: Optional[list] = None,
    acceptance_path: Optional[PathType] = None,
    burn_in: int = 0,
) -> PosteriorDraws:
    frame = pd.read_csv(path)
    acceptance = None
    if acceptance_path is not None and pathlib.Path(acceptance_path).exists():
        acceptance = pd.read_csv(acceptance_path)
        if list(acceptance.columns) != ACCEPTANCE_COLUMNS:
            raise ParseError(f"acceptance log {acceptance_path} has columns {list(acceptance.columns)}")
    return PosteriorDraws.from_frame(frame, labels=labels, acceptance=acceptance, burn_in=burn_in)


def read_matrix(path: PathType) -> np.ndarray:
    """
    Reads a transition matrix from a summary CSV (rows named `P_j_k`) or from a plain CSV
    of S rows of S numbers, optionally with a header row.
    """
    frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    first = [str(value).strip() for value in frame.iloc[0]]
    if "name" in first and "estimate" in first:
        summary = pd.read_csv(path)
        estimates = dict(zip(summary["name"], summary["estimate"]))
        names = [name for name in estimates if str(name).startswith("P_")]
        S = int(round(np.sqrt(len(names))))
        if S < 2 or S * S != len(names):
            raise ParseError(f"{path} has {len(names)} transition entries, not a square number")
        return np.array([[estimates[p_column(j, k)] for k in range(S)] for j in range(S)], dtype=float)
    try:
        values = frame.apply(pd.to_numeric).to_numpy(dtype=float)
    except ValueError:
        values = frame.iloc[1:].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    if np.isnan(values).any():
        raise ParseError(f"{path} is not a numeric matrix")
    return values
