"""
Normalization
---------------------------
Checks and conversions of the numeric inputs of the model:
stochastic matrices, probability vectors, coordinates and state labels.
Nothing is renormalized unless the caller asks for it.
"""
import logging
from collections import Counter
from typing import Any, Optional, Sequence

import numpy as np

from .errors import (
    InvalidDistribution,
    InvalidSiteFrame,
    InvalidStateSpace,
    NegativeEntry,
    NonSquare,
    NonStochastic,
)

logger = logging.getLogger(__name__)

STOCHASTIC_ATOL = 1e-12
OTHER_LABEL = "other"


def normalize_matrix(p: Any, atol: float = STOCHASTIC_ATOL, renormalize: bool = False) -> np.ndarray:
    """
    Checks that `p` is a column-stochastic matrix and returns it as a float array.

    Parameters
    ----------
    p : array_like
        S×S matrix, `p[j, k]` is the probability of the transition from state `k` to state `j`.
    atol : float
        Largest tolerated deviation of a column sum from 1.
    renormalize : bool
        Divide every column by its sum after the check passed.
        Meant for published matrices rounded to a few decimals, where `atol` is set to the rounding error.

    Returns
    -------
    np.ndarray
        The checked matrix.
    """
    arr = np.array(p, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise NonSquare(f"transition matrix has to be square, but got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonStochastic("transition matrix has non-finite entries")
    if np.any(arr < 0):
        column = int(np.argwhere(arr < 0)[0][1])
        raise NegativeEntry(f"transition matrix has a negative entry in column {column}")
    sums = arr.sum(axis=0)
    deviation = np.abs(sums - 1.0)
    if np.any(deviation > atol) or np.any(arr > 1.0):
        column = int(np.argmax(deviation))
        raise NonStochastic(f"column {column} sums to {sums[column]!r}, deviation {deviation[column]:.3g} > {atol=}")
    if renormalize:
        arr = arr / sums
    return arr


def normalize_distribution(v: Any, atol: float = STOCHASTIC_ATOL, renormalize: bool = False) -> np.ndarray:
    """
    Checks that `v` is a probability vector and returns it as a float array.
    """
    arr = np.array(v, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidDistribution(f"probability vector has to be one-dimensional, but got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise InvalidDistribution(f"probability vector entries have to lie in [0, 1], got {arr}")
    total = arr.sum()
    if abs(total - 1.0) > atol:
        raise InvalidDistribution(f"probability vector sums to {total!r}, deviation > {atol=}")
    if renormalize:
        arr = arr / total
    return arr


def normalize_coords(coords: Any) -> np.ndarray:
    """
    Returns the site coordinates as an I×2 float array.
    Duplicated positions are allowed, the kernel weights them like any other pair, but they are reported.
    """
    arr = np.array(coords, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise InvalidSiteFrame(f"coordinates have to be an I×2 array with I >= 1, but got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidSiteFrame("coordinates have to be finite")
    _, counts = np.unique(arr, axis=0, return_counts=True)
    if np.any(counts > 1):
        logger.warning(f"{int(np.sum(counts[counts > 1]))} sites share a position with another site")
    return arr


def normalize_labels(labels: Sequence[Any]) -> list[str]:
    labels = [str(label) for label in labels]
    if len(labels) < 2:
        raise InvalidStateSpace(f"at least two states are needed, but got {labels}")
    if len(set(labels)) != len(labels):
        duplicated = sorted(label for label, count in Counter(labels).items() if count > 1)
        raise InvalidStateSpace(f"state labels have to be unique, duplicated: {duplicated}")
    return labels


def label_sort_key(label: str):
    """Integer-looking labels sort numerically, the others after them alphabetically."""
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def relabel_states(values: Sequence[Any], labels: Optional[Sequence[Any]] = None) -> tuple[np.ndarray, list[str]]:
    """
    Maps raw state values onto dense 0-based codes.

    Parameters
    ----------
    values : Sequence[Any]
        Recorded states, e.g. the `state` column of a dataset file.
    labels : Optional[Sequence[Any]]
        Declared state labels in code order. If not given, the sorted distinct values are used.

    Returns
    -------
    tuple[np.ndarray, list[str]]
        Codes for `values` and the label of every code.
    """
    values = [str(value) for value in values]
    if labels is None:
        labels = sorted(set(values), key=label_sort_key)
    labels = [str(label) for label in labels]
    index = {label: code for code, label in enumerate(labels)}
    unknown = sorted(set(values) - set(index))
    if unknown:
        raise InvalidStateSpace(f"states {unknown} are not declared in {labels}")
    return np.array([index[value] for value in values], dtype=np.int64), labels


def merge_rare_states(
    codes: np.ndarray, labels: Sequence[str], threshold: int, other_label: str = OTHER_LABEL
) -> tuple[np.ndarray, list[str]]:
    """
    Allocates states with fewer than `threshold` occurrences in total to the `other_label` state.
    The `other_label` state is never merged away; it is appended if it does not exist yet.
    """
    codes = np.asarray(codes, dtype=np.int64)
    labels = list(labels)
    counts = np.bincount(codes, minlength=len(labels))
    rare = [code for code, count in enumerate(counts) if count < threshold and labels[code] != other_label]
    if not rare:
        return codes, labels
    kept = [code for code in range(len(labels)) if code not in rare]
    new_labels = [labels[code] for code in kept]
    if other_label not in new_labels:
        new_labels += [other_label]
    mapping = np.empty(len(labels), dtype=np.int64)
    for code in range(len(labels)):
        target = other_label if code in rare else labels[code]
        mapping[code] = new_labels.index(target)
    logger.info(f"merged rare states {[labels[code] for code in rare]} into {other_label!r}")
    return mapping[codes], normalize_labels(new_labels)
