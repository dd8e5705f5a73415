"""
Metrics
---------------------------
The naive transition estimator, community-dynamics quantities of a transition matrix
and the quality statistics of an estimator over a batch of simulated datasets.
"""
import logging
from typing import Any, Sequence, Union

import numpy as np

from .core.compat import ArrayModel, BaseModel
from .core.errors import (
    AbsorbingState,
    EmptyDraws,
    NoTransitions,
    NonConvergent,
    ReplicatedData,
    ShapeMismatch,
    ZeroSubdominant,
)
from .core.normalization import normalize_matrix
from .core.panel import ObservationSet
from .core.space import SiteFrame, StateSpace, TransitionMatrix
from .core.updates import transition_counts

logger = logging.getLogger(__name__)

EIGEN_ATOL = 1e-9
POWER_TOL = 1e-12
POWER_MAX_ITER = 1_000_000
RESIDUAL_TOL = 1e-10
SUBDOMINANT_FLOOR = 1e-14

MatrixLike = Union[TransitionMatrix, Any]


def _as_matrix(P: MatrixLike) -> np.ndarray:
    return P.p if isinstance(P, TransitionMatrix) else normalize_matrix(P)


def naive_estimate(data: ObservationSet, frame: SiteFrame, states: StateSpace) -> TransitionMatrix:
    """
    Transition frequencies between consecutive surveys of the same site, taking records at face value.
    Only pairs of periods `t - 1`, `t` that were both surveyed count.
    A state never seen as a source gets a uniform column, listed in `flagged_columns`.
    The site positions play no part in the estimate; `frame` has to describe the sites of `data`.

    Raises :py:class:`~occupancy_engine.core.errors.ReplicatedData` when a survey has more than one record
    and :py:class:`~occupancy_engine.core.errors.NoTransitions` when no pair of consecutive surveys exists.
    """
    if frame.I != data.I:
        raise ShapeMismatch(f"the site frame has {frame.I} sites, the observations {data.I}")
    S = states.S
    data.check_states(S)
    if data.R and data.counts().max() > 1:
        raise ReplicatedData("the naive estimator takes at most one record per survey")
    y = np.full((data.I, data.T), -1, dtype=np.int64)
    y[data.site, data.time] = data.state
    pairs = (y[:, :-1] >= 0) & (y[:, 1:] >= 0)
    if not np.any(pairs):
        raise NoTransitions("no site was surveyed in two consecutive periods")
    counts = np.bincount(y[:, 1:][pairs] * S + y[:, :-1][pairs], minlength=S * S).reshape(S, S)
    totals = counts.sum(axis=0)
    flagged = [int(k) for k in np.flatnonzero(totals == 0)]
    if flagged:
        logger.warning(f"states {[states.labels[k] for k in flagged]} never start a transition, columns set uniform")
    p = np.where(totals > 0, counts / np.maximum(totals, 1), 1.0 / S)
    return TransitionMatrix(p, atol=1e-9, flagged_columns=flagged)


def empirical_transitions(z: Any, S: int) -> np.ndarray:
    """Transition frequencies of a complete panel of states; columns without transitions are zero."""
    counts = transition_counts(np.asarray(z, dtype=np.int64), S)
    totals = counts.sum(axis=0)
    return counts / np.maximum(totals, 1)


def stationary_distribution(P: MatrixLike) -> np.ndarray:
    """
    Equilibrium composition `w` with `P w = w`, `sum(w) = 1`.
    The eigenvalue 1 has to be simple and the only one on the unit circle, otherwise the chain is
    reducible or periodic and :py:class:`~occupancy_engine.core.errors.NonConvergent` is raised.
    `w` is found by power iteration from the uniform vector and verified by its residual.
    """
    p = _as_matrix(P)
    eigenvalues = np.linalg.eigvals(p)
    at_one = np.sum(np.abs(eigenvalues - 1.0) < EIGEN_ATOL)
    on_circle = np.sum(np.abs(eigenvalues) > 1.0 - EIGEN_ATOL)
    if at_one != 1 or on_circle != 1:
        raise NonConvergent(f"eigenvalue 1 has multiplicity {at_one}, {on_circle} eigenvalues on the unit circle")
    S = p.shape[0]
    w = np.full(S, 1.0 / S)
    for _ in range(POWER_MAX_ITER):
        following = p @ w
        following /= following.sum()
        converged = np.max(np.abs(following - w)) < POWER_TOL
        w = following
        if converged:
            break
    else:
        raise NonConvergent(f"power iteration did not settle within {POWER_MAX_ITER} steps")
    residual = np.max(np.abs(p @ w - w))
    if residual > RESIDUAL_TOL:
        raise NonConvergent(f"stationary residual {residual:.3g} exceeds {RESIDUAL_TOL}")
    return w


def mean_turnover_time(P: MatrixLike) -> float:
    """
    Expected time a site keeps its state at equilibrium, :math:`\\sum_s w_s / (1 - p_{ss})`.
    """
    p = _as_matrix(P)
    w = stationary_distribution(p)
    stay = np.diag(p)
    present = w > 0
    if np.any(present & (stay >= 1.0)):
        raise AbsorbingState(f"states {np.flatnonzero(present & (stay >= 1.0)).tolist()} are absorbing")
    return float(np.sum(w[present] / (1.0 - stay[present])))


def damping_ratio(P: MatrixLike, strict: bool = False) -> float:
    """
    :math:`1 / |\\lambda_2|` with :math:`\\lambda_2` the eigenvalue of second-largest modulus.
    A vanishing subdominant eigenvalue gives `inf`, or raises
    :py:class:`~occupancy_engine.core.errors.ZeroSubdominant` if `strict` is set.
    """
    p = _as_matrix(P)
    if p.shape[0] < 2:
        raise ShapeMismatch("the damping ratio needs at least two states")
    moduli = np.sort(np.abs(np.linalg.eigvals(p)))[::-1]
    if moduli[1] < SUBDOMINANT_FLOOR:
        if strict:
            raise ZeroSubdominant(f"subdominant eigenvalue {moduli[1]:.3g} is zero")
        logger.warning("subdominant eigenvalue is zero, damping ratio is infinite")
        return float("inf")
    return float(1.0 / moduli[1])


class CommunityMetrics(ArrayModel):
    """
    Parameters
    ----------
    w : np.ndarray
        equilibrium relative dominance of the states
    turnover : float
        mean turnover time, in periods
    damping : float
        damping ratio, `inf` for a rank-one matrix
    """

    w: np.ndarray
    turnover: float
    damping: float


def community_metrics(P: MatrixLike, strict: bool = False) -> CommunityMetrics:
    p = _as_matrix(P)
    return CommunityMetrics(
        w=stationary_distribution(p), turnover=mean_turnover_time(p), damping=damping_ratio(p, strict)
    )


class EstimatorQuality(BaseModel):
    """
    Mean squared error of an estimator and its decomposition, `mse = bias2 + var`.
    `n` is the number of estimates it was computed from.
    """

    mse: float
    bias2: float
    var: float
    n: int = 0


def estimator_quality(estimates: Sequence[float], truth: float) -> EstimatorQuality:
    """Squared bias and population variance of the estimates around `truth`."""
    x = np.asarray(estimates, dtype=float).ravel()
    if x.size < 1:
        raise EmptyDraws("no estimates to assess")
    return EstimatorQuality(
        mse=float(np.mean((x - truth) ** 2)),
        bias2=float((x.mean() - truth) ** 2),
        var=float(np.var(x)),
        n=x.size,
    )


def matrix_quality(
    estimates: Sequence[MatrixLike], truth: Union[MatrixLike, Sequence[MatrixLike]], exclude_flagged: bool = True
) -> EstimatorQuality:
    """
    Entrywise :py:func:`estimator_quality` of transition-matrix estimates, averaged over the S² entries.
    `truth` is one matrix, or one matrix per estimate when every dataset had its own.
    Columns listed in `flagged_columns` of an estimate are left out of that entry's statistics.
    """
    if not len(estimates):
        raise EmptyDraws("no estimates to assess")
    matrices = np.stack([_as_matrix(estimate) for estimate in estimates])
    flagged = [set(getattr(estimate, "flagged_columns", [])) if exclude_flagged else set() for estimate in estimates]
    if isinstance(truth, TransitionMatrix) or np.asarray(truth, dtype=object).ndim == 2:
        truths = _as_matrix(truth)[None]
    else:
        truths = np.stack([_as_matrix(item) for item in truth])
    if truths.shape[1:] != matrices.shape[1:] or len(truths) not in (1, len(matrices)):
        raise ShapeMismatch(f"{len(truths)} truths of shape {truths.shape[1:]} do not match the estimates")
    truths = np.broadcast_to(truths, matrices.shape)

    S = matrices.shape[1]
    entries = []
    for j in range(S):
        for k in range(S):
            keep = [n for n in range(len(matrices)) if k not in flagged[n]]
            if not keep:
                continue
            # bias and variance of the errors, so a truth that differs between datasets is allowed
            errors = matrices[keep, j, k] - truths[keep, j, k]
            entries += [estimator_quality(errors, 0.0)]
    if not entries:
        raise EmptyDraws("every estimate is flagged")
    return EstimatorQuality(
        mse=float(np.mean([entry.mse for entry in entries])),
        bias2=float(np.mean([entry.bias2 for entry in entries])),
        var=float(np.mean([entry.var for entry in entries])),
        n=len(matrices),
    )
