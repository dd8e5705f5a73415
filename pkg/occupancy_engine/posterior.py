"""
Posterior
---------------------------
Point estimates, credible intervals and convergence diagnostics of a fit.
See :py:class:`~occupancy_engine.core.draws.PosteriorDraws`.
Scalar parameters are estimated by the posterior mode, probability vectors (columns of `P`, `phi`)
by the spatial median, which keeps them on the simplex.
"""
import logging
from typing import Any, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist
from scipy.stats import gaussian_kde

from .core.compat import ArrayModel, BaseModel
from .core.draws import PosteriorDraws, p_column
from .core.errors import DegenerateChains, EmptyDraws, ShapeMismatch
from .core.kernel import dominance_field, kernel_matrix, one_hot, uniform_kernel
from .core.keywords import Model, SPATIAL
from .core.space import BandwidthMatrix, SiteFrame, TransitionMatrix

logger = logging.getLogger(__name__)

MODE_GRID_POINTS = 512
WEISZFELD_TOL = 1e-10
WEISZFELD_MAX_ITER = 10_000


def rhat(chains: Any, split: bool = False) -> float:
    """
    Potential scale reduction factor of one scalar,
    :math:`\\hat{R} = \\sqrt{((n - 1) / n \\cdot W + B / n) / W}` with `W` the mean within-chain variance
    and `B / n` the variance of the chain means.

    Parameters
    ----------
    chains : array_like
        C×n draws, one row per chain
    split : bool
        split every chain into halves first, so that a trend inside a chain counts as disagreement
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatch(f"expected a chains×draws array, but got shape {x.shape}")
    if split:
        half = x.shape[1] // 2
        x = np.concatenate([x[:, :half], x[:, x.shape[1] - half :]])
    C, n = x.shape
    if C < 2 or n < 2:
        raise ShapeMismatch(f"R-hat needs at least 2 chains of 2 draws, but got {C} chains of {n}")
    within = np.mean(np.var(x, axis=1, ddof=1))
    if within <= 0:
        raise DegenerateChains("every chain is constant")
    between = n * np.var(np.mean(x, axis=1), ddof=1)
    return float(np.sqrt(((n - 1) / n * within + between / n) / within))


def posterior_mode(draws: Any) -> float:
    """
    Mode of a Gaussian kernel density estimate (Silverman bandwidth) of the draws:
    the best of 512 grid points over the range of the draws, refined by golden-section search.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 1:
        raise EmptyDraws("no draws to take the mode of")
    if x.size < 2 or np.ptp(x) == 0:
        return float(x[0])
    kde = gaussian_kde(x, bw_method="silverman")
    grid = np.linspace(x.min(), x.max(), MODE_GRID_POINTS)
    density = kde(grid)
    k = int(np.argmax(density))
    best = grid[k]
    if 0 < k < MODE_GRID_POINTS - 1 and density[k] > max(density[k - 1], density[k + 1]):
        result = minimize_scalar(lambda v: -kde(v)[0], bracket=(grid[k - 1], grid[k], grid[k + 1]), method="golden")
        if grid[k - 1] <= result.x <= grid[k + 1] and -result.fun >= density[k]:
            best = result.x
    return float(best)


def spatial_median(draws: Any, tol: float = WEISZFELD_TOL, max_iter: int = WEISZFELD_MAX_ITER) -> np.ndarray:
    """
    Geometric median of probability vectors by Weiszfeld iteration, started from the mean.
    The median lies in the convex hull of the draws, so it is a probability vector too;
    it is renormalized to remove rounding drift.

    Parameters
    ----------
    draws : array_like
        n×S draws
    """
    X = np.asarray(draws, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise EmptyDraws(f"expected a non-empty draws×S array, but got shape {X.shape}")
    if X.shape[0] == 1:
        return X[0].copy()
    median = X.mean(axis=0)
    for _ in range(max_iter):
        distances = cdist(X, median[None, :]).ravel()
        weights = 1.0 / np.maximum(distances, 1e-15)
        updated = weights @ X / weights.sum()
        shift = np.linalg.norm(updated - median)
        median = updated
        if shift < tol:
            break
    median = np.clip(median, 0.0, None)
    return median / median.sum()


def credible_interval(draws: Any, level: float = 0.95) -> tuple[float, float]:
    """Central interval between the `(1 - level) / 2` and `(1 + level) / 2` quantiles (linear interpolation)."""
    if not 0 < level <= 1:
        raise ValueError(f"level has to lie in (0, 1], but got {level}")
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 1:
        raise EmptyDraws("no draws for an interval")
    lo, hi = np.quantile(x, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


class ParameterSummary(BaseModel):
    name: str
    estimate: float
    median: float
    lower: float
    upper: float
    rhat: Optional[float] = None
    draws: int
    flagged: bool = False


class SummaryReport(ArrayModel):
    """
    Summary of a fit.

    Parameters
    ----------
    model : Model
        the fitted model
    labels : list[str]
        state labels in code order
    P : np.ndarray
        point estimate of the transition matrix, spatial median of every column
    phi : np.ndarray
        point estimate of the initial distribution
    level : float
        level of the credible intervals
    parameters : list[ParameterSummary]
        one entry per scalar column; `rhat` is `None` for a single chain or a constant parameter
    """

    model: Model = SPATIAL
    labels: list[str]
    P: np.ndarray
    phi: np.ndarray
    level: float = 0.95
    rhat_threshold: float = 1.1
    parameters: list[ParameterSummary] = []

    def flagged(self) -> list[str]:
        return [row.name for row in self.parameters if row.flagged]

    def estimate(self, name: str) -> float:
        for row in self.parameters:
            if row.name == name:
                return row.estimate
        raise KeyError(f"no summary of {name!r}")

    def transition_matrix(self) -> TransitionMatrix:
        return TransitionMatrix(self.P, atol=1e-9)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.dict() for row in self.parameters])

    def table(self) -> str:
        """Human-readable table of the summary."""
        frame = self.to_frame()
        header = f"{self.model.value} model, states {', '.join(self.labels)}, {int(self.level * 100)}% intervals"
        return header + "\n" + frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")


def summarize(
    draws: PosteriorDraws, level: float = 0.95, rhat_threshold: float = 1.1, split: bool = False
) -> SummaryReport:
    """
    Applies the point-estimate rules to every parameter and checks convergence.
    Draws of all chains are pooled for the estimates; R-hat is computed per parameter
    and parameters above `rhat_threshold` are flagged.
    """
    if draws.n_draws == 0:
        raise EmptyDraws("the fit retained no draws")
    S = draws.S
    P = np.column_stack([spatial_median(draws.P[:, :, :, k].reshape(-1, S)) for k in range(S)])
    phi = spatial_median(draws.phi.reshape(-1, S))
    vector_estimates = {p_column(j, k): P[j, k] for j in range(S) for k in range(S)}
    vector_estimates.update({f"phi_{s + 1}": phi[s] for s in range(S)})

    rows = []
    for name in draws.scalar_names():
        values = draws.scalar(name)
        pooled = values.ravel()
        estimate = vector_estimates[name] if name in vector_estimates else posterior_mode(pooled)
        value = None
        if draws.n_chains >= 2 and draws.n_draws >= 2:
            try:
                value = rhat(values, split=split)
            except DegenerateChains:
                logger.debug(f"{name} is constant in every chain, no R-hat")
        flagged = value is not None and value > rhat_threshold
        if flagged:
            logger.warning(f"{name}: R-hat {value:.3f} exceeds {rhat_threshold}")
        lower, upper = credible_interval(pooled, level)
        rows += [
            ParameterSummary(
                name=name,
                estimate=estimate,
                median=float(np.median(pooled)),
                lower=lower,
                upper=upper,
                rhat=value,
                draws=pooled.size,
                flagged=flagged,
            )
        ]
    return SummaryReport(
        model=draws.model,
        labels=draws.labels,
        P=P,
        phi=phi,
        level=level,
        rhat_threshold=rhat_threshold,
        parameters=rows,
    )


def _snapshots(draws: PosteriorDraws) -> np.ndarray:
    if draws.z is None or draws.n_draws == 0:
        raise EmptyDraws("the fit kept no latent-state snapshots, rerun with store_states")
    return draws.z.reshape((-1,) + draws.z.shape[2:])


def occupancy_probabilities(draws: PosteriorDraws) -> tuple[np.ndarray, np.ndarray]:
    """
    Posterior probability of every state at every site and period, from the stored latent-state snapshots.

    Returns
    -------
    tuple[np.ndarray, np.ndarray]
        I×T×S probabilities and the I×T most probable state (lowest code on ties)
    """
    z = _snapshots(draws)
    probabilities = one_hot(z, draws.S).mean(axis=0)
    return probabilities, probabilities.argmax(axis=2)


def dominance_map(draws: PosteriorDraws, frame: SiteFrame) -> np.ndarray:
    """Posterior mean of the local dominance `g[i, t, s]`, each snapshot smoothed with the bandwidth of its draw."""
    z = _snapshots(draws)
    if z.shape[1] != frame.I:
        raise ShapeMismatch(f"snapshots have {z.shape[1]} sites, the frame {frame.I}")
    spatial = draws.model == SPATIAL
    bandwidths = zip(draws.sigma1.ravel(), draws.sigma2.ravel(), draws.rho.ravel()) if spatial else None
    total = np.zeros(z.shape[1:] + (draws.S,))
    K = uniform_kernel(frame.I)
    for snapshot in z:
        if spatial:
            K = kernel_matrix(frame, BandwidthMatrix(*next(bandwidths)))
        total += dominance_field(snapshot, K, draws.S)
    return total / z.shape[0]
