"""
State
---------------------------
Data structure which holds one Markov chain of the sampler: the latent states, the parameters
and the caches that make single-site updates cheap.
A chain state is owned by one worker at a time; it is moved between processes, never shared.
"""
import logging
from typing import Optional

import numpy as np

from .compat import ArrayModel
from .kernel import weighted_state_sums
from .panel import ObservationSet
from .space import BandwidthMatrix

logger = logging.getLogger(__name__)

CACHE_ATOL = 1e-9


class ChainState(ArrayModel):
    """
    The structure which is used for the storage of the current values of a chain.

    Parameters
    ----------

    z : np.ndarray
        I×T latent states
    m : np.ndarray
        resampling-error flag of every record of the observation set
    P : np.ndarray
        S×S column-stochastic transition matrix
    phi : np.ndarray
        initial distribution
    e : float
        resampling-error probability
    bandwidth : Optional[BandwidthMatrix]
        kernel bandwidth, `None` for the non-spatial model
    K : np.ndarray
        I×I kernel matrix of the current bandwidth (all ones for the non-spatial model)
    W : np.ndarray
        I×T×S weighted state sums, `W[i, t, s] = sum_j K[i, j] 1(z[j, t] = s)`
    D : np.ndarray
        row sums of `K`; the local dominance is `W[i, t, s] / D[i]`
    occupancy : np.ndarray
        T×S number of sites in every state at every period; a state with zero sites has zero dominance everywhere
    step_sizes : dict[str, float]
        current Metropolis step of every bandwidth parameter
    proposed, accepted : dict[str, int]
        Metropolis counters of the current adaptation batch
    iteration : int
        number of completed sweeps
    acceptance_log : list[tuple]
        `(iteration, parameter, step, accepted)` of every Metropolis proposal so far
    """

    z: np.ndarray
    m: np.ndarray
    P: np.ndarray
    phi: np.ndarray
    e: float
    bandwidth: Optional[BandwidthMatrix] = None
    K: np.ndarray
    W: np.ndarray
    D: np.ndarray
    occupancy: np.ndarray
    step_sizes: dict[str, float] = {}
    proposed: dict[str, int] = {}
    accepted: dict[str, int] = {}
    iteration: int = 0
    acceptance_log: list[tuple] = []

    @classmethod
    def build(
        cls,
        z: np.ndarray,
        m: np.ndarray,
        P: np.ndarray,
        phi: np.ndarray,
        e: float,
        K: np.ndarray,
        bandwidth: Optional[BandwidthMatrix] = None,
        step_sizes: Optional[dict] = None,
    ) -> "ChainState":
        """Creates a state and fills its caches from `z` and `K`."""
        S = P.shape[0]
        z = np.array(z, dtype=np.int64)
        return cls(
            z=z,
            m=np.array(m, dtype=np.int8),
            P=np.array(P, dtype=float),
            phi=np.array(phi, dtype=float),
            e=float(e),
            bandwidth=bandwidth,
            K=K,
            W=weighted_state_sums(z, K, S),
            D=K.sum(axis=1),
            occupancy=occupancy_counts(z, S),
            step_sizes=dict(step_sizes or {}),
        )

    @property
    def S(self) -> int:
        return self.P.shape[0]

    def dominance(self) -> np.ndarray:
        """I×T×S local dominance of the current latent states."""
        return self.W / self.D[:, None, None]

    def set_kernel(self, K: np.ndarray, bandwidth: Optional[BandwidthMatrix] = None):
        """Replaces the kernel and recomputes the caches in full."""
        self.K = K
        self.bandwidth = bandwidth
        self.W = weighted_state_sums(self.z, K, self.S)
        self.D = K.sum(axis=1)

    def cache_deviation(self) -> float:
        """Largest difference between the maintained caches and caches recomputed from scratch."""
        fresh = weighted_state_sums(self.z, self.K, self.S)
        deviation = float(np.max(np.abs(fresh - self.W)))
        deviation = max(deviation, float(np.max(np.abs(self.W.sum(axis=2) - self.D[:, None]))))
        if np.any(occupancy_counts(self.z, self.S) != self.occupancy):
            deviation = float("inf")
        return deviation

    def error_log_likelihood(self, data: ObservationSet, W: Optional[np.ndarray] = None, D=None) -> float:
        """
        Log-probability of the records flagged as resampling errors under the local dominance,
        the only factor of the joint density that depends on the bandwidth.
        """
        W = self.W if W is None else W
        D = self.D if D is None else D
        flagged = self.m == 1
        if not np.any(flagged):
            return 0.0
        site, time, state = data.site[flagged], data.time[flagged], data.state[flagged]
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(W[site, time, state]) - np.log(D[site])))


def occupancy_counts(z: np.ndarray, S: int) -> np.ndarray:
    """T×S number of sites in each state at each period."""
    T = z.shape[1]
    offsets = np.arange(T)[None, :] * S
    return np.bincount((z + offsets).ravel(), minlength=T * S).reshape(T, S)
