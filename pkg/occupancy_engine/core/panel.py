"""
Panel
---------------------------
Data structures for latent occupancy states, recorded observations and local dominance.
"""
import logging
from typing import Any, Optional, Sequence

import numpy as np

from .compat import ArrayModel
from .errors import ShapeMismatch, InvalidDistribution

logger = logging.getLogger(__name__)

DOMINANCE_ATOL = 1e-9


class OccupancyPanel(ArrayModel):
    """
    Latent occupancy states of all sites over all periods.

    Parameters
    ----------
    z : np.ndarray
        I×T array of 0-based state codes.
    """

    z: np.ndarray

    def __init__(self, z: Any, S: Optional[int] = None, **kwargs):
        z = np.array(z)
        if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
            raise ShapeMismatch(f"occupancy panel has to be an I×T array, but got shape {z.shape}")
        if not np.issubdtype(z.dtype, np.integer):
            if not np.all(np.equal(np.mod(z, 1), 0)):
                raise ShapeMismatch("occupancy states have to be integer codes")
        z = z.astype(np.int64)
        if np.any(z < 0) or (S is not None and np.any(z >= S)):
            raise ShapeMismatch(f"occupancy states have to lie in 0..{'S-1' if S is None else S - 1}")
        super().__init__(z=z, **kwargs)

    @property
    def I(self) -> int:  # noqa: E743
        return self.z.shape[0]

    @property
    def T(self) -> int:
        return self.z.shape[1]


class ObservationSet(ArrayModel):
    """
    The structure which is used for the storage of recorded states.
    Records are kept as flat arrays sorted by site and period; the replicates of a survey
    keep the order in which they were given.

    Parameters
    ----------
    I : int
        number of sites
    T : int
        number of periods
    site : np.ndarray
        0-based site of every record
    time : np.ndarray
        0-based period of every record
    state : np.ndarray
        0-based recorded state of every record
    m : Optional[np.ndarray]
        resampling-error flags of every record, known only for simulated data
    offsets : np.ndarray
        `offsets[i * T + t]:offsets[i * T + t + 1]` are the records of survey `(i, t)`;
        a survey without records is a missing survey
    """

    I: int
    T: int
    site: np.ndarray
    time: np.ndarray
    state: np.ndarray
    m: Optional[np.ndarray] = None
    offsets: np.ndarray

    def __init__(
        self, I: int, T: int, site: Any, time: Any, state: Any, m: Optional[Any] = None, **kwargs  # noqa: E741
    ):
        kwargs.pop("offsets", None)
        site, time, state = [np.asarray(arr, dtype=np.int64).reshape(-1) for arr in (site, time, state)]
        if not (site.size == time.size == state.size):
            raise ShapeMismatch(f"record arrays differ in length: {site.size=}, {time.size=}, {state.size=}")
        if I < 1 or T < 1:
            raise ShapeMismatch(f"observation set needs I >= 1 and T >= 1, but got {I=}, {T=}")
        if site.size and (site.min() < 0 or site.max() >= I or time.min() < 0 or time.max() >= T):
            raise ShapeMismatch(f"records refer to sites or periods outside of {I=}, {T=}")
        if state.size and state.min() < 0:
            raise ShapeMismatch("recorded states have to be non-negative codes")
        if m is not None:
            m = np.asarray(m, dtype=np.int8).reshape(-1)
            if m.size != site.size or np.any((m != 0) & (m != 1)):
                raise ShapeMismatch("error flags have to be binary and match the records")
        order = np.lexsort((time, site))
        site, time, state = site[order], time[order], state[order]
        m = None if m is None else m[order]
        cells = np.bincount(site * T + time, minlength=I * T)
        offsets = np.concatenate([[0], np.cumsum(cells)]).astype(np.int64)
        super().__init__(I=I, T=T, site=site, time=time, state=state, m=m, offsets=offsets, **kwargs)

    @classmethod
    def from_ragged(
        cls, y: Sequence[Sequence[Sequence[int]]], m: Optional[Sequence[Sequence[Sequence[int]]]] = None
    ) -> "ObservationSet":
        """
        Builds the set from nested lists `y[i][t] = [state of replicate 1, ...]`.
        """
        I, T = len(y), len(y[0])  # noqa: E741
        site, time, state, flags = [], [], [], []
        for i in range(I):
            if len(y[i]) != T:
                raise ShapeMismatch(f"site {i} has {len(y[i])} periods, expected {T}")
            for t in range(T):
                for n, value in enumerate(y[i][t]):
                    site += [i]
                    time += [t]
                    state += [value]
                    if m is not None:
                        flags += [m[i][t][n]]
        return cls(I, T, site, time, state, m=flags if m is not None else None)

    @property
    def R(self) -> int:
        """number of records"""
        return self.state.size

    def counts(self) -> np.ndarray:
        """I×T table of replicate counts N(i, t)."""
        return np.diff(self.offsets).reshape(self.I, self.T)

    def cell(self, i: int, t: int) -> slice:
        c = i * self.T + t
        return slice(int(self.offsets[c]), int(self.offsets[c + 1]))

    def replicates(self, i: int, t: int) -> np.ndarray:
        return self.state[self.cell(i, t)]

    def ragged(self) -> list[list[list[int]]]:
        return [[self.replicates(i, t).tolist() for t in range(self.T)] for i in range(self.I)]

    def check_states(self, S: int):
        if self.R and self.state.max() >= S:
            raise ShapeMismatch(f"recorded state {int(self.state.max())} is outside of the {S} states")

    def with_flags(self, m: Optional[Any]) -> "ObservationSet":
        return ObservationSet(self.I, self.T, self.site, self.time, self.state, m=m)


class DominanceField(ArrayModel):
    """
    Local relative dominance `g[i, t, s]` of every state around every site and period.
    """

    g: np.ndarray

    def __init__(self, g: Any, **kwargs):
        g = np.asarray(g, dtype=float)
        if g.ndim != 3:
            raise ShapeMismatch(f"dominance field has to be an I×T×S array, but got shape {g.shape}")
        if np.any(g < 0) or np.any(np.abs(g.sum(axis=2) - 1.0) > DOMINANCE_ATOL):
            raise InvalidDistribution("every dominance slice has to be a probability vector")
        super().__init__(g=g, **kwargs)
