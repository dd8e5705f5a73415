"""
Draws
---------------------------
Stores of the retained MCMC draws: one :py:class:`ChainDraws` per chain,
and :py:class:`PosteriorDraws` which stacks the chains of a fit.
"""
import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .compat import ArrayModel
from .errors import EmptyDraws, ShapeMismatch
from .keywords import Model, SPATIAL

logger = logging.getLogger(__name__)

SCALAR_PARAMETERS = ("e", "sigma1", "sigma2", "rho")
ACCEPTANCE_COLUMNS = ["chain", "iteration", "parameter", "step", "accepted"]


def p_column(j: int, k: int) -> str:
    """Name of the draw column of `P[j, k]`, 1-based."""
    return f"P_{j + 1}_{k + 1}"


class ChainDraws(ArrayModel):
    """
    Retained draws of one chain.

    Parameters
    ----------
    P : np.ndarray
        D×S×S transition matrices
    phi : np.ndarray
        D×S initial distributions
    e : np.ndarray
        D resampling-error probabilities
    sigma1, sigma2, rho : Optional[np.ndarray]
        D bandwidth parameters, absent for the non-spatial model
    z : Optional[np.ndarray]
        D×I×T latent states, kept on request
    iterations : np.ndarray
        0-based sweep of every draw, burn-in included
    acceptance : list[tuple]
        `(iteration, parameter, step, accepted)` of every Metropolis proposal
    """

    P: np.ndarray
    phi: np.ndarray
    e: np.ndarray
    sigma1: Optional[np.ndarray] = None
    sigma2: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    iterations: np.ndarray
    acceptance: list[tuple] = []

    @property
    def n_draws(self) -> int:
        return self.e.shape[0]


class PosteriorDraws(ArrayModel):
    """
    Multi-chain sample of the posterior.
    Every array has the chain as its first axis and the draw as its second.

    Parameters
    ----------
    model : Model
        the fitted model
    labels : list[str]
        state labels in code order
    burn_in : int
        number of discarded sweeps of every chain
    iterations : np.ndarray
        0-based sweep of every draw, the same for every chain
    acceptance : list[tuple]
        `(chain, iteration, parameter, step, accepted)` of every Metropolis proposal
    """

    model: Model = SPATIAL
    labels: list[str]
    burn_in: int = 0
    P: np.ndarray
    phi: np.ndarray
    e: np.ndarray
    sigma1: Optional[np.ndarray] = None
    sigma2: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    iterations: np.ndarray
    acceptance: list[tuple] = []

    @classmethod
    def from_chains(
        cls, chains: Sequence[ChainDraws], model: Model, labels: Sequence[str], burn_in: int = 0
    ) -> "PosteriorDraws":
        if not chains:
            raise EmptyDraws("no chains to combine")
        if len({chain.n_draws for chain in chains}) != 1:
            raise ShapeMismatch(f"chains differ in length: {[chain.n_draws for chain in chains]}")

        def stack(name):
            values = [getattr(chain, name) for chain in chains]
            return None if any(value is None for value in values) else np.stack(values)

        acceptance = [(c,) + tuple(row) for c, chain in enumerate(chains) for row in chain.acceptance]
        return cls(
            model=model,
            labels=list(labels),
            burn_in=burn_in,
            P=stack("P"),
            phi=stack("phi"),
            e=stack("e"),
            sigma1=stack("sigma1"),
            sigma2=stack("sigma2"),
            rho=stack("rho"),
            z=stack("z"),
            iterations=chains[0].iterations,
            acceptance=acceptance,
        )

    @property
    def n_chains(self) -> int:
        return self.e.shape[0]

    @property
    def n_draws(self) -> int:
        return self.e.shape[1]

    @property
    def S(self) -> int:
        return self.P.shape[-1]

    def scalar_names(self) -> list[str]:
        """Names of the scalar draw columns: `P` row-major, then `e`, `phi` and the bandwidth."""
        names = [p_column(j, k) for j in range(self.S) for k in range(self.S)]
        names += ["e"] + [f"phi_{s + 1}" for s in range(self.S)]
        names += [name for name in ("sigma1", "sigma2", "rho") if getattr(self, name) is not None]
        return names

    def scalar(self, name: str) -> np.ndarray:
        """C×D draws of one scalar column."""
        if name.startswith("P_"):
            j, k = [int(index) - 1 for index in name.split("_")[1:]]
            return self.P[:, :, j, k]
        if name.startswith("phi_"):
            return self.phi[:, :, int(name.split("_")[1]) - 1]
        value = getattr(self, name, None)
        if value is None or name not in SCALAR_PARAMETERS:
            raise KeyError(f"no draws of {name!r}")
        return value

    def to_frame(self) -> pd.DataFrame:
        """One row per retained draw: chain (1-based), iteration and every scalar column."""
        C, D = self.n_chains, self.n_draws
        frame = pd.DataFrame(
            {
                "chain": np.repeat(np.arange(1, C + 1), D),
                "iteration": np.tile(self.iterations, C),
            }
        )
        for name in self.scalar_names():
            frame[name] = self.scalar(name).reshape(-1)
        return frame

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        labels: Optional[Sequence[str]] = None,
        model: Optional[Model] = None,
        acceptance: Optional[pd.DataFrame] = None,
        burn_in: int = 0,
    ) -> "PosteriorDraws":
        """Inverse of :py:meth:`to_frame`."""
        S = int(round(np.sqrt(sum(column.startswith("P_") for column in frame.columns))))
        if S < 2:
            raise ShapeMismatch("draw table has no transition-matrix columns")
        chains = sorted(frame["chain"].unique())
        parts = [frame[frame["chain"] == chain] for chain in chains]
        if len({len(part) for part in parts}) != 1:
            raise ShapeMismatch("chains of the draw table differ in length")

        def column(name):
            return np.stack([part[name].to_numpy(dtype=float) for part in parts])

        P = np.stack([np.stack([column(p_column(j, k)) for k in range(S)], axis=-1) for j in range(S)], axis=-2)
        phi = np.stack([column(f"phi_{s + 1}") for s in range(S)], axis=-1)
        bandwidth = {name: column(name) if name in frame.columns else None for name in ("sigma1", "sigma2", "rho")}
        if model is None:
            model = Model.SPATIAL if bandwidth["sigma1"] is not None else Model.NONSPATIAL
        rows = []
        if acceptance is not None and len(acceptance):
            rows = [
                (int(row.chain) - 1, int(row.iteration), str(row.parameter), float(row.step), bool(row.accepted))
                for row in acceptance.itertuples(index=False)
            ]
        return cls(
            model=model,
            labels=list(labels) if labels is not None else [str(s) for s in range(1, S + 1)],
            burn_in=burn_in,
            P=P,
            phi=phi,
            e=column("e"),
            iterations=parts[0]["iteration"].to_numpy(dtype=np.int64),
            acceptance=rows,
            **bandwidth,
        )

    def acceptance_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.acceptance, columns=ACCEPTANCE_COLUMNS)
        frame["chain"] = frame["chain"] + 1
        return frame

    def acceptance_rates(self) -> pd.DataFrame:
        """Metropolis acceptance rate of every chain and parameter, split into burn-in and sampling."""
        frame = self.acceptance_frame()
        if frame.empty:
            return pd.DataFrame(columns=["chain", "parameter", "phase", "proposals", "rate"])
        frame["phase"] = np.where(frame["iteration"] < self.burn_in, "burn-in", "sampling")
        rates = frame.groupby(["chain", "parameter", "phase"], sort=True)["accepted"].agg(["size", "mean"])
        return rates.reset_index().rename(columns={"size": "proposals", "mean": "rate"})
