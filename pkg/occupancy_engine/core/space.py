"""
Space
---------------------------
Here is a set of pydantic models for the parameters and the geometry of the occupancy model:
the state space, the site frame, the transition matrix, the initial distribution and the bandwidth matrix.
Constructors check the invariants and raise the errors of :py:mod:`~occupancy_engine.core.errors` directly.
"""
import logging
from typing import Any, Sequence

import numpy as np

from .compat import ArrayModel, BaseModel, Extra
from .errors import DegenerateBandwidth, SingularBandwidth
from .normalization import (
    STOCHASTIC_ATOL,
    normalize_coords,
    normalize_distribution,
    normalize_labels,
    normalize_matrix,
)

logger = logging.getLogger(__name__)

MIN_BANDWIDTH = 1e-6
"""smallest accepted kernel scale, in coordinate units"""


class StateSpace(BaseModel, extra=Extra.forbid):
    """
    The ecological states a site can be occupied by.

    Parameters
    ----------
    labels : list[str]
        Unique state names; the code of a state is its position in `labels`.
    """

    labels: list[str]

    def __init__(self, labels: Sequence[Any], **kwargs):
        super().__init__(labels=normalize_labels(labels), **kwargs)

    @classmethod
    def of_size(cls, S: int) -> "StateSpace":
        """State space with labels `"1"`, ..., `"S"`."""
        return cls([str(s) for s in range(1, S + 1)])

    @property
    def S(self) -> int:
        return len(self.labels)


class SiteFrame(ArrayModel):
    """
    Positions of the fixed observation points of a quadrat.

    Parameters
    ----------
    coords : np.ndarray
        I×2 array of positions in abstract coordinate units; the bandwidth uses the same units.
    """

    coords: np.ndarray

    def __init__(self, coords: Any, **kwargs):
        super().__init__(coords=normalize_coords(coords), **kwargs)

    @property
    def I(self) -> int:  # noqa: E743
        return self.coords.shape[0]


class TransitionMatrix(ArrayModel):
    """
    Column-stochastic matrix of transition probabilities, `p[j, k]` = P(state k -> state j).

    Parameters
    ----------
    p : np.ndarray
        S×S matrix.
    flagged_columns : list[int]
        Columns that were not estimated from data (see :py:func:`~occupancy_engine.metrics.naive_estimate`).
    """

    p: np.ndarray
    flagged_columns: list[int] = []

    def __init__(
        self,
        p: Any,
        atol: float = STOCHASTIC_ATOL,
        renormalize: bool = False,
        flagged_columns: Sequence[int] = (),
        **kwargs,
    ):
        super().__init__(
            p=normalize_matrix(p, atol=atol, renormalize=renormalize), flagged_columns=list(flagged_columns), **kwargs
        )

    @property
    def S(self) -> int:
        return self.p.shape[0]


class InitialDistribution(ArrayModel):
    """
    Probability vector of the state of a site at the first period.
    """

    phi: np.ndarray

    def __init__(self, phi: Any, atol: float = STOCHASTIC_ATOL, renormalize: bool = False, **kwargs):
        super().__init__(phi=normalize_distribution(phi, atol=atol, renormalize=renormalize), **kwargs)

    @property
    def S(self) -> int:
        return self.phi.shape[0]


class BandwidthMatrix(BaseModel, extra=Extra.forbid):
    """
    Bandwidth of the Gaussian kernel, parameterized by two scales and a correlation:

    .. math::
        \\Sigma = \\begin{pmatrix} \\sigma_1^2 & \\rho\\sigma_1\\sigma_2 \\\\
                  \\rho\\sigma_1\\sigma_2 & \\sigma_2^2 \\end{pmatrix}

    Parameters
    ----------
    sigma1 : float
        scale along the first axis, at least :py:const:`MIN_BANDWIDTH`
    sigma2 : float
        scale along the second axis, at least :py:const:`MIN_BANDWIDTH`
    rho : float
        correlation, strictly between -1 and 1
    """

    sigma1: float
    sigma2: float
    rho: float = 0.0

    def __init__(self, sigma1: float, sigma2: float, rho: float = 0.0, **kwargs):
        sigma1, sigma2, rho = float(sigma1), float(sigma2), float(rho)
        for name, value in (("sigma1", sigma1), ("sigma2", sigma2)):
            if not np.isfinite(value) or value < MIN_BANDWIDTH:
                raise DegenerateBandwidth(f"{name}={value!r} is below the smallest scale {MIN_BANDWIDTH}")
        if not np.isfinite(rho) or abs(rho) >= 1:
            raise DegenerateBandwidth(f"correlation has to lie in (-1, 1), but got {rho=}")
        super().__init__(sigma1=sigma1, sigma2=sigma2, rho=rho, **kwargs)

    @classmethod
    def isotropic(cls, sigma: float) -> "BandwidthMatrix":
        return cls(sigma, sigma, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        covariance = self.rho * self.sigma1 * self.sigma2
        return np.array([[self.sigma1**2, covariance], [covariance, self.sigma2**2]])

    @property
    def precision(self) -> np.ndarray:
        """
        Inverse of the bandwidth matrix.
        Raises :py:class:`~occupancy_engine.core.errors.SingularBandwidth` if it cannot be inverted
        at working precision.
        """
        sigma = self.matrix
        if np.linalg.cond(sigma) * np.finfo(float).eps >= 1.0:
            raise SingularBandwidth(f"bandwidth matrix {sigma.tolist()} is singular at working precision")
        s1, s2, rho = self.sigma1, self.sigma2, self.rho
        det = (s1 * s2) ** 2 * (1.0 - rho**2)
        return np.array([[s2**2, -rho * s1 * s2], [-rho * s1 * s2, s1**2]]) / det


def validate_transition_matrix(p: Any, atol: float = STOCHASTIC_ATOL, renormalize: bool = False) -> TransitionMatrix:
    """
    Validates a transition matrix.
    Raises :py:class:`~occupancy_engine.core.errors.NonStochastic` if a column sum deviates from 1
    by more than `atol` and :py:class:`~occupancy_engine.core.errors.NegativeEntry` for negative entries.
    The matrix is renormalized only if `renormalize` is set.
    """
    return TransitionMatrix(p, atol=atol, renormalize=renormalize)


def validate_initial_distribution(phi: Any, atol: float = STOCHASTIC_ATOL) -> InitialDistribution:
    return InitialDistribution(phi, atol=atol)
