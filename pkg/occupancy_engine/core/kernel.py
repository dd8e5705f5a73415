"""
Kernel
---------------------------
Gaussian kernel weights between sites and the local and global dominance of states.
The kernel matrix is dense and computed in one pass; callers recompute it only when the bandwidth changes.
"""
import logging
from typing import Any

import numpy as np

from .errors import ShapeMismatch
from .space import BandwidthMatrix, SiteFrame

logger = logging.getLogger(__name__)


def _quadratic_form(dx, dy, precision: np.ndarray):
    # same expression for one pair and for all pairs, so both agree bit for bit and stay symmetric
    return precision[0, 0] * dx * dx + 2.0 * precision[0, 1] * dx * dy + precision[1, 1] * dy * dy


def kernel_weight(xi: Any, xj: Any, bw: BandwidthMatrix) -> float:
    """
    Weight :math:`\\exp\\{-\\frac{1}{2}(x_i - x_j)' \\Sigma^{-1} (x_i - x_j)\\}` of site `j` seen from site `i`.

    Parameters
    ----------
    xi, xj : array_like
        two-dimensional positions
    bw : BandwidthMatrix
        bandwidth of the kernel

    Returns
    -------
    float
        a value in (0, 1], 1 for coinciding positions
    """
    xi, xj = np.asarray(xi, dtype=float), np.asarray(xj, dtype=float)
    dx, dy = xi[0] - xj[0], xi[1] - xj[1]
    return float(np.exp(-0.5 * _quadratic_form(dx, dy, bw.precision)))


def kernel_matrix(frame: SiteFrame, bw: BandwidthMatrix) -> np.ndarray:
    """
    I×I matrix `K[i, j]` of kernel weights between all pairs of sites.
    `K` is symmetric with a unit diagonal.
    """
    coords = frame.coords
    dx = coords[:, None, 0] - coords[None, :, 0]
    dy = coords[:, None, 1] - coords[None, :, 1]
    return np.exp(-0.5 * _quadratic_form(dx, dy, bw.precision))


def uniform_kernel(I: int) -> np.ndarray:  # noqa: E741
    """Kernel of infinite bandwidth: every site weighs the same, so local dominance equals global dominance."""
    return np.ones((I, I))


def one_hot(z_t: Any, S: int) -> np.ndarray:
    z_t = np.asarray(z_t, dtype=np.int64)
    return np.eye(S)[z_t]


def local_dominance(z_t: Any, K: np.ndarray, S: int) -> np.ndarray:
    """
    Local relative dominance of every state around every site at one period,
    `g[i, s] = sum_j K[i, j] 1(z_j = s) / sum_j K[i, j]`.
    Every site contributes to its own neighborhood with weight `K[i, i] = 1`.

    Parameters
    ----------
    z_t : array_like
        states of the I sites at one period
    K : np.ndarray
        kernel matrix of the same sites
    S : int
        number of states

    Returns
    -------
    np.ndarray
        I×S array whose rows are probability vectors
    """
    z_t = np.asarray(z_t, dtype=np.int64)
    if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] != z_t.size:
        raise ShapeMismatch(f"kernel matrix of shape {K.shape} does not match {z_t.size} sites")
    weighted = K @ one_hot(z_t, S)
    return weighted / K.sum(axis=1)[:, None]


def global_dominance(z_t: Any, S: int) -> np.ndarray:
    """Relative frequency `f[s]` of every state over all sites at one period."""
    z_t = np.asarray(z_t, dtype=np.int64)
    if z_t.size < 1:
        raise ShapeMismatch("global dominance needs at least one site")
    return np.bincount(z_t, minlength=S) / z_t.size


def weighted_state_sums(z: Any, K: np.ndarray, S: int) -> np.ndarray:
    """
    I×T×S array `W[i, t, s] = sum_j K[i, j] 1(z[j, t] = s)`, the numerators of the local dominance.
    """
    z = np.asarray(z, dtype=np.int64)
    return np.einsum("ij,jts->its", K, one_hot(z, S))


def dominance_field(z: Any, K: np.ndarray, S: int) -> np.ndarray:
    """Local dominance of all periods, an I×T×S array."""
    return weighted_state_sums(z, K, S) / K.sum(axis=1)[:, None, None]
