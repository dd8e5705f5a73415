"""
Updates
---------------------------
Full-conditional updates of the Metropolis-within-Gibbs sampler.
Every function changes the :py:class:`~occupancy_engine.core.state.ChainState` in place
and returns the new value of the updated block.
Probabilities are combined in log space; a candidate with zero weight gets `-inf` and is excluded.
"""
import logging
from typing import Optional

import numba
import numpy as np

from .errors import AllZeroWeights, DegenerateBandwidth, SingularBandwidth, ZeroSupport
from .kernel import kernel_matrix, weighted_state_sums
from .panel import ObservationSet
from .space import MIN_BANDWIDTH, BandwidthMatrix, SiteFrame
from .state import ChainState

logger = logging.getLogger(__name__)

TINY = np.finfo(float).tiny


def sample_categorical(rng: np.random.Generator, weights: np.ndarray) -> int:
    """Draws one index with probability proportional to the non-negative `weights`."""
    cdf = np.cumsum(weights)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(cdf) - 1)


def sample_categorical_rows(rng: np.random.Generator, weights: np.ndarray) -> np.ndarray:
    """Draws one index per row of the 2-d array `weights`."""
    cdf = np.cumsum(weights, axis=1)
    u = rng.random(cdf.shape[0]) * cdf[:, -1]
    draws = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(draws, cdf.shape[1] - 1)


def transition_counts(z: np.ndarray, S: int) -> np.ndarray:
    """S×S table `n[j, k]` of one-step transitions from state `k` to state `j`."""
    previous, following = z[:, :-1].ravel(), z[:, 1:].ravel()
    return np.bincount(following * S + previous, minlength=S * S).reshape(S, S)


def update_m(state: ChainState, data: ObservationSet, rng: np.random.Generator) -> np.ndarray:
    """
    Draws the resampling-error flag of every record.
    A record that disagrees with the latent state of its site is an error with probability 1;
    a record that agrees is an error with probability `e g / (e g + 1 - e)`.
    """
    site, time, y = data.site, data.time, data.state
    agrees = y == state.z[site, time]
    unsupported = ~agrees & (state.occupancy[time, y] == 0)
    if np.any(unsupported):
        record = int(np.flatnonzero(unsupported)[0])
        raise ZeroSupport(
            f"record of site {int(site[record])} at period {int(time[record])} shows state {int(y[record])}, "
            "which no site holds at that period"
        )
    g = state.W[site, time, y] / state.D[site]
    weight = state.e * g
    denominator = weight + (1.0 - state.e)
    r = np.ones(data.R)
    np.divide(weight, denominator, out=r, where=agrees & (denominator > 0))
    r[agrees & (denominator <= 0)] = 0.0
    state.m = (rng.random(data.R) < r).astype(np.int8)
    return state.m


def error_records(data: ObservationSet, m: np.ndarray, t: int) -> np.ndarray:
    """Indices of the records of period `t` flagged as resampling errors."""
    return np.flatnonzero((data.time == t) & (m == 1))


def errors_by_period(data: ObservationSet, m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Sites and shown states of the error records ordered by period,
    with the offsets `start[t]:start[t + 1]` of every period.
    """
    errors = np.flatnonzero(m == 1)
    errors = errors[np.argsort(data.time[errors], kind="stable")]
    start = np.searchsorted(data.time[errors], np.arange(data.T + 1))
    return (
        data.site[errors].astype(np.int64),
        data.state[errors].astype(np.int64),
        start.astype(np.int64),
    )


def update_z_site(
    state: ChainState,
    data: ObservationSet,
    i: int,
    t: int,
    rng: np.random.Generator,
    errors_at_t: Optional[np.ndarray] = None,
) -> int:
    """
    Draws the latent state of site `i` at period `t` from its full conditional.

    The weight of a candidate state `s` is the product of
    the prior (`phi[s]` at the first period, `P[s, z[i, t - 1]]` later),
    the forward term `P[z[i, t + 1], s]`,
    the indicator that every non-error record of the survey equals `s`
    and the local dominance of every error record of the period with `z[i, t] = s`.
    The local dominance for a candidate is read off the cache: moving site `i` into `s`
    changes `W[j, t]` by `K[j, i]` in two entries only.

    Parameters
    ----------
    errors_at_t : Optional[np.ndarray]
        indices of the error records of period `t`; computed from `state.m` if not given
    """
    S = state.S
    T = state.z.shape[1]
    candidates = np.arange(S)
    z_old = int(state.z[i, t])
    with np.errstate(divide="ignore"):
        log_weights = np.log(state.phi) if t == 0 else np.log(state.P[:, state.z[i, t - 1]])
        if t < T - 1:
            log_weights = log_weights + np.log(state.P[state.z[i, t + 1], :])

    survey = data.cell(i, t)
    pinned = data.state[survey][state.m[survey] == 0]
    if pinned.size:
        log_weights = np.where((pinned[None, :] == candidates[:, None]).all(axis=1), log_weights, -np.inf)

    if errors_at_t is None:
        errors_at_t = error_records(data, state.m, t)
    if errors_at_t.size:
        sites, shown = data.site[errors_at_t], data.state[errors_at_t]
        k = state.K[sites, i]
        moved_in = shown[None, :] == candidates[:, None]
        was_here = shown == z_old
        sums = (state.W[sites, t, shown] - k * was_here)[None, :] + k[None, :] * moved_in
        holders = (state.occupancy[t, shown] - was_here)[None, :] + moved_in
        sums = np.where(holders > 0, np.maximum(sums, np.finfo(float).tiny), 0.0)
        with np.errstate(divide="ignore"):
            log_weights = log_weights + np.log(sums).sum(axis=1)

    finite = np.isfinite(log_weights)
    if not np.any(finite):
        raise AllZeroWeights(f"every state of site {i} at period {t} has zero weight")
    weights = np.where(finite, np.exp(log_weights - log_weights[finite].max()), 0.0)
    s = sample_categorical(rng, weights)
    if s != z_old:
        move_site(state, i, t, s)
    return s


def move_site(state: ChainState, i: int, t: int, s: int):
    """Sets `z[i, t] = s` and commits the change to the caches."""
    z_old = state.z[i, t]
    state.W[:, t, z_old] -= state.K[:, i]
    state.W[:, t, s] += state.K[:, i]
    state.occupancy[t, z_old] -= 1
    state.occupancy[t, s] += 1
    state.z[i, t] = s


@numba.jit(nopython=True, cache=True)
def scan_latent_states(z, W, occupancy, K, log_P, log_phi, pinned, error_site, error_shown, error_start, uniforms):
    """
    Compiled scan of :py:func:`update_z`, same full conditional as :py:func:`update_z_site`.
    `uniforms` holds one draw per unpinned survey in scan order.
    Changes `z`, `W` and `occupancy` in place.
    Returns -1, or `t * I + i` of the first survey whose states all have zero weight.
    """
    I, T = z.shape  # noqa: E741
    S = log_phi.shape[0]
    log_weights = np.empty(S)
    draw = 0
    for t in range(T):
        for i in range(I):
            if pinned[i, t]:
                continue
            z_old = z[i, t]
            for c in range(S):
                log_weights[c] = log_phi[c] if t == 0 else log_P[c, z[i, t - 1]]
                if t < T - 1:
                    log_weights[c] += log_P[z[i, t + 1], c]
            for r in range(error_start[t], error_start[t + 1]):
                j = error_site[r]
                shown = error_shown[r]
                k = K[j, i]
                was_here = 1 if shown == z_old else 0
                for c in range(S):
                    moved_in = 1 if shown == c else 0
                    if occupancy[t, shown] - was_here + moved_in > 0:
                        log_weights[c] += np.log(max(W[j, t, shown] - k * was_here + k * moved_in, TINY))
                    else:
                        log_weights[c] = -np.inf
            top = -np.inf
            for c in range(S):
                top = max(top, log_weights[c])
            if top == -np.inf:
                return t * I + i
            # the weights become their cumulative sums
            total = 0.0
            for c in range(S):
                total += np.exp(log_weights[c] - top)
                log_weights[c] = total
            u = uniforms[draw] * total
            draw += 1
            s = 0
            while s < S - 1 and log_weights[s] <= u:
                s += 1
            if s != z_old:
                for j in range(I):
                    W[j, t, z_old] -= K[j, i]
                    W[j, t, s] += K[j, i]
                occupancy[t, z_old] -= 1
                occupancy[t, s] += 1
                z[i, t] = s
    return -1


def update_z(state: ChainState, data: ObservationSet, rng: np.random.Generator) -> np.ndarray:
    """
    Systematic scan over all latent states, sites fastest, then periods.
    A survey with a non-error record is pinned to its current state and skipped.
    """
    I, T = state.z.shape  # noqa: E741
    correct = state.m == 0
    pinned = np.bincount(data.site[correct] * T + data.time[correct], minlength=I * T).reshape(I, T) > 0
    error_site, error_shown, error_start = errors_by_period(data, state.m)
    with np.errstate(divide="ignore"):
        log_P, log_phi = np.log(state.P), np.log(state.phi)
    uniforms = rng.random(int((~pinned).sum()))
    failed = scan_latent_states(
        state.z,
        state.W,
        state.occupancy,
        np.asarray(state.K, dtype=float),
        log_P,
        log_phi,
        pinned,
        error_site,
        error_shown,
        error_start,
        uniforms,
    )
    if failed >= 0:
        t, i = divmod(int(failed), I)
        raise AllZeroWeights(f"every state of site {i} at period {t} has zero weight")
    return state.z


def update_transitions(state: ChainState, rng: np.random.Generator) -> np.ndarray:
    """Draws every column of `P` from `Dirichlet(1 + n[:, k])`."""
    counts = transition_counts(state.z, state.S)
    state.P = np.column_stack([rng.dirichlet(1.0 + counts[:, k]) for k in range(state.S)])
    return state.P


def update_phi(state: ChainState, rng: np.random.Generator) -> np.ndarray:
    counts = np.bincount(state.z[:, 0], minlength=state.S)
    state.phi = rng.dirichlet(1.0 + counts)
    return state.phi


def update_e(state: ChainState, rng: np.random.Generator) -> float:
    errors = int(state.m.sum())
    state.e = float(rng.beta(1.0 + errors, 1.0 + state.m.size - errors))
    return state.e


def reflect(value: float, low: float = -1.0, high: float = 1.0) -> float:
    """Folds `value` back into `[low, high]`."""
    width = high - low
    value = (value - low) % (2.0 * width)
    return low + (2.0 * width - value if value > width else value)


def propose_bandwidth(
    bw: BandwidthMatrix, name: str, step: float, bandwidth_max: float, rng: np.random.Generator
) -> tuple[Optional[BandwidthMatrix], float]:
    """
    Random-walk proposal for one bandwidth parameter.
    Scales move on the log scale, so the returned log-Jacobian is `log(new / old)`;
    the correlation moves by a uniform step reflected at -1 and 1.
    Returns `None` for a proposal outside of the prior support.
    """
    values = dict(sigma1=bw.sigma1, sigma2=bw.sigma2, rho=bw.rho)
    if name == "rho":
        values["rho"] = reflect(bw.rho + rng.uniform(-step, step))
        log_jacobian = 0.0
    else:
        increment = step * rng.standard_normal()
        values[name] = values[name] * np.exp(increment)
        log_jacobian = increment
        if values[name] > bandwidth_max or values[name] < MIN_BANDWIDTH:
            return None, log_jacobian
    try:
        return BandwidthMatrix(**values), log_jacobian
    except (DegenerateBandwidth, SingularBandwidth):
        return None, log_jacobian


def update_bandwidth(
    state: ChainState,
    data: ObservationSet,
    frame: SiteFrame,
    rng: np.random.Generator,
    bandwidth_max: float,
    names: tuple = ("sigma1", "sigma2", "rho"),
) -> list[tuple[str, float, bool]]:
    """
    One Metropolis step for each parameter in `names`, in that order.
    Only the error records depend on the bandwidth, so the acceptance ratio compares their local dominance
    under the proposed and the current kernel. On acceptance the kernel and the caches are recomputed in full.

    Returns
    -------
    list[tuple[str, float, bool]]
        parameter, step size and acceptance of every proposal
    """
    decisions = []
    log_likelihood = state.error_log_likelihood(data)
    for name in names:
        step = state.step_sizes[name]
        proposal, log_jacobian = propose_bandwidth(state.bandwidth, name, step, bandwidth_max, rng)
        u = rng.random()
        accepted = False
        if proposal is not None:
            K = kernel_matrix(frame, proposal)
            W = weighted_state_sums(state.z, K, state.S)
            D = K.sum(axis=1)
            proposed_log_likelihood = state.error_log_likelihood(data, W, D)
            log_ratio = proposed_log_likelihood - log_likelihood + log_jacobian
            if np.isfinite(proposed_log_likelihood) and (not np.isfinite(log_likelihood) or np.log(u) < log_ratio):
                state.K, state.W, state.D, state.bandwidth = K, W, D, proposal
                log_likelihood = proposed_log_likelihood
                accepted = True
        state.proposed[name] = state.proposed.get(name, 0) + 1
        state.accepted[name] = state.accepted.get(name, 0) + int(accepted)
        decisions += [(name, step, accepted)]
    return decisions
