# %%
import numpy as np
import pytest

from occupancy_engine.core.errors import AllZeroWeights, ZeroSupport
from occupancy_engine.core.kernel import kernel_matrix, weighted_state_sums
from occupancy_engine.core.panel import ObservationSet
from occupancy_engine.core.space import BandwidthMatrix, InitialDistribution, StateSpace, TransitionMatrix
from occupancy_engine.core.state import ChainState, occupancy_counts
from occupancy_engine.core.updates import (
    error_records,
    move_site,
    propose_bandwidth,
    reflect,
    sample_categorical,
    sample_categorical_rows,
    transition_counts,
    update_bandwidth,
    update_e,
    update_m,
    update_phi,
    update_transitions,
    update_z,
    update_z_site,
)
from occupancy_engine.simulate import SimulationScenario, make_grid, simulate_dataset
from tests.utils import failing_test

Z = np.array([[0, 0], [1, 1], [2, 1], [0, 2], [1, 1], [2, 2]])
P = np.array([[0.6, 0.2, 0.3], [0.3, 0.5, 0.2], [0.1, 0.3, 0.5]])
PHI = np.array([0.5, 0.3, 0.2])


def make_case(e=0.3):
    """
    Six sites on a 3×2 grid, two periods, one record per survey.
    Records of site 0 and the first record of site 3 are resampling errors.
    At the second period site 0 is the only holder of state 0.
    """
    frame = make_grid(2, 3)
    y = Z.copy()
    y[0, 0], y[3, 0] = 2, 1
    m = np.zeros_like(Z)
    m[0, :], m[3, 0] = 1, 1
    site, time = np.nonzero(np.ones_like(Z))
    data = ObservationSet(6, 2, site, time, y[site, time], m=m[site, time])
    K = kernel_matrix(frame, BandwidthMatrix(1.0, 1.5))
    state = ChainState.build(Z, data.m, P, PHI, e, K, bandwidth=BandwidthMatrix(1.0, 1.5))
    return data, frame, state


def brute_force_conditional(state, data, i, t):
    S, T = state.S, state.z.shape[1]
    weights = np.zeros(S)
    for s in range(S):
        z = state.z.copy()
        z[i, t] = s
        W = weighted_state_sums(z, state.K, S)
        prior = state.phi[s] if t == 0 else state.P[s, z[i, t - 1]]
        forward = state.P[z[i, t + 1], s] if t < T - 1 else 1.0
        survey = data.cell(i, t)
        allowed = np.all(data.state[survey][state.m[survey] == 0] == s)
        errors = (data.time == t) & (state.m == 1)
        likelihood = np.prod(W[data.site[errors], t, data.state[errors]] / state.D[data.site[errors]])
        weights[s] = prior * forward * allowed * likelihood
    return weights / weights.sum()


def simulated_case(rows=8, cols=8, T=5, e=0.4, seed=0):
    scenario = SimulationScenario(
        frame=make_grid(rows, cols),
        states=StateSpace.of_size(3),
        T=T,
        phi=InitialDistribution([0.4, 0.3, 0.3]),
        P=TransitionMatrix(P),
        e=e,
        bandwidth=BandwidthMatrix(1.0, 1.0),
        replicates=2,
        seed=seed,
    )
    dataset = simulate_dataset(scenario)
    data = dataset.observations
    K = kernel_matrix(scenario.frame, scenario.bandwidth)
    # the simulated states and error flags agree with every record
    state = ChainState.build(dataset.z.z, data.m, P, PHI, e, K, bandwidth=scenario.bandwidth)
    return data, state


def scan_site_by_site(state, data, rng):
    I, T = state.z.shape  # noqa: E741
    for t in range(T):
        errors_at_t = error_records(data, state.m, t)
        for i in range(I):
            survey = data.cell(i, t)
            if not np.any(state.m[survey] == 0):
                update_z_site(state, data, i, t, rng, errors_at_t)


def test_sample_categorical():
    rng = np.random.default_rng(0)
    draws = [sample_categorical(rng, np.array([0.0, 2.0, 0.0, 1.0])) for _ in range(3000)]
    counts = np.bincount(draws, minlength=4)
    assert counts[0] == counts[2] == 0
    assert abs(counts[1] / 3000 - 2 / 3) < 0.03
    rows = sample_categorical_rows(rng, np.tile([0.0, 1.0, 0.0], (500, 1)))
    assert np.all(rows == 1)


def test_transition_counts():
    counts = transition_counts(Z, 3)
    assert counts.sum() == 6
    # site 3 moves from 0 to 2
    assert counts[2, 0] == 1
    assert counts[0, 0] == 1
    assert counts[1, 2] == 1


def test_error_records():
    data, _, state = make_case()
    assert error_records(data, state.m, 0).tolist() == [0, 6]
    assert error_records(data, state.m, 1).tolist() == [1]


def test_update_m():
    data, _, state = make_case(e=0.0)
    rng = np.random.default_rng(1)
    m = update_m(state, data, rng)
    disagrees = data.state != state.z[data.site, data.time]
    # disagreeing records are errors for sure, agreeing ones never when e = 0
    assert np.array_equal(m == 1, disagrees)

    state.e = 1.0
    m = update_m(state, data, rng)
    agrees = ~disagrees
    g = state.W[data.site, data.time, data.state] / state.D[data.site]
    assert np.all(m[agrees & (g > 0)] == 1)


def test_update_m_error_rate():
    data, _, state = make_case(e=0.4)
    rng = np.random.default_rng(2)
    agrees = data.state == state.z[data.site, data.time]
    g = state.W[data.site, data.time, data.state] / state.D[data.site]
    expected = 0.4 * g / (0.4 * g + 0.6)
    frequency = np.mean([update_m(state, data, rng) for _ in range(4000)], axis=0)
    assert np.all(np.abs(frequency[agrees] - expected[agrees]) < 0.03)
    assert np.all(frequency[~agrees] == 1)


def test_update_m_zero_support():
    data, _, state = make_case()
    # nobody holds state 0 at the second period once site 0 leaves it
    move_site(state, 0, 1, 1)
    failing_test(update_m, [state, data, np.random.default_rng(0)], exception=ZeroSupport)


def test_update_z_site_matches_enumeration():
    data, _, state = make_case()
    rng = np.random.default_rng(3)
    expected = brute_force_conditional(state, data, 0, 0)
    draws = np.bincount([update_z_site(state, data, 0, 0, rng) for _ in range(20000)], minlength=3) / 20000
    assert np.max(np.abs(draws - expected)) < 0.015
    assert state.cache_deviation() < 1e-9


def test_update_z_site_exact_zero():
    data, _, state = make_case()
    rng = np.random.default_rng(4)
    # the error record of site 0 shows state 0, which only site 0 holds
    expected = brute_force_conditional(state, data, 0, 1)
    assert expected[1] == expected[2] == 0.0
    assert all(update_z_site(state, data, 0, 1, rng) == 0 for _ in range(500))


def test_update_z_site_pinned_record():
    data, _, state = make_case()
    rng = np.random.default_rng(5)
    # site 1 has a non-error record of state 1 at the first period
    assert all(update_z_site(state, data, 1, 0, rng) == 1 for _ in range(200))


def test_update_z_keeps_pinned_cells_and_caches():
    data, _, state = make_case()
    rng = np.random.default_rng(6)
    pinned = (state.m == 0)
    for _ in range(200):
        update_z(state, data, rng)
    assert np.array_equal(state.z[data.site[pinned], data.time[pinned]], data.state[pinned])
    assert state.cache_deviation() < 1e-9
    assert np.array_equal(state.occupancy, occupancy_counts(state.z, 3))


def test_update_z_matches_site_by_site_scan():
    data, compiled = simulated_case()
    _, reference = simulated_case()
    assert np.any(compiled.m == 1)
    moved = 0
    for seed in range(30):
        before = compiled.z.copy()
        update_z(compiled, data, np.random.default_rng(seed))
        scan_site_by_site(reference, data, np.random.default_rng(seed))
        assert np.array_equal(compiled.z, reference.z)
        moved += int(np.sum(compiled.z != before))
    assert moved > 0
    assert np.allclose(compiled.W, reference.W, rtol=0, atol=1e-12)
    assert np.array_equal(compiled.occupancy, reference.occupancy)
    assert compiled.cache_deviation() < 1e-9


def test_update_z_all_zero_weights():
    data, _, state = make_case()
    # site 0 is free at the first period, yet only state 0 may start and state 0 never moves on to state 0
    state.phi = np.array([1.0, 0.0, 0.0])
    state.P = np.array([[0.0, 0.2, 0.3], [0.9, 0.5, 0.2], [0.1, 0.3, 0.5]])
    with pytest.raises(AllZeroWeights, match="site 0 at period 0"):
        update_z(state, data, np.random.default_rng(0))


def test_move_site():
    _, _, state = make_case()
    move_site(state, 4, 1, 0)
    assert state.z[4, 1] == 0
    assert state.occupancy[1].tolist() == [2, 2, 2]
    assert state.cache_deviation() < 1e-12


def test_update_transitions_conjugacy():
    _, _, state = make_case()
    rng = np.random.default_rng(7)
    n_draws = 100_000
    draws = np.stack([update_transitions(state, rng) for _ in range(n_draws)])
    alpha = 1.0 + transition_counts(state.z, 3)
    total = alpha.sum(axis=0)
    mean = alpha / total
    variance = alpha * (total - alpha) / (total**2 * (total + 1))
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * np.sqrt(variance / n_draws))


def test_update_phi_and_e_conjugacy():
    _, _, state = make_case()
    rng = np.random.default_rng(8)
    n_draws = 100_000
    phi = np.stack([update_phi(state, rng) for _ in range(n_draws)])
    alpha = 1.0 + np.bincount(state.z[:, 0], minlength=3)
    mean = alpha / alpha.sum()
    variance = alpha * (alpha.sum() - alpha) / (alpha.sum() ** 2 * (alpha.sum() + 1))
    assert np.all(np.abs(phi.mean(axis=0) - mean) < 4 * np.sqrt(variance / n_draws))

    e = np.array([update_e(state, rng) for _ in range(n_draws)])
    a, b = 1.0 + 3, 1.0 + 12 - 3
    beta_mean, beta_variance = a / (a + b), a * b / ((a + b) ** 2 * (a + b + 1))
    assert abs(e.mean() - beta_mean) < 4 * np.sqrt(beta_variance / n_draws)


def test_reflect():
    assert np.isclose(reflect(1.3), 0.7)
    assert np.isclose(reflect(-1.2), -0.8)
    assert reflect(0.5) == 0.5
    assert np.isclose(reflect(3.5), -0.5)


def test_propose_bandwidth():
    rng = np.random.default_rng(9)
    bw = BandwidthMatrix(1.0, 2.0, 0.1)
    same, log_jacobian = propose_bandwidth(bw, "sigma1", 0.0, 20.0, rng)
    assert same == bw and log_jacobian == 0.0
    for _ in range(200):
        proposal, log_jacobian = propose_bandwidth(bw, "sigma2", 1.0, 3.0, rng)
        if proposal is None:
            assert 2.0 * np.exp(log_jacobian) > 3.0
        else:
            assert np.isclose(np.log(proposal.sigma2 / 2.0), log_jacobian)
            assert proposal.sigma1 == 1.0
        proposal, _ = propose_bandwidth(bw, "rho", 1.5, 20.0, rng)
        assert proposal is None or -1 < proposal.rho < 1


def test_update_bandwidth():
    data, frame, state = make_case()
    rng = np.random.default_rng(10)
    state.step_sizes = dict(sigma1=0.5, sigma2=0.5, rho=0.3)
    for _ in range(50):
        decisions = update_bandwidth(state, data, frame, rng, 20.0)
        assert [name for name, _, _ in decisions] == ["sigma1", "sigma2", "rho"]
        assert state.cache_deviation() < 1e-9
        assert np.allclose(state.K, kernel_matrix(frame, state.bandwidth))
    assert state.proposed == dict(sigma1=50, sigma2=50, rho=50)
    assert 0 < sum(state.accepted.values()) < 150
