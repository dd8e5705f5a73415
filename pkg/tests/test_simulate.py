# %%
import numpy as np
import pytest

from occupancy_engine.core.errors import ShapeMismatch
from occupancy_engine.core.kernel import dominance_field, kernel_matrix
from occupancy_engine.core.panel import OccupancyPanel
from occupancy_engine.core.space import BandwidthMatrix, InitialDistribution, StateSpace, TransitionMatrix
from occupancy_engine.metrics import empirical_transitions
from occupancy_engine.simulate import (
    SimulationScenario,
    derive_seeds,
    make_grid,
    random_transition_matrix,
    run_scenario_batch,
    simulate_dataset,
    simulate_observations,
    simulate_occupancy,
)
from tests.utils import failing_test

P3 = [[0.8, 0.1, 0.2], [0.1, 0.7, 0.2], [0.1, 0.2, 0.6]]


def scenario(rows=5, cols=5, T=4, e=0.3, replicates=1, seed=0, P=P3):
    S = len(P)
    return SimulationScenario(
        frame=make_grid(rows, cols),
        states=StateSpace.of_size(S),
        T=T,
        phi=InitialDistribution(np.full(S, 1.0 / S), atol=1e-9),
        P=TransitionMatrix(P),
        e=e,
        bandwidth=BandwidthMatrix(1.0, 1.0),
        replicates=replicates,
        seed=seed,
    )


def test_make_grid():
    frame = make_grid(2, 3)
    assert frame.I == 6
    assert frame.coords[:3].tolist() == [[1, 1], [2, 1], [3, 1]]
    assert frame.coords[-1].tolist() == [3, 2]
    assert make_grid(20, 10).I == 200
    failing_test(make_grid, [0, 3], exception=ShapeMismatch)


def test_derive_seeds():
    assert derive_seeds(5, 3) == derive_seeds(5, 3)
    assert len(set(derive_seeds(5, 4))) == 4
    assert derive_seeds(5, 2) != derive_seeds(6, 2)


def test_random_transition_matrix():
    matrix = random_transition_matrix(4, np.random.default_rng(1))
    assert matrix.S == 4
    assert np.allclose(matrix.p.sum(axis=0), 1.0)


def test_scenario_validation():
    failing_test(scenario, kwargs=dict(e=1.5), exception=ValueError)
    failing_test(scenario, kwargs=dict(T=0), exception=ValueError)
    failing_test(scenario, kwargs=dict(replicates=-1), exception=ValueError)
    failing_test(scenario, kwargs=dict(replicates=np.ones((3, 3), dtype=int)), exception=ValueError)
    failing_test(
        SimulationScenario,
        kwargs=dict(
            frame=make_grid(2, 2),
            states=StateSpace.of_size(2),
            T=2,
            phi=InitialDistribution([0.5, 0.5]),
            P=TransitionMatrix(P3),
            e=0.1,
            bandwidth=BandwidthMatrix(1.0, 1.0),
        ),
        exception=ValueError,
    )
    table = np.ones((25, 4), dtype=int)
    table[0, 0] = 0
    assert scenario(replicates=table).replicate_table()[0, 0] == 0


def test_scenario_fields_are_closed():
    base = scenario()
    fields = {name: getattr(base, name) for name in base.__fields__}
    with pytest.raises(ValueError, match="kappa"):
        SimulationScenario(**fields, kappa=1.0)
    copied = SimulationScenario(**fields)
    assert copied.S == 3 and copied.I == 25


def test_occupancy_follows_transitions():
    panel = simulate_occupancy(scenario(rows=30, cols=30, T=40, seed=4))
    assert (panel.I, panel.T) == (900, 40)
    estimate = empirical_transitions(panel.z, 3)
    assert np.max(np.abs(estimate - np.array(P3))) < 0.02


def test_identity_transitions_keep_states():
    panel = simulate_occupancy(scenario(T=6, P=np.eye(3).tolist()))
    assert np.all(panel.z == panel.z[:, :1])


def test_error_free_records_equal_states():
    dataset = simulate_dataset(scenario(e=0.0, replicates=3))
    data = dataset.observations
    assert data.R == 25 * 4 * 3
    assert np.all(data.m == 0)
    assert np.array_equal(data.state, dataset.z.z[data.site, data.time])


def test_certain_errors_follow_local_dominance():
    sc = scenario(rows=10, cols=10, T=3, e=1.0, replicates=1, seed=9)
    panel = OccupancyPanel(np.tile([0, 1, 2, 0, 1], (100, 1))[:, :3], S=3)
    data = simulate_observations(panel, sc, np.random.default_rng(2))
    assert np.all(data.m == 1)
    # at every period all sites hold one state, so its dominance is 1
    assert np.array_equal(data.state, panel.z[data.site, data.time])


def test_error_rate_and_spatial_draw():
    sc = scenario(rows=20, cols=20, T=2, e=0.4, replicates=2, seed=13)
    dataset = simulate_dataset(sc)
    data = dataset.observations
    assert abs(data.m.mean() - 0.4) < 0.04
    g = dominance_field(dataset.z.z, kernel_matrix(sc.frame, sc.bandwidth), 3)
    errors = data.m == 1
    # an erroneous record shows the site's own state with the probability of its local dominance
    own = g[data.site[errors], data.time[errors], dataset.z.z[data.site[errors], data.time[errors]]]
    agree = data.state[errors] == dataset.z.z[data.site[errors], data.time[errors]]
    assert abs(agree.mean() - own.mean()) < 0.08


def test_missing_surveys():
    table = np.ones((25, 4), dtype=int)
    table[3, 2] = 0
    table[4, 0] = 2
    data = simulate_dataset(scenario(replicates=table)).observations
    assert data.counts()[3, 2] == 0
    assert data.counts()[4, 0] == 2
    assert data.R == table.sum()


def test_shape_mismatch():
    sc = scenario()
    failing_test(simulate_observations, [OccupancyPanel(np.zeros((3, 4), dtype=int)), sc], exception=ShapeMismatch)


def test_deterministic():
    first, second = simulate_dataset(scenario(seed=21)), simulate_dataset(scenario(seed=21))
    assert np.array_equal(first.z.z, second.z.z)
    assert np.array_equal(first.observations.state, second.observations.state)
    other = simulate_dataset(scenario(seed=22))
    assert not np.array_equal(first.z.z, other.z.z)


def test_truth():
    truth = simulate_dataset(scenario(seed=3)).truth()
    assert truth["P"] == P3
    assert truth["e"] == 0.3 and truth["sigma1"] == 1.0
    assert len(truth["m"]) == 100


@pytest.mark.parametrize("workers", [1, 2])
def test_run_scenario_batch(workers):
    datasets = run_scenario_batch(scenario(seed=7), 3, workers=workers)
    assert len(datasets) == 3
    assert len({dataset.scenario.seed for dataset in datasets}) == 3
    again = run_scenario_batch(scenario(seed=7), 3)
    for first, second in zip(datasets, again):
        assert np.array_equal(first.observations.state, second.observations.state)


def test_batch_redraws_transitions():
    datasets = run_scenario_batch(scenario(seed=7), 2, redraw_transitions=True)
    assert not np.allclose(datasets[0].scenario.P.p, datasets[1].scenario.P.p)
    failing_test(run_scenario_batch, [scenario(), 0], exception=ShapeMismatch)
