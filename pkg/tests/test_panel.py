# %%
import numpy as np

from occupancy_engine.core.errors import InvalidDistribution, ShapeMismatch
from occupancy_engine.core.panel import DominanceField, ObservationSet, OccupancyPanel
from tests.utils import failing_test, small_dataset


def test_occupancy_panel():
    panel = OccupancyPanel([[0, 1], [2, 2]], S=3)
    assert (panel.I, panel.T) == (2, 2)
    assert panel.z.dtype == np.int64
    failing_test(OccupancyPanel, [[[0, 3]]], dict(S=3), exception=ShapeMismatch)
    failing_test(OccupancyPanel, [[0, 1]], exception=ShapeMismatch)
    failing_test(OccupancyPanel, [[[0.5, 1]]], exception=ShapeMismatch)


def test_observation_set_from_ragged():
    data, _, _ = small_dataset()
    assert (data.I, data.T, data.R) == (4, 3, 11)
    counts = data.counts()
    assert counts[2, 1] == 0
    assert counts.sum() == 11
    assert data.replicates(1, 1).tolist() == [1]
    assert data.replicates(2, 1).tolist() == []
    assert data.ragged()[3] == [[1], [1], [0]]


def test_single_record():
    data = ObservationSet(1, 1, [0], [0], [1])
    assert data.counts().tolist() == [[1]]
    assert data.replicates(0, 0).tolist() == [1]


def test_records_sorted_and_replicates_kept():
    data = ObservationSet(2, 2, site=[1, 0, 1, 0], time=[0, 1, 0, 1], state=[2, 0, 1, 1], m=[1, 0, 0, 0])
    assert data.site.tolist() == [0, 0, 1, 1]
    assert data.time.tolist() == [1, 1, 0, 0]
    # replicates of a survey keep their order
    assert data.replicates(1, 0).tolist() == [2, 1]
    assert data.replicates(0, 1).tolist() == [0, 1]
    assert data.m.tolist() == [0, 0, 1, 0]
    assert data.counts().tolist() == [[0, 2], [2, 0]]


def test_observation_set_errors():
    failing_test(ObservationSet, [2, 2, [0, 1], [0], [0, 0]], exception=ShapeMismatch)
    failing_test(ObservationSet, [2, 2, [2], [0], [0]], exception=ShapeMismatch)
    failing_test(ObservationSet, [2, 2, [0], [2], [0]], exception=ShapeMismatch)
    failing_test(ObservationSet, [0, 2, [], [], []], exception=ShapeMismatch)
    failing_test(ObservationSet, [1, 1, [0], [0], [-1]], exception=ShapeMismatch)
    failing_test(ObservationSet, [1, 1, [0], [0], [0]], dict(m=[2]), exception=ShapeMismatch)
    data = ObservationSet(1, 1, [0], [0], [3])
    failing_test(data.check_states, [3], exception=ShapeMismatch)
    data.check_states(4)


def test_with_flags():
    data, _, _ = small_dataset()
    assert data.m is None
    flagged = data.with_flags(np.zeros(data.R))
    assert flagged.m.tolist() == [0] * data.R
    assert np.array_equal(flagged.state, data.state)


def test_dominance_field():
    g = np.full((2, 3, 2), 0.5)
    assert DominanceField(g).g.shape == (2, 3, 2)
    failing_test(DominanceField, [np.full((2, 3, 2), 0.6)], exception=InvalidDistribution)
    failing_test(DominanceField, [np.full((2, 2), 0.5)], exception=ShapeMismatch)
