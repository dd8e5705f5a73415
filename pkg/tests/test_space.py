# %%
import numpy as np
import pytest

from occupancy_engine.core.errors import (
    DegenerateBandwidth,
    InvalidDistribution,
    InvalidSiteFrame,
    InvalidStateSpace,
    NegativeEntry,
    NonSquare,
    NonStochastic,
    OccupancyError,
)
from occupancy_engine.core.normalization import label_sort_key, merge_rare_states, relabel_states
from occupancy_engine.core.space import (
    BandwidthMatrix,
    InitialDistribution,
    SiteFrame,
    StateSpace,
    TransitionMatrix,
    validate_transition_matrix,
)
from tests.utils import PUBLISHED_SPATIAL, failing_test


def test_state_space():
    states = StateSpace(["coral", "algae", "sand"])
    assert states.S == 3
    assert StateSpace.of_size(4).labels == ["1", "2", "3", "4"]
    assert StateSpace([1, 2]).labels == ["1", "2"]
    failing_test(StateSpace, [["only"]], exception=InvalidStateSpace)
    failing_test(StateSpace, [["a", "b", "a"]], exception=InvalidStateSpace)


def test_transition_matrix():
    p = [[0.9, 0.2], [0.1, 0.8]]
    matrix = validate_transition_matrix(p)
    assert matrix.S == 2
    assert np.allclose(matrix.p.sum(axis=0), 1.0)
    assert matrix.flagged_columns == []
    identity = TransitionMatrix(np.eye(3))
    assert np.array_equal(identity.p, np.eye(3))
    failing_test(TransitionMatrix, [[[0.5, 0.5], [0.6, 0.5]]], exception=NonStochastic)
    failing_test(TransitionMatrix, [[[1.1, 0.5], [-0.1, 0.5]]], exception=NegativeEntry)
    failing_test(TransitionMatrix, [[[0.5, 0.5, 0.0], [0.5, 0.5, 1.0]]], exception=NonSquare)
    failing_test(TransitionMatrix, [[[np.nan, 0.5], [0.5, 0.5]]], exception=NonStochastic)


def test_published_matrix_needs_opt_in():
    p = np.array(PUBLISHED_SPATIAL)
    assert np.max(np.abs(p.sum(axis=0) - 1.0)) > 1e-12
    failing_test(TransitionMatrix, [p], exception=NonStochastic)
    matrix = TransitionMatrix(p, atol=5e-3, renormalize=True)
    assert np.allclose(matrix.p.sum(axis=0), 1.0, atol=1e-12)
    # rounding-level deviations only
    assert np.max(np.abs(matrix.p - p)) < 5e-3


def test_initial_distribution():
    assert InitialDistribution([0.2, 0.3, 0.5]).S == 3
    failing_test(InitialDistribution, [[0.2, 0.3]], exception=InvalidDistribution)
    failing_test(InitialDistribution, [[1.2, -0.2]], exception=InvalidDistribution)
    failing_test(InitialDistribution, [[[0.5, 0.5]]], exception=InvalidDistribution)


def test_site_frame(caplog):
    frame = SiteFrame([[0, 0], [1, 0], [0, 1]])
    assert frame.I == 3
    assert SiteFrame([2.0, 3.0]).I == 1
    failing_test(SiteFrame, [[[0, 0, 0]]], exception=InvalidSiteFrame)
    failing_test(SiteFrame, [[[0, np.inf]]], exception=InvalidSiteFrame)
    SiteFrame([[0, 0], [0, 0]])
    assert "share a position" in caplog.text


def test_bandwidth_matrix():
    bw = BandwidthMatrix(1.0, 2.0, 0.5)
    assert np.allclose(bw.matrix, [[1.0, 1.0], [1.0, 4.0]])
    assert np.allclose(bw.precision @ bw.matrix, np.eye(2))
    assert BandwidthMatrix.isotropic(3.0).matrix[0, 1] == 0.0
    failing_test(BandwidthMatrix, [0.0, 1.0], exception=DegenerateBandwidth)
    failing_test(BandwidthMatrix, [1.0, 1e-9], exception=DegenerateBandwidth)
    failing_test(BandwidthMatrix, [1.0, 1.0, 1.0], exception=DegenerateBandwidth)
    failing_test(BandwidthMatrix, [1.0, 1.0, -1.5], exception=DegenerateBandwidth)


def test_errors_are_value_errors():
    with pytest.raises(ValueError):
        TransitionMatrix([[0.5, 0.5], [0.6, 0.5]])
    assert issubclass(NonStochastic, OccupancyError)


def test_relabel_states():
    codes, labels = relabel_states(["10", "2", "2", "algae"])
    assert labels == ["2", "10", "algae"]
    assert codes.tolist() == [1, 0, 0, 2]
    codes, labels = relabel_states(["b", "a"], ["a", "b", "c"])
    assert codes.tolist() == [1, 0] and labels == ["a", "b", "c"]
    failing_test(relabel_states, [["x"], ["a", "b"]], exception=InvalidStateSpace)
    assert sorted(["b", "3", "1"], key=label_sort_key) == ["1", "3", "b"]


def test_merge_rare_states():
    codes = np.array([0] * 60 + [1] * 10 + [2] * 70 + [3] * 5)
    merged, labels = merge_rare_states(codes, ["coral", "sponge", "sand", "algae"], 50)
    assert labels == ["coral", "sand", "other"]
    assert np.bincount(merged).tolist() == [60, 70, 15]
    unchanged, same = merge_rare_states(codes, ["a", "b", "c", "d"], 1)
    assert same == ["a", "b", "c", "d"] and np.array_equal(unchanged, codes)
    merged, labels = merge_rare_states(np.array([0, 1, 1, 2, 2]), ["x", "other", "y"], 2)
    assert labels == ["other", "y"]
    assert merged.tolist() == [0, 0, 0, 1, 1]
