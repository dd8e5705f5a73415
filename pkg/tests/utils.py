import os

import numpy as np
import pytest

from occupancy_engine.core.panel import ObservationSet
from occupancy_engine.core.space import SiteFrame, StateSpace

slow = pytest.mark.skipif(
    not os.environ.get("OCCUPANCY_SLOW_TESTS"), reason="long-running check, set OCCUPANCY_SLOW_TESTS=1"
)


def failing_test(func, args=[], kwargs={}, checker=lambda x: True, exception=Exception):
    try:
        checker(func(*args, **kwargs))
        raise Exception(f"{func=}, {args=}, {kwargs=} can not be passed")
    except exception:
        pass


def line_frame(I: int) -> SiteFrame:  # noqa: E741
    return SiteFrame(np.column_stack([np.arange(1.0, I + 1), np.ones(I)]))


def small_dataset():
    """Four sites on a line, two states, three periods, one missing survey."""
    y = [
        [[0], [0], [1]],
        [[0], [1], [1]],
        [[1], [], [1]],
        [[1], [1], [0]],
    ]
    return ObservationSet.from_ragged(y), line_frame(4), StateSpace.of_size(2)


# transition matrices of one quadrat as published, rounded to three decimals
PUBLISHED_NAIVE = [
    [0.560, 0.328, 0.375, 0.051, 0.164],
    [0.085, 0.267, 0.100, 0.020, 0.082],
    [0.320, 0.339, 0.446, 0.020, 0.143],
    [0.006, 0.013, 0.003, 0.471, 0.156],
    [0.028, 0.053, 0.076, 0.438, 0.455],
]
PUBLISHED_NONSPATIAL = [
    [0.670, 0.221, 0.307, 0.013, 0.028],
    [0.064, 0.416, 0.100, 0.014, 0.016],
    [0.258, 0.328, 0.585, 0.011, 0.020],
    [0.003, 0.005, 0.002, 0.501, 0.196],
    [0.005, 0.029, 0.006, 0.461, 0.740],
]
PUBLISHED_SPATIAL = [
    [0.772, 0.160, 0.208, 0.015, 0.040],
    [0.053, 0.574, 0.060, 0.016, 0.029],
    [0.165, 0.239, 0.713, 0.015, 0.037],
    [0.003, 0.008, 0.002, 0.684, 0.098],
    [0.007, 0.020, 0.017, 0.270, 0.796],
]
