"""
Types
---------------------------
Basic types are defined here.
"""
from typing import Callable, Union
from enum import Enum, auto

import numpy as np

SeedType = Union[int, np.random.SeedSequence]
"""a seed can be a casual integer or a spawned :py:class:`numpy.random.SeedSequence`"""

Position = tuple[float, float]
"""two-dimensional site coordinate"""

HandlerType = Callable
"""sweep handlers are called as `handler(state, sampler)`"""

PARAMETER_NAMES = ("P", "phi", "e", "sigma1", "sigma2", "rho")
"""names of the parameters that can be fixed in :py:class:`~occupancy_engine.core.sampler.FitConfig`"""

BANDWIDTH_NAMES = ("sigma1", "sigma2", "rho")


class SweepStage(Enum):
    """
    The class which holds keys for the handlers. These keys are used later
    for the stages of a sweep of :py:class:`~occupancy_engine.core.sampler.GibbsSampler`.
    A handler registered for a stage runs right after that stage.

    Enums:

    CHAIN_INIT

    UPDATE_M

    UPDATE_Z

    UPDATE_TRANSITIONS

    UPDATE_PHI

    UPDATE_E

    UPDATE_BANDWIDTH

    FINISH_SWEEP
    """

    CHAIN_INIT = auto()
    UPDATE_M = auto()
    UPDATE_Z = auto()
    UPDATE_TRANSITIONS = auto()
    UPDATE_PHI = auto()
    UPDATE_E = auto()
    UPDATE_BANDWIDTH = auto()
    FINISH_SWEEP = auto()
