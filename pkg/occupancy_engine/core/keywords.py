"""
Keywords
---------------------------
The model keywords are described here, they select which observation model a fit uses.
"""
from enum import Enum


class Model(str, Enum):
    """
    Models that can be fitted to an observation set.
    The value of each member is the name used in config files and on the command line.

    Enums:

    SPATIAL : "spatial"
        the resampling-error model in which an erroneous record follows the local dominance
        :math:`g_{its}`, a Gaussian-kernel smoother of the latent states around site `i`.
        The bandwidth matrix is estimated together with the other parameters.

    NONSPATIAL : "nonspatial"
        the resampling-error model in which an erroneous record follows the global dominance
        :math:`f_{ts}` of the quadrat. Implemented as the spatial sampler with an infinitely wide kernel.

    NAIVE : "naive"
        the classical count estimator of transition probabilities, which ignores observation errors.
    """

    SPATIAL = "spatial"
    NONSPATIAL = "nonspatial"
    NAIVE = "naive"


# Redefine shortcuts
SPATIAL = Model.SPATIAL
NONSPATIAL = Model.NONSPATIAL
NAIVE = Model.NAIVE

SAMPLED_MODELS = (SPATIAL, NONSPATIAL)
"""models fitted by MCMC"""
