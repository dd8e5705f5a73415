# flake8: noqa: F401
from .space import StateSpace, SiteFrame, TransitionMatrix, InitialDistribution, BandwidthMatrix
from .panel import OccupancyPanel, ObservationSet, DominanceField
from .state import ChainState
from .draws import ChainDraws, PosteriorDraws
from .sampler import FitConfig, GibbsSampler, run_chain, run_chains
