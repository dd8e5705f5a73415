# -*- coding: utf-8 -*-
# flake8: noqa: F401


__version__ = "0.1.0"

from .core.keywords import Model, SPATIAL, NONSPATIAL, NAIVE
from .core.space import StateSpace, SiteFrame, TransitionMatrix, InitialDistribution, BandwidthMatrix
from .core.panel import ObservationSet, OccupancyPanel
from .core.sampler import FitConfig, run_chains
