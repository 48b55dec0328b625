"""Weighted Besov and Triebel-Lizorkin machinery on finite metric measure spaces."""

from .space import (
    MetricMeasureSpace,
    build_dyadic_cubes,
    build_graph_space,
    build_grid_space,
    estimate_doubling,
)
from .weights import Weight, ap_constant, constant_weight, power_weight, weighted_lp_norm
from .operator import SelfAdjointOperator, build_laplacian, heat_kernel

__version__ = "0.1.0"
