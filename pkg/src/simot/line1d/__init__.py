"""One-dimensional constructions: Lyapunov maps, Monge approximation, greedy mixing."""
from .density import PiecewiseConstantDensity, PiecewiseMap, common_refinement, kolmogorov_distance, pushforward_cdf
from .lyapunov import lyapunov_partition, lyapunov_split, lyapunov_transform
from .mixing import MapExtraction, MonotoneMixingResult, extract_monge_map, monotone_mixing_1d
from .monge import MongeApproxResult, MongeCell, MongePartition, monge_approx

__all__ = [
    "PiecewiseConstantDensity",
    "PiecewiseMap",
    "common_refinement",
    "kolmogorov_distance",
    "pushforward_cdf",
    "lyapunov_transform",
    "lyapunov_split",
    "lyapunov_partition",
    "monge_approx",
    "MongeApproxResult",
    "MongeCell",
    "MongePartition",
    "monotone_mixing_1d",
    "MonotoneMixingResult",
    "extract_monge_map",
    "MapExtraction",
]
