"""Calderon-Zygmund decompositions of Sobolev functions on weighted graphs.

A finite weighted graph with a node measure stands in for a doubling
metric-measure space.  The package builds the decomposition
``f = g + sum_i b_i`` with mean-value or heat-semigroup oscillation
operators and measures every constant in its hypotheses and conclusions.
"""
__version__ = "0.1.0"

from .calculus import gradient_modulus, laplacian_apply, norm, sobolev_norm
from .czd import cz_decompose, level_set, partition_of_unity, verify_cz, whitney
from .errors import CZKitError
from .interpolation import besov_norm, gn_check, k_bruteforce, k_lebesgue, k_sobolev_upper
from .maximal import collection_maximal, hl_maximal, rearrangements, weak_type_ratio
from .poincare import bounded_covering, offdiagonal_constants, poincare_constant, probe_family
from .semigroup import heat_apply, heat_kernel, kernel_bounds_report, make_collection, riesz_quotients
from .space import Ball, MetricMeasureSpace, build_space, doubling_profile

__all__ = [
    "Ball", "CZKitError", "MetricMeasureSpace", "besov_norm", "bounded_covering", "build_space",
    "collection_maximal", "cz_decompose", "doubling_profile", "gn_check", "gradient_modulus",
    "heat_apply", "heat_kernel", "hl_maximal", "k_bruteforce", "k_lebesgue", "k_sobolev_upper",
    "kernel_bounds_report", "laplacian_apply", "level_set", "make_collection", "norm",
    "offdiagonal_constants", "partition_of_unity", "poincare_constant", "probe_family",
    "rearrangements", "riesz_quotients", "sobolev_norm", "verify_cz", "weak_type_ratio", "whitney",
]
