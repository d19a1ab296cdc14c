"""Discontinuity witnesses for maps from sets to ordered matrix outputs."""

from .certify import ExternalMap, certify_discontinuity, probe_membership
from .metric import MetricSpec, d_theta, frobenius_diff
from .order import OrderSpec, Ordering, canonical_order, lex_compare, random_order
from .sets import PointSet, RegionSwapMap, SortMap, apply, classify, region_swap_map, row_multiset
from .witness import WitnessCertificate, nonsorting_witness, sorting_witness, witness_sweep

__version__ = "0.1.0"

__all__ = [
    "ExternalMap",
    "MetricSpec",
    "OrderSpec",
    "Ordering",
    "PointSet",
    "RegionSwapMap",
    "SortMap",
    "WitnessCertificate",
    "apply",
    "canonical_order",
    "certify_discontinuity",
    "classify",
    "d_theta",
    "frobenius_diff",
    "lex_compare",
    "nonsorting_witness",
    "probe_membership",
    "random_order",
    "region_swap_map",
    "row_multiset",
    "sorting_witness",
    "witness_sweep",
]
