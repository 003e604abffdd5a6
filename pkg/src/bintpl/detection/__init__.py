"""Candidate detection: basic-feature matching, function retrieval and the FCG filter."""

from bintpl.detection.basic import match_basic, passes_basic_rules, passes_vanilla_rules
from bintpl.detection.candidates import (
    CHANNEL_A,
    CHANNEL_B,
    Candidate,
    FunctionPair,
    MatchedFeature,
    merge_candidates,
)
from bintpl.detection.fcg import MiniFcg, build_mini_fcg, common_edges, fcg_filter
from bintpl.detection.pipeline import DetectionResult, Detector
from bintpl.detection.retrieval import pair_functions, retrieve_candidates

__all__ = [
    "CHANNEL_A",
    "CHANNEL_B",
    "Candidate",
    "FunctionPair",
    "MatchedFeature",
    "MiniFcg",
    "DetectionResult",
    "Detector",
    "match_basic",
    "passes_basic_rules",
    "passes_vanilla_rules",
    "retrieve_candidates",
    "pair_functions",
    "build_mini_fcg",
    "common_edges",
    "fcg_filter",
    "merge_candidates",
]
