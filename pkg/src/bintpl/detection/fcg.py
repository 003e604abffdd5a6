"""FCG filter: contract call graphs onto matched functions and count common edges."""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from bintpl.config import RetrievalConfig
from bintpl.detection.candidates import CHANNEL_A, Candidate, FunctionPair, merge_candidates
from bintpl.detection.retrieval import pair_functions
from bintpl.embedding.model import FunctionVector
from bintpl.featuredb import TplDatabase
from bintpl.features import BinaryFeatureSet, Fcg

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiniFcg:
    """A call graph contracted onto its anchor nodes."""
    anchors: FrozenSet[str]
    edges: FrozenSet[Tuple[str, str]]


def _successors(fcg: Fcg) -> Dict[str, List[str]]:
    succ: Dict[str, List[str]] = {node: [] for node in fcg.nodes}
    for caller, callee in fcg.edges:
        succ[caller].append(callee)
    return succ


def build_mini_fcg(fcg: Fcg, anchors: Iterable[str]) -> MiniFcg:
    """Contract fcg onto anchors.

    (a, b) is an edge iff a != b are anchors and b is reachable from a along a
    path whose interior nodes are all non-anchors. Cycles are fine: each
    search marks nodes as visited.
    """
    anchors = frozenset(anchors) & frozenset(fcg.nodes)
    succ = _successors(fcg)
    edges: Set[Tuple[str, str]] = set()
    for source in anchors:
        seen = {source}
        queue = deque(succ[source])
        while queue:
            node = queue.popleft()
            if node in anchors:
                if node != source:
                    edges.add((source, node))
                continue
            if node in seen:
                continue
            seen.add(node)
            queue.extend(succ[node])
    return MiniFcg(anchors=anchors, edges=frozenset(edges))


def common_edges(
    mini_target: MiniFcg,
    mini_unit: MiniFcg,
    pairs: Iterable[FunctionPair],
) -> int:
    """Target edges whose endpoints pair with the endpoints of some unit edge.

    Each target edge counts at most once.
    """
    partners: Dict[str, Set[str]] = {}
    for pair in pairs:
        partners.setdefault(pair.target_function, set()).add(pair.unit_function)

    count = 0
    for f1, f2 in mini_target.edges:
        if any(
            (g1, g2) in mini_unit.edges
            for g1 in partners.get(f1, ())
            for g2 in partners.get(f2, ())
        ):
            count += 1
    return count


class _TargetView:
    """Target-side data shared by every candidate comparison."""

    def __init__(self, target: BinaryFeatureSet, target_vectors: Sequence[FunctionVector]):
        self.fcg = target.fcg
        ordered = sorted(target_vectors, key=lambda v: v.function_id)
        self.function_ids = [v.function_id for v in ordered]
        self.matrix = np.array([v.vector for v in ordered]) if ordered else np.zeros((0, 0))


def score_candidate(
    candidate: Candidate,
    view: _TargetView,
    db: TplDatabase,
    cfg: RetrievalConfig,
) -> Candidate:
    """Common-edge score of one candidate.

    Channel-A candidates are paired by nearest unit function first; channel-B
    candidates reuse the pairs found during retrieval.

    Raises:
        IntegrityError: If the unit has no stored payload
    """
    payload = db.payload(candidate.unit_id)
    if candidate.channel == CHANNEL_A:
        unit_ids, unit_matrix = db.unit_vectors(candidate.unit_id)
        pairs = pair_functions(view.function_ids, view.matrix, unit_ids, unit_matrix, cfg.pair_threshold)
    else:
        pairs = set(candidate.matched_pairs)

    mini_target = build_mini_fcg(view.fcg, {p.target_function for p in pairs})
    mini_unit = build_mini_fcg(payload.fcg, {p.unit_function for p in pairs})
    score = common_edges(mini_target, mini_unit, pairs)
    logger.debug(
        f"FCG filter: {candidate.unit_id} ({candidate.channel}) {len(pairs)} pairs, "
        f"{score} common edges"
    )
    return candidate.with_score(score, pairs)


def fcg_filter(
    candidates: Sequence[Candidate],
    target: BinaryFeatureSet,
    target_vectors: Sequence[FunctionVector],
    db: TplDatabase,
    cfg: Optional[RetrievalConfig] = None,
    workers: int = 1,
) -> List[Candidate]:
    """Score candidates by common edges, drop weak ones and merge channels.

    A channel-A candidate survives with at least channel_a_min_edges common
    edges, a channel-B candidate with channel_b_min_edges. Survivors of both
    channels are merged by unit keeping the higher score.

    Raises:
        IntegrityError: If a candidate's unit payload is missing
    """
    cfg = cfg or RetrievalConfig()
    view = _TargetView(target, target_vectors)

    if workers > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(lambda c: score_candidate(c, view, db, cfg), candidates))
    else:
        scored = [score_candidate(c, view, db, cfg) for c in candidates]

    kept = [
        c for c in scored
        if c.score >= (cfg.channel_a_min_edges if c.channel == CHANNEL_A else cfg.channel_b_min_edges)
    ]
    merged = merge_candidates(kept)
    logger.info(f"FCG filter: {len(merged)} of {len(candidates)} candidates kept")
    return merged
