"""Channel B: similar-function retrieval, and pairwise function matching."""

import logging
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from bintpl.config import RetrievalConfig
from bintpl.detection.candidates import CHANNEL_B, Candidate, FunctionPair
from bintpl.embedding.model import FunctionVector
from bintpl.featuredb import TplDatabase

logger = logging.getLogger(__name__)

# Scores this close come from the same vector stored in several units.
_SAME_SCORE = 1e-9


def retrieve_candidates(
    target_vectors: Sequence[FunctionVector],
    db: TplDatabase,
    cfg: Optional[RetrievalConfig] = None,
) -> List[Candidate]:
    """Channel-B candidates: units owning the most similar functions.

    Every target function retrieves its top-K neighbors. Units are ranked by
    how many of these hits they own (ties by ascending unit id) and cut at the
    unit cap. A hit becomes a pair of its unit only when its cosine exceeds
    the retrieval pair threshold and it scores within the retrieval pair
    margin of the target function's best hit, so copies of that function in
    several versions all receive the pair while merely similar functions of
    other units do not.
    """
    cfg = cfg or RetrievalConfig()
    hit_counts: Dict[str, int] = {}
    best: Dict[Tuple[str, str], FunctionPair] = {}

    for fv in sorted(target_vectors, key=lambda v: v.function_id):
        hits = db.topk(fv.vector, cfg.k)
        if not hits:
            continue
        floor = hits[0][2] - cfg.retrieval_pair_margin - _SAME_SCORE
        for function_id, unit_id, score in hits:
            hit_counts[unit_id] = hit_counts.get(unit_id, 0) + 1
            if score <= cfg.retrieval_pair_threshold or score < floor:
                continue
            # hits arrive by descending score, so the first one per unit is the best
            best.setdefault((unit_id, fv.function_id), FunctionPair(fv.function_id, function_id, score))

    ranked = sorted(hit_counts, key=lambda u: (-hit_counts[u], u))[: cfg.unit_cap]
    pairs: Dict[str, Set[FunctionPair]] = {}
    for (unit_id, _), pair in best.items():
        pairs.setdefault(unit_id, set()).add(pair)

    candidates = [
        Candidate(
            unit=db.unit(unit_id),
            channel=CHANNEL_B,
            matched_pairs=frozenset(pairs.get(unit_id, ())),
            score=len(pairs.get(unit_id, ())),
            hits=hit_counts[unit_id],
        )
        for unit_id in ranked
    ]
    logger.info(
        f"Channel B: {len(target_vectors)} target functions hit {len(hit_counts)} units, "
        f"{len(candidates)} kept"
    )
    return candidates


def pair_functions(
    target_ids: Sequence[str],
    target_matrix: np.ndarray,
    unit_ids: Sequence[str],
    unit_matrix: np.ndarray,
    threshold: float = 0.8,
) -> Set[FunctionPair]:
    """Match each target function to its most similar unit function.

    Rows of both matrices are unit-norm. The argmax tie goes to the earliest
    unit row, so unit_ids should be sorted. A pair is kept iff its cosine
    exceeds threshold; several target functions may share one unit function.
    """
    if len(target_ids) == 0 or len(unit_ids) == 0:
        return set()
    similarity = np.asarray(target_matrix) @ np.asarray(unit_matrix).T
    best = np.argmax(similarity, axis=1)
    pairs = set()
    for row, column in enumerate(best):
        cosine = float(similarity[row, column])
        if cosine > threshold:
            pairs.add(FunctionPair(target_ids[row], unit_ids[column], cosine))
    return pairs
