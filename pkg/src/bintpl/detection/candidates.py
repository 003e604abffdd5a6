"""Candidate comparison units produced by the two detection channels."""

from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple

from bintpl.featuredb.database import UnitRef

CHANNEL_A = "A"
CHANNEL_B = "B"


class MatchedFeature(NamedTuple):
    """A basic feature shared by the target and a unit."""
    kind: str
    value: str
    weight: float


class FunctionPair(NamedTuple):
    """A target function matched to a unit function."""
    target_function: str
    unit_function: str
    cosine: float


@dataclass
class Candidate:
    """One comparison unit that may be packaged in the target.

    Attributes:
        unit: The unit
        channel: Channel that produced it (A = basic features, B = retrieval)
        matched_basic: Common basic features (channel A)
        matched_pairs: Similar-function pairs (carried by channel B, filled by
            the FCG filter for channel A)
        score: Common-edge count once filtered; evidence count otherwise
        channels: Every channel whose candidate for this unit survived
        hits: Retrieval hits in this unit (channel B ranking key)
    """
    unit: UnitRef
    channel: str
    matched_basic: FrozenSet[MatchedFeature] = frozenset()
    matched_pairs: FrozenSet[FunctionPair] = frozenset()
    score: float = 0.0
    channels: Tuple[str, ...] = ()
    hits: int = 0

    def __post_init__(self):
        if self.channel not in (CHANNEL_A, CHANNEL_B):
            raise ValueError(f"Unknown channel {self.channel!r}")
        if self.score < 0:
            raise ValueError(f"Candidate score must be >= 0, got {self.score}")
        self.matched_basic = frozenset(self.matched_basic)
        self.matched_pairs = frozenset(self.matched_pairs)
        if not self.channels:
            self.channels = (self.channel,)

    @property
    def unit_id(self) -> str:
        return self.unit.unit_id

    @property
    def evidence_count(self) -> int:
        """Score used when the FCG filter is off."""
        if self.channel == CHANNEL_A:
            return len(self.matched_basic)
        return len(self.matched_pairs)

    def with_score(self, score: float, pairs: Optional[Iterable[FunctionPair]] = None) -> "Candidate":
        if pairs is None:
            return replace(self, score=score)
        return replace(self, score=score, matched_pairs=frozenset(pairs))


def merge_candidates(candidates: Iterable[Candidate]) -> List[Candidate]:
    """Deduplicate by unit, keeping the highest score.

    On equal scores the channel-A candidate wins. The merged candidate keeps
    the union of matched basic features and lists every contributing channel.
    Output is sorted by unit id.
    """
    by_unit: Dict[str, List[Candidate]] = {}
    for candidate in candidates:
        by_unit.setdefault(candidate.unit_id, []).append(candidate)

    merged = []
    for unit_id in sorted(by_unit):
        group = by_unit[unit_id]
        best = max(group, key=lambda c: (c.score, c.channel == CHANNEL_A))
        basic = frozenset().union(*(c.matched_basic for c in group))
        channels = tuple(sorted({ch for c in group for ch in c.channels}))
        merged.append(replace(best, matched_basic=basic, channels=channels))
    return merged
