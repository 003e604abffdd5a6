"""Inverted index over basic features (string literals and exported names)."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Tuple

from bintpl.errors import IntegrityError
from bintpl.features import ExportedName, StringLiteral

logger = logging.getLogger(__name__)

STRING = "string"
EXPORT = "export"
FEATURE_KINDS = (STRING, EXPORT)


@dataclass(frozen=True)
class UnitTotals:
    """Per-unit basic feature counts used as rule denominators."""
    string_count: int = 0
    string_weight: float = 0.0
    export_count: int = 0


class InvertedIndex:
    """Map (kind, value) -> unit ids, plus per-unit totals.

    Matching is exact and case-sensitive. Strings and exported names live in
    separate key spaces.
    """

    def __init__(self):
        self._postings: Dict[Tuple[str, str], Set[str]] = {}
        self._weights: Dict[str, float] = {}
        self._totals: Dict[str, UnitTotals] = {}

    def __len__(self) -> int:
        return len(self._postings)

    @property
    def posting_count(self) -> int:
        return sum(len(units) for units in self._postings.values())

    def add_unit(
        self,
        unit_id: str,
        strings: Iterable[StringLiteral],
        exports: Iterable[ExportedName],
    ) -> None:
        strings, exports = sorted(set(strings)), sorted(set(exports))
        for literal in strings:
            self._postings.setdefault((STRING, literal.value), set()).add(unit_id)
            self._weights.setdefault(literal.value, literal.weight)
        for export in exports:
            self._postings.setdefault((EXPORT, export.name), set()).add(unit_id)
        self._totals[unit_id] = UnitTotals(
            string_count=len(strings),
            string_weight=sum(self._weights[s.value] for s in strings),
            export_count=len(exports),
        )

    def lookup(self, value: str, kind: Optional[str] = None) -> Set[str]:
        """Unit ids containing value; both kinds when kind is None."""
        kinds = FEATURE_KINDS if kind is None else (kind,)
        found: Set[str] = set()
        for k in kinds:
            found |= self._postings.get((k, value), set())
        return found

    def weight(self, value: str) -> float:
        return self._weights.get(value, 0.0)

    def totals(self, unit_id: str) -> UnitTotals:
        return self._totals.get(unit_id, UnitTotals())

    def unit_ids(self) -> List[str]:
        return sorted(self._totals)

    def recompute_totals(self) -> Dict[str, UnitTotals]:
        """Per-unit totals rebuilt from the postings alone."""
        counts: Dict[str, List[float]] = {u: [0, 0.0, 0] for u in self._totals}
        for (kind, value), units in self._postings.items():
            for unit in units:
                entry = counts.setdefault(unit, [0, 0.0, 0])
                if kind == STRING:
                    entry[0] += 1
                    entry[1] += self._weights[value]
                else:
                    entry[2] += 1
        return {u: UnitTotals(int(c[0]), float(c[1]), int(c[2])) for u, c in counts.items()}

    def verify(self) -> None:
        """Check that stored totals match a recomputation.

        Raises:
            IntegrityError: On any mismatch
        """
        for unit, expected in self.recompute_totals().items():
            stored = self._totals.get(unit)
            if stored is None or stored.string_count != expected.string_count \
                    or stored.export_count != expected.export_count \
                    or abs(stored.string_weight - expected.string_weight) > 1e-6 * max(1.0, expected.string_weight):
                raise IntegrityError(f"Inverted index totals for unit {unit!r} do not match its postings")

    def to_document(self) -> Dict:
        postings: Dict[str, Dict[str, List[str]]] = {kind: {} for kind in FEATURE_KINDS}
        for (kind, value), units in sorted(self._postings.items()):
            postings[kind][value] = sorted(units)
        return {
            "postings": postings,
            "weights": dict(sorted(self._weights.items())),
            "totals": {
                unit: [t.string_count, t.string_weight, t.export_count]
                for unit, t in sorted(self._totals.items())
            },
        }

    @classmethod
    def from_document(cls, doc: Dict) -> "InvertedIndex":
        index = cls()
        for kind in FEATURE_KINDS:
            for value, units in doc["postings"].get(kind, {}).items():
                index._postings[(kind, value)] = set(units)
        index._weights = {k: float(v) for k, v in doc["weights"].items()}
        index._totals = {
            unit: UnitTotals(int(sc), float(sw), int(ec))
            for unit, (sc, sw, ec) in doc["totals"].items()
        }
        index.verify()
        return index
