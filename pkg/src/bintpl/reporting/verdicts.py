"""Library-level verdicts and version identification from final candidates."""

import logging
from typing import Dict, List, Sequence, Tuple

from bintpl.detection.candidates import Candidate
from bintpl.reporting.models import DetectionReport, Evidence, LibraryVerdict
from bintpl.versions import Version

logger = logging.getLogger(__name__)


def report_libraries(candidates: Sequence[Candidate]) -> Dict[str, List[Candidate]]:
    """Group surviving candidates by library, each group sorted by unit id."""
    libraries: Dict[str, List[Candidate]] = {}
    for candidate in sorted(candidates, key=lambda c: c.unit_id):
        libraries.setdefault(candidate.unit.library, []).append(candidate)
    return dict(sorted(libraries.items()))


def identify_version(candidates: Sequence[Candidate]) -> Tuple[Version, Dict[str, float]]:
    """Best version of one library and the per-version score table.

    A version scores the sum of its candidates' scores. The highest score
    wins; ties go to the latest version.

    Raises:
        ValueError: If candidates is empty
    """
    if not candidates:
        raise ValueError("identify_version needs at least one candidate")
    table: Dict[str, float] = {}
    for candidate in sorted(candidates, key=lambda c: c.unit_id):
        table[candidate.unit.version] = table.get(candidate.unit.version, 0.0) + float(candidate.score)

    best = max(table, key=lambda v: (table[v], Version.parse(v), v))
    ordered = dict(sorted(table.items(), key=lambda kv: (Version.parse(kv[0]), kv[0])))
    return Version.parse(best), ordered


def _evidence(candidate: Candidate) -> Evidence:
    return Evidence(
        unit=candidate.unit_id,
        version=candidate.unit.version,
        channel="+".join(candidate.channels),
        score=float(candidate.score),
        matched_pairs=len(candidate.matched_pairs),
        matched_features=len(candidate.matched_basic),
    )


def build_report(target_id: str, candidates: Sequence[Candidate]) -> DetectionReport:
    """Detection report for one target; libraries sorted by id."""
    verdicts = []
    for library, group in report_libraries(candidates).items():
        version, table = identify_version(group)
        verdicts.append(LibraryVerdict(
            library=library,
            version=str(version),
            version_scores=table,
            evidence=[_evidence(c) for c in group],
        ))
        logger.debug(f"{target_id}: {library} {version} from {len(group)} units")
    return DetectionReport(target=target_id, libraries=verdicts)
