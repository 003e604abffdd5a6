"""Detection report writers (JSON and plain text) and reader.

Both renderings carry the same content; neither includes timings, so the
bytes depend only on the inputs and the configuration.

JSON layout:
    {"target": ..., "libraries": [{"library", "version", "version_scores",
                                   "evidence": [{"unit", "version", "channel",
                                                 "score", "matched_pairs",
                                                 "matched_features"}]}]}
"""

import json
import sys
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

from pydantic import ValidationError

from bintpl.errors import ManifestValidationError
from bintpl.reporting.models import DetectionReport


def format_report_json(report: DetectionReport) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2) + "\n"


def format_report_text(report: DetectionReport) -> str:
    """Human-readable rendering of a report."""
    lines = [f"target: {report.target}"]
    if not report.libraries:
        lines.append("  no libraries detected")
    for verdict in report.libraries:
        lines.append(f"  {verdict.library} {verdict.version}")
        scores = ", ".join(f"{v}={s:g}" for v, s in verdict.version_scores.items())
        lines.append(f"    version scores: {scores}")
        for ev in verdict.evidence:
            lines.append(
                f"    {ev.unit:<40s} {ev.version:<12s} channel {ev.channel:<4s} "
                f"score {ev.score:g}  pairs {ev.matched_pairs}  features {ev.matched_features}"
            )
    return "\n".join(lines) + "\n"


def format_report(report: DetectionReport, fmt: str = "json") -> str:
    """Render report as 'json' or 'text'."""
    if fmt == "json":
        return format_report_json(report)
    if fmt == "text":
        return format_report_text(report)
    raise ValueError(f"Unknown report format {fmt!r}")


def write_reports(
    reports: Iterable[DetectionReport],
    output: Optional[Union[str, Path]] = None,
    fmt: str = "json",
    stream: Optional[TextIO] = None,
) -> None:
    """Write one or more reports to a file, or to stream when output is None.

    stream defaults to sys.stdout as it is at call time. Several JSON reports
    are written as one JSON array.
    """
    reports = list(reports)
    if fmt == "json" and len(reports) != 1:
        text = json.dumps([r.model_dump(mode="json") for r in reports], indent=2) + "\n"
    else:
        text = "".join(format_report(r, fmt) for r in reports)

    if output is None:
        stream = stream or sys.stdout
        stream.write(text)
        stream.flush()
    else:
        Path(output).write_text(text, encoding="utf-8")


def read_report(path: Union[str, Path]) -> DetectionReport:
    """Load a JSON report.

    Raises:
        ManifestValidationError: If the file is not a valid report
    """
    source = str(path)
    try:
        return DetectionReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as e:
        errors = e.errors()
        paths = [".".join(str(p) for p in err["loc"]) or "<root>" for err in errors]
        raise ManifestValidationError(source, paths, [err["msg"] for err in errors]) from e
