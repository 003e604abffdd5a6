"""Library verdicts, version identification and report models."""

from bintpl.reporting.models import DetectionReport, Evidence, LibraryVerdict
from bintpl.reporting.verdicts import build_report, identify_version, report_libraries
from bintpl.versions import Version, version_distance

__all__ = [
    "DetectionReport",
    "Evidence",
    "LibraryVerdict",
    "Version",
    "build_report",
    "identify_version",
    "report_libraries",
    "version_distance",
]
