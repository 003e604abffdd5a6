"""File format handlers for bintpl."""

from bintpl.formats.manifest import (
    Manifest,
    load_manifest,
    manifest_schema,
    parse_manifest,
    format_manifest_string,
    write_manifest,
)
from bintpl.formats.report import format_report, read_report, write_reports

__all__ = [
    "Manifest",
    "load_manifest",
    "manifest_schema",
    "parse_manifest",
    "format_manifest_string",
    "write_manifest",
    "format_report",
    "read_report",
    "write_reports",
]
