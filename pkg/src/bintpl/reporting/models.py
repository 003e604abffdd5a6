"""Pydantic schema of detection reports."""

from typing import Dict, List, Tuple

from pydantic import BaseModel, Field


class Evidence(BaseModel):
    """One surviving candidate unit backing a library verdict."""
    unit: str = Field(..., description="Comparison unit id")
    version: str = Field(..., description="Version of the unit's library package")
    channel: str = Field(..., description="Contributing channels, e.g. 'A', 'B' or 'A+B'")
    score: float = Field(..., ge=0, description="Common-edge count, or evidence count without the filter")
    matched_pairs: int = Field(0, ge=0, description="Similar-function pairs")
    matched_features: int = Field(0, ge=0, description="Common basic features")


class LibraryVerdict(BaseModel):
    """A library detected in the target and its identified version."""
    library: str
    version: str = Field(..., description="Best version (highest summed score, latest on ties)")
    version_scores: Dict[str, float] = Field(..., description="Version -> summed candidate score")
    evidence: List[Evidence]


class DetectionReport(BaseModel):
    """Libraries detected in one target."""
    target: str
    libraries: List[LibraryVerdict] = Field(default_factory=list)

    def library_ids(self) -> List[str]:
        return [verdict.library for verdict in self.libraries]

    def versions(self) -> Dict[str, str]:
        return {verdict.library: verdict.version for verdict in self.libraries}

    def detected(self) -> List[Tuple[str, str]]:
        return [(verdict.library, verdict.version) for verdict in self.libraries]
