"""Library version parsing, ordering and distance."""

import re
from dataclasses import dataclass, field
from typing import Tuple, Union

from bintpl.errors import VersionParseError

_VERSION_PATTERN = re.compile(r"(\d+)(?:\.(\d+))?(?:\.(\d+))?")

DEFAULT_DISTANCE_COEFFICIENTS = (10.0, 1.0, 0.1)


@dataclass(frozen=True, order=True)
class Version:
    """Major.Minor.Patch triple; missing parts read as 0, suffixes are dropped.

    Ordering and equality use the numeric triple; raw keeps the original text.
    """
    major: int
    minor: int = 0
    patch: int = 0
    raw: str = field(default="", compare=False)

    @classmethod
    def parse(cls, text: str) -> "Version":
        """Parse version text such as "1.6.37", "2.1" or "v1.2.3-rc1".

        Raises:
            VersionParseError: If the text contains no number
        """
        match = _VERSION_PATTERN.search(text or "")
        if match is None:
            raise VersionParseError(f"Cannot parse version {text!r}")
        major, minor, patch = (int(part) if part else 0 for part in match.groups())
        return cls(major, minor, patch, raw=text)

    @property
    def key(self) -> Tuple[int, int, int]:
        return (self.major, self.minor, self.patch)

    def __str__(self) -> str:
        return self.raw or f"{self.major}.{self.minor}.{self.patch}"


def as_version(value: Union[str, Version]) -> Version:
    return value if isinstance(value, Version) else Version.parse(value)


def version_distance(
    v1: Union[str, Version],
    v2: Union[str, Version],
    coefficients: Tuple[float, float, float] = DEFAULT_DISTANCE_COEFFICIENTS,
) -> float:
    """Weighted L1 distance between two versions.

    With the default coefficients a major step costs 10, a minor step 1 and a
    patch step 0.1: version_distance("1.6.37", "1.6.35") == 0.2.

    Raises:
        VersionParseError: If either version is unparseable
    """
    a, b = as_version(v1), as_version(v2)
    c_major, c_minor, c_patch = coefficients
    return (
        c_major * abs(a.major - b.major)
        + c_minor * abs(a.minor - b.minor)
        + c_patch * abs(a.patch - b.patch)
    )
