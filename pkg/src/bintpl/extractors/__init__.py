"""Feature extractors for bintpl."""

from pathlib import Path
from typing import Union

from bintpl.extractors.base import FeatureExtractor
from bintpl.extractors.elf import ELF_MAGIC, ElfExtractor, extract_elf_basics
from bintpl.extractors.manifest import ManifestExtractor

EXTRACTORS = {
    'elf': ElfExtractor,
    'manifest': ManifestExtractor,
}


def get_extractor(kind: str, **config) -> FeatureExtractor:
    """Create an extractor by name.

    Args:
        kind: Extractor name ('elf', 'manifest')
        **config: Extractor-specific configuration

    Returns:
        FeatureExtractor instance

    Raises:
        ValueError: If kind is unknown
    """
    if kind.lower() not in EXTRACTORS:
        raise ValueError(
            f"Unknown extractor: {kind}. "
            f"Available: {', '.join(EXTRACTORS.keys())}"
        )
    return EXTRACTORS[kind.lower()](**config)


def detect_kind(path: Union[str, Path]) -> str:
    """Infer the extractor for a file: '.json' is a manifest, ELF magic is ELF.

    Raises:
        ValueError: If the file is neither
    """
    path = Path(path)
    if path.suffix.lower() == '.json':
        return 'manifest'
    with open(path, 'rb') as f:
        if f.read(4) == ELF_MAGIC:
            return 'elf'
    raise ValueError(f"Cannot infer input kind of {path}: not a .json manifest or an ELF file")


__all__ = [
    "FeatureExtractor",
    "ElfExtractor",
    "ManifestExtractor",
    "extract_elf_basics",
    "get_extractor",
    "detect_kind",
]
