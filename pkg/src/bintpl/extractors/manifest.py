"""Feature manifest extractor for bintpl.

Manifests carry full function detail (ACFGs and the FCG) produced by an
external disassembler or by the synthetic corpus generator.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional, Union

from bintpl.errors import ConfigurationError
from bintpl.extractors.base import FeatureExtractor
from bintpl.features import BinaryFeatureSet
from bintpl.formats.manifest import load_manifest

logger = logging.getLogger(__name__)


class ManifestExtractor(FeatureExtractor):
    """Extractor reading JSON feature manifests.

    Provenance given to extract() must agree with the manifest's own
    library/version fields when both are present.
    """

    def __init__(
        self,
        min_length: int = 5,
        weight_cap: float = 50.0,
        special_multiplier: float = 2.0,
        **kwargs
    ):
        super().__init__(
            min_length=min_length,
            weight_cap=weight_cap,
            special_multiplier=special_multiplier,
            **kwargs
        )
        self.min_length = min_length
        self.weight_cap = weight_cap
        self.special_multiplier = special_multiplier

    def get_name(self) -> str:
        return "manifest"

    def get_version(self) -> str:
        return "1"

    def extract(
        self,
        path: Union[str, Path],
        binary_id: Optional[str] = None,
        library: Optional[str] = None,
        version: Optional[str] = None,
    ) -> BinaryFeatureSet:
        feature_set = load_manifest(
            path,
            min_length=self.min_length,
            weight_cap=self.weight_cap,
            special_multiplier=self.special_multiplier,
        )
        for field, given in (("library", library), ("version", version)):
            embedded = getattr(feature_set, field)
            if given is not None and embedded not in (None, given):
                raise ConfigurationError(f"{path}: manifest says {field} {embedded!r}, caller says {given!r}")
        if binary_id or (library and feature_set.library is None):
            feature_set = replace(
                feature_set,
                binary_id=binary_id or feature_set.binary_id,
                library=feature_set.library or library,
                version=feature_set.version or version,
            )
        logger.debug(
            f"{Path(path).name}: {len(feature_set.strings)} strings, "
            f"{len(feature_set.exports)} exports, {len(feature_set.acfgs)} functions"
        )
        return feature_set
