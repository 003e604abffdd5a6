"""bintpl: third-party library detection for native binaries.

Libraries packaged into a binary are found through two candidate channels
(basic features: string literals and exported names; function retrieval:
Structure2vec embeddings of attributed CFGs) and confirmed by comparing
function-call graphs. Versions are identified from the surviving candidates.

Usage:
    # Build a database from <library>/<version>/<binary> files
    bintpl db build libs/ tpl.db --model model.json

    # Scan a target
    bintpl scan app --db tpl.db --model model.json
"""

__version__ = "0.1.0"

from bintpl.config import Config, load_config
from bintpl.detection import Detector
from bintpl.embedding import EmbeddingModel
from bintpl.extractors import FeatureExtractor, get_extractor
from bintpl.featuredb import TplDatabase
from bintpl.features import Acfg, BinaryFeatureSet, Fcg
from bintpl.formats import load_manifest, write_manifest
from bintpl.reporting import DetectionReport, build_report

__all__ = [
    "Acfg",
    "BinaryFeatureSet",
    "Config",
    "DetectionReport",
    "Detector",
    "EmbeddingModel",
    "Fcg",
    "FeatureExtractor",
    "TplDatabase",
    "build_report",
    "get_extractor",
    "load_config",
    "load_manifest",
    "write_manifest",
]
