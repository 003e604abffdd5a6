"""End-to-end detection of one target against a TPL database."""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

from bintpl.config import Config
from bintpl.detection.basic import match_basic
from bintpl.detection.candidates import Candidate, merge_candidates
from bintpl.detection.fcg import fcg_filter
from bintpl.detection.retrieval import retrieve_candidates
from bintpl.embedding.model import EmbeddingModel, FunctionVector, embed_functions
from bintpl.errors import ConfigurationError
from bintpl.featuredb import TplDatabase
from bintpl.features import BinaryFeatureSet, embeddable_functions

logger = logging.getLogger(__name__)


@dataclass
class DetectionResult:
    """Final candidates of one target plus the per-channel intermediates."""
    target_id: str
    candidates: List[Candidate]
    channel_a: List[Candidate] = field(default_factory=list)
    channel_b: List[Candidate] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)


@contextmanager
def _stage(timings: Dict[str, float], name: str) -> Iterator[None]:
    start = time.perf_counter()
    yield
    timings[name] = time.perf_counter() - start


class Detector:
    """Runs the enabled channels and the FCG filter over one immutable database.

    Args:
        db: Loaded TPL database
        model: Embedding model; required for channel B and for the FCG filter
        config: Pipeline configuration (channels, filter switch, thresholds)

    Raises:
        ConfigurationError: If channel B is enabled without a model
    """

    def __init__(self, db: TplDatabase, model: Optional[EmbeddingModel] = None, config: Optional[Config] = None):
        self.db = db
        self.model = model
        self.config = config or Config()
        self.use_basic = self.config.channels in ("basic", "both")
        self.use_retrieval = self.config.channels in ("fr", "both")
        self.use_filter = self.config.use_fcg_filter
        if self.config.basic_matching == "vanilla":
            self.basic_rules = self.config.vanilla_rules
        else:
            self.basic_rules = self.config.basic_rules

        if self.use_retrieval and model is None:
            raise ConfigurationError("Function retrieval is enabled but no embedding model was given")
        if model is None and self.use_filter:
            logger.warning("No embedding model: FCG filter disabled, reporting basic-feature candidates")
            self.use_filter = False
        if model is not None and db.model_fingerprint and model.fingerprint() != db.model_fingerprint:
            logger.warning(
                "Embedding model differs from the one used to build the database; "
                "function similarities will be unreliable"
            )

    def embed_target(self, target: BinaryFeatureSet) -> List[FunctionVector]:
        if self.model is None:
            return []
        return embed_functions(embeddable_functions(target), self.model)

    def detect(self, target: BinaryFeatureSet, vectors: Optional[List[FunctionVector]] = None) -> DetectionResult:
        """Final candidates for target.

        vectors may carry the target's precomputed function vectors.
        """
        timings: Dict[str, float] = {}
        retrieval = self.config.retrieval

        if vectors is None:
            with _stage(timings, "embedding"):
                vectors = self.embed_target(target) if (self.use_retrieval or self.use_filter) else []

        channel_a: List[Candidate] = []
        channel_b: List[Candidate] = []
        if self.use_basic:
            with _stage(timings, "channel_a"):
                channel_a = match_basic(target, self.db, self.basic_rules)
        if self.use_retrieval:
            with _stage(timings, "channel_b"):
                channel_b = retrieve_candidates(vectors, self.db, retrieval)

        with _stage(timings, "filter"):
            if self.use_filter:
                final = fcg_filter(channel_a + channel_b, target, vectors, self.db, retrieval, self.config.workers)
            else:
                final = merge_candidates(c for c in channel_a + channel_b if c.score > 0)

        logger.info(
            f"{target.binary_id}: {len(channel_a)} + {len(channel_b)} candidates, {len(final)} final; "
            + ", ".join(f"{name} {seconds:.3f}s" for name, seconds in timings.items())
        )
        return DetectionResult(target.binary_id, final, channel_a, channel_b, timings)
