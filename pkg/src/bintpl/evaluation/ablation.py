"""Ablation runner: the same targets and database under different pipeline variants."""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from bintpl.config import Config
from bintpl.detection import Detector
from bintpl.embedding.model import EmbeddingModel, FunctionVector
from bintpl.evaluation.corpus import Corpus, TargetTruth
from bintpl.evaluation.metrics import Prf1, VersionMetrics, micro_prf1, recall_at_k, version_metrics
from bintpl.featuredb import TplDatabase
from bintpl.features import BinaryFeatureSet
from bintpl.reporting import build_report

logger = logging.getLogger(__name__)

# variant -> (channels, FCG filter, basic-feature matching)
VARIANTS: Dict[str, Tuple[str, bool, str]] = {
    "base": ("basic", False, "vanilla"),
    "base+fcg": ("basic", True, "vanilla"),
    "basic-only": ("basic", False, "rules"),
    "basic+fcg": ("basic", True, "rules"),
    "fr-only": ("fr", False, "rules"),
    "fr+fcg": ("fr", True, "rules"),
    "full": ("both", True, "rules"),
    "full-minus-fcg": ("both", False, "rules"),
}
VARIANT_ALIASES = {"full−fcg": "full-minus-fcg", "full-fcg": "full-minus-fcg"}

RECALL_KS = (10, 20, 50, 100)


def canonical_variant(name: str) -> str:
    """Resolve a variant name or alias.

    Raises:
        ValueError: For an unknown variant
    """
    name = VARIANT_ALIASES.get(name, name)
    if name not in VARIANTS:
        raise ValueError(f"Unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return name


def variant_config(config: Config, variant: str) -> Config:
    channels, use_filter, matching = VARIANTS[canonical_variant(variant)]
    return config.model_copy(
        update={"channels": channels, "use_fcg_filter": use_filter, "basic_matching": matching}
    )


def variant_needs_model(variant: str) -> bool:
    channels, use_filter, _ = VARIANTS[canonical_variant(variant)]
    return channels != "basic" or use_filter


@dataclass
class VariantResult:
    """Pooled detection and version metrics of one variant."""
    variant: str
    detection: Prf1
    versions: VersionMetrics
    targets: int
    seconds: float = 0.0

    def as_row(self) -> Dict[str, object]:
        return {
            "variant": self.variant,
            "targets": self.targets,
            "precision": round(self.detection.precision, 6),
            "recall": round(self.detection.recall, 6),
            "f1": round(self.detection.f1, 6),
            "true_positives": self.detection.true_positives,
            "reported": self.detection.reported,
            "expected": self.detection.expected,
            "version_precision": round(self.versions.version_precision, 6),
            "mean_version_distance": round(self.versions.mean_distance, 6),
        }


@dataclass
class EvaluationResult:
    variants: List[VariantResult] = field(default_factory=list)
    recall_at_k: Dict[int, float] = field(default_factory=dict)


def evaluate_variant(
    variant: str,
    db: TplDatabase,
    model: Optional[EmbeddingModel],
    targets: Sequence[BinaryFeatureSet],
    truth: Dict[str, TargetTruth],
    config: Config,
    target_vectors: Optional[Dict[str, List[FunctionVector]]] = None,
) -> VariantResult:
    """Detect every target with one variant and pool the metrics."""
    variant = canonical_variant(variant)
    detector = Detector(db, model if variant_needs_model(variant) else None, variant_config(config, variant))
    start = time.perf_counter()
    detections, identifications = [], []
    for target in targets:
        vectors = target_vectors.get(target.binary_id) if target_vectors else None
        result = detector.detect(target, vectors)
        report = build_report(target.binary_id, result.candidates)
        expected = truth[target.binary_id].libraries
        detections.append((report.library_ids(), expected.keys()))
        identifications.append((report.versions(), expected))
    seconds = time.perf_counter() - start

    outcome = VariantResult(
        variant=variant,
        detection=micro_prf1(detections),
        versions=version_metrics(identifications, config.version_distance.as_tuple()),
        targets=len(targets),
        seconds=seconds,
    )
    logger.info(
        f"{variant}: P={outcome.detection.precision:.3f} R={outcome.detection.recall:.3f} "
        f"F1={outcome.detection.f1:.3f} VP={outcome.versions.version_precision:.3f} "
        f"VD={outcome.versions.mean_distance:.3f} ({seconds:.1f}s)"
    )
    return outcome


def run_ablation(
    corpus: Corpus,
    db: TplDatabase,
    model: Optional[EmbeddingModel],
    variants: Sequence[str] = tuple(VARIANTS),
    config: Optional[Config] = None,
    ks: Sequence[int] = RECALL_KS,
) -> EvaluationResult:
    """Metrics of each variant on the corpus targets, plus retrieval recall@K.

    Variants that need an embedding model are skipped (with a warning) when
    model is None.
    """
    config = config or Config()
    variants = [canonical_variant(v) for v in variants]
    result = EvaluationResult()

    vectors: Dict[str, List[FunctionVector]] = {}
    if model is not None:
        embedder = Detector(db, model, config)
        vectors = {t.binary_id: embedder.embed_target(t) for t in corpus.targets}
        queries = []
        for target in corpus.targets:
            origins = corpus.truth[target.binary_id].functions
            for fv in vectors[target.binary_id]:
                if fv.function_id in origins:
                    unit_id, function_id = origins[fv.function_id]
                    queries.append((fv.vector, (function_id, unit_id)))
        result.recall_at_k = recall_at_k(queries, db.vectors, ks)
        logger.info(
            "Retrieval recall: " + ", ".join(f"@{k} {r:.3f}" for k, r in result.recall_at_k.items())
        )

    for variant in variants:
        if model is None and variant_needs_model(variant):
            logger.warning(f"Skipping variant {variant}: it needs an embedding model")
            continue
        result.variants.append(
            evaluate_variant(variant, db, model, corpus.targets, corpus.truth, config, vectors)
        )
    return result
