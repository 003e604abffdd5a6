"""Metrics, synthetic corpus generation and the ablation runner."""

from bintpl.evaluation.ablation import (
    VARIANTS,
    EvaluationResult,
    VariantResult,
    canonical_variant,
    evaluate_variant,
    run_ablation,
)
from bintpl.evaluation.corpus import (
    Corpus,
    CorpusSpec,
    TargetTruth,
    build_training_pairs,
    generate_corpus,
    load_corpus,
    load_ground_truth,
    perturb_acfg,
    random_acfg,
    write_corpus,
)
from bintpl.evaluation.metrics import (
    PairMetrics,
    Prf1,
    VersionMetrics,
    auc_score,
    micro_prf1,
    pair_metrics,
    prf1,
    recall_at_k,
    version_metrics,
)

__all__ = [
    "VARIANTS",
    "Corpus",
    "CorpusSpec",
    "EvaluationResult",
    "PairMetrics",
    "Prf1",
    "TargetTruth",
    "VariantResult",
    "VersionMetrics",
    "auc_score",
    "build_training_pairs",
    "canonical_variant",
    "evaluate_variant",
    "generate_corpus",
    "load_corpus",
    "load_ground_truth",
    "micro_prf1",
    "pair_metrics",
    "perturb_acfg",
    "prf1",
    "random_acfg",
    "recall_at_k",
    "run_ablation",
    "version_metrics",
    "write_corpus",
]
