"""Detection, version and retrieval metrics."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np
from scipy.stats import mannwhitneyu

from bintpl.embedding.loss import TrainingPair
from bintpl.embedding.model import EmbeddingModel, embed_acfg
from bintpl.featuredb.vectors import VectorStore
from bintpl.versions import DEFAULT_DISTANCE_COEFFICIENTS, version_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prf1:
    """Precision, recall and F1 with flags for undefined cases.

    precision_undefined: nothing was reported (precision reported as 0)
    vacuous: nothing was reported and nothing was expected (F1 undefined, reported as 0)
    """
    precision: float
    recall: float
    f1: float
    true_positives: int = 0
    reported: int = 0
    expected: int = 0
    precision_undefined: bool = False
    vacuous: bool = False


def _prf1_from_counts(tp: int, reported: int, expected: int) -> Prf1:
    precision_undefined = reported == 0
    vacuous = reported == 0 and expected == 0
    precision = tp / reported if reported else 0.0
    recall = tp / expected if expected else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Prf1(precision, recall, f1, tp, reported, expected, precision_undefined, vacuous)


def prf1(reported: Iterable, truth: Iterable) -> Prf1:
    """Library-level precision, recall and F1 of one target.

    P = correct / reported, R = correct / expected, F1 = 2PR / (P + R).
    Each library counts once.
    """
    reported, truth = set(reported), set(truth)
    return _prf1_from_counts(len(reported & truth), len(reported), len(truth))


def micro_prf1(results: Iterable[Tuple[Iterable, Iterable]]) -> Prf1:
    """Precision, recall and F1 pooled over many (reported, truth) targets."""
    tp = reported = expected = 0
    for r, t in results:
        r, t = set(r), set(t)
        tp += len(r & t)
        reported += len(r)
        expected += len(t)
    return _prf1_from_counts(tp, reported, expected)


@dataclass(frozen=True)
class VersionMetrics:
    """Exact-version rate and mean version distance over true-positive libraries."""
    version_precision: float
    mean_distance: float
    true_positives: int


def version_metrics(
    results: Iterable[Tuple[Mapping[str, str], Mapping[str, str]]],
    coefficients: Tuple[float, float, float] = DEFAULT_DISTANCE_COEFFICIENTS,
) -> VersionMetrics:
    """VP and mean VD over every true-positive library of every target.

    Args:
        results: (identified library -> version, true library -> version) per target
        coefficients: Version distance weights

    Returns:
        VersionMetrics; both rates are 0 when there are no true positives
    """
    exact, distances = 0, []
    for identified, truth in results:
        for library in sorted(set(identified) & set(truth)):
            distance = version_distance(identified[library], truth[library], coefficients)
            distances.append(distance)
            exact += int(distance == 0.0)
    if not distances:
        return VersionMetrics(0.0, 0.0, 0)
    return VersionMetrics(exact / len(distances), float(np.mean(distances)), len(distances))


def recall_at_k(
    queries: Sequence[Tuple[np.ndarray, Tuple[str, str]]],
    store: VectorStore,
    ks: Sequence[int] = (10, 20, 50, 100),
) -> Dict[int, float]:
    """Fraction of queries whose counterpart is among their top-K neighbors.

    Args:
        queries: (unit-norm query vector, (function id, unit id) of its counterpart)
        store: Vector store holding the counterparts
        ks: K values

    Returns:
        K -> recall; 0 for every K when there are no queries
    """
    ks = sorted(set(ks))
    if not queries:
        return {k: 0.0 for k in ks}
    found = {k: 0 for k in ks}
    largest = ks[-1]
    for vector, counterpart in queries:
        ranked = [(f, u) for f, u, _ in store.topk(vector, largest)]
        position = ranked.index(counterpart) if counterpart in ranked else None
        for k in ks:
            if position is not None and position < k:
                found[k] += 1
    return {k: found[k] / len(queries) for k in ks}


@dataclass(frozen=True)
class PairMetrics:
    """How well cosine separates similar from dissimilar pairs."""
    auc: float
    accuracy: float
    recall: float
    pairs: int


def pair_similarities(model: EmbeddingModel, pairs: Sequence[TrainingPair]) -> Tuple[np.ndarray, np.ndarray]:
    """Cosine and label of every pair."""
    scores = np.array([
        float(embed_acfg(p.acfg_a, model).vector @ embed_acfg(p.acfg_b, model).vector)
        for p in pairs
    ])
    labels = np.array([p.label for p in pairs])
    return scores, labels


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve from the Mann-Whitney U statistic.

    Raises:
        ValueError: If either class is missing
    """
    positive, negative = scores[labels == 1], scores[labels == -1]
    if len(positive) == 0 or len(negative) == 0:
        raise ValueError("AUC needs both similar and dissimilar pairs")
    statistic, _ = mannwhitneyu(positive, negative, alternative="two-sided")
    return float(statistic / (len(positive) * len(negative)))


def pair_metrics(model: EmbeddingModel, pairs: Sequence[TrainingPair], threshold: float = 0.8) -> PairMetrics:
    """AUC, accuracy and similar-pair recall when pairs are called similar above threshold."""
    scores, labels = pair_similarities(model, pairs)
    predicted = np.where(scores > threshold, 1, -1)
    positives = labels == 1
    recall = float(np.mean(predicted[positives] == 1)) if positives.any() else 0.0
    return PairMetrics(
        auc=auc_score(scores, labels),
        accuracy=float(np.mean(predicted == labels)),
        recall=recall,
        pairs=len(pairs),
    )
