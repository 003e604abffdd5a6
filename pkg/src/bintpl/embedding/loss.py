"""Contrastive objective of the Siamese embedding network.

For a pair with label Y in {+1, -1} and cosine S of the two embeddings:

    loss = 1/2 (1 + Y) (1 - S)^2 + 1/2 (1 - Y) (1 + S)^2

Similar pairs are pulled toward S = 1, dissimilar pairs toward S = -1.
Each pair contributes a value in [0, 4].
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from bintpl.embedding.model import EmbeddingModel, backward, forward
from bintpl.errors import DomainError
from bintpl.features import Acfg


@dataclass(frozen=True)
class TrainingPair:
    """Two functions and whether they compile from the same source (+1) or not (-1)."""
    acfg_a: Acfg
    acfg_b: Acfg
    label: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise ValueError(f"Pair label must be +1 or -1, got {self.label}")


def cosine(v1: np.ndarray, v2: np.ndarray) -> float:
    """Cosine similarity, clipped to [-1, 1].

    Raises:
        DomainError: If either vector is zero
    """
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        raise DomainError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(v1, v2) / (n1 * n2), -1.0, 1.0))


def pair_loss(similarity: float, label: int) -> float:
    """Loss contribution of one pair given its cosine."""
    return 0.5 * (1 + label) * (1 - similarity) ** 2 + 0.5 * (1 - label) * (1 + similarity) ** 2


def _pair_loss_slope(similarity: float, label: int) -> float:
    return -(1 + label) * (1 - similarity) + (1 - label) * (1 + similarity)


def contrastive_loss(pairs: Sequence[TrainingPair], model: EmbeddingModel) -> float:
    """Sum of pair losses.

    Raises:
        ValueError: If pairs is empty
        DegenerateEmbeddingError: If a function embeds to the zero vector
    """
    if not pairs:
        raise ValueError("contrastive_loss needs at least one pair")
    total = 0.0
    for pair in pairs:
        ya = forward(pair.acfg_a, model).output
        yb = forward(pair.acfg_b, model).output
        total += pair_loss(float(ya @ yb), pair.label)
    return total


def loss_and_gradient(
    pairs: Sequence[TrainingPair],
    model: EmbeddingModel,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Contrastive loss and its exact gradient w.r.t. every parameter matrix."""
    if not pairs:
        raise ValueError("loss_gradient needs at least one pair")
    grads = {name: np.zeros_like(matrix) for name, matrix in model.parameters().items()}
    total = 0.0
    for pair in pairs:
        cache_a = forward(pair.acfg_a, model)
        cache_b = forward(pair.acfg_b, model)
        ya, yb = cache_a.output, cache_b.output
        similarity = float(ya @ yb)
        total += pair_loss(similarity, pair.label)

        slope = _pair_loss_slope(similarity, pair.label)
        if slope == 0.0:
            continue
        for cache, other in ((cache_a, yb), (cache_b, ya)):
            for name, grad in backward(cache, model, slope * other).items():
                grads[name] += grad
    return total, grads


def loss_gradient(pairs: Sequence[TrainingPair], model: EmbeddingModel) -> Dict[str, np.ndarray]:
    """Exact gradient of contrastive_loss, keyed like model.parameters()."""
    return loss_and_gradient(pairs, model)[1]
