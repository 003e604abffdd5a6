"""Training loop for the embedding network.

Adam over shuffled minibatches with a held-out validation split; the
parameters with the lowest validation loss are returned. Everything random
draws from one seeded generator, so equal seeds give bit-identical models.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bintpl.config import EmbeddingConfig
from bintpl.embedding.loss import TrainingPair, contrastive_loss, loss_and_gradient
from bintpl.embedding.model import EmbeddingModel
from bintpl.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class TrainingHistory:
    """Per-epoch mean losses and the epoch whose parameters were kept."""
    train_loss: List[float] = field(default_factory=list)
    validation_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1


class AdamOptimizer:
    """Adaptive per-parameter step sizes."""

    def __init__(
        self,
        params: Dict[str, np.ndarray],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        self.step_count += 1
        t = self.step_count
        updated = {}
        for name, param in params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** t)
            v_hat = self.v[name] / (1 - self.beta2 ** t)
            updated[name] = param - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def split_pairs(
    pairs: Sequence[TrainingPair],
    validation_fraction: float,
    rng: np.random.Generator,
) -> Tuple[List[TrainingPair], List[TrainingPair]]:
    """Shuffle and split pairs into (train, validation)."""
    order = rng.permutation(len(pairs))
    n_val = max(1, int(round(len(pairs) * validation_fraction)))
    if n_val >= len(pairs):
        raise ConfigurationError(f"{len(pairs)} pairs leave nothing to train on after the validation split")
    validation = [pairs[i] for i in order[:n_val]]
    training = [pairs[i] for i in order[n_val:]]
    return training, validation


def _check_labels(pairs: Sequence[TrainingPair]) -> None:
    labels = {pair.label for pair in pairs}
    if labels != {1, -1}:
        raise ConfigurationError(
            f"Training data needs both similar (+1) and dissimilar (-1) pairs, got labels {sorted(labels)}"
        )


def train_with_history(
    pairs: Sequence[TrainingPair],
    config: Optional[EmbeddingConfig] = None,
    seed: int = 0,
    validation_pairs: Optional[Sequence[TrainingPair]] = None,
) -> Tuple[EmbeddingModel, TrainingHistory]:
    """Train a model and return it with its loss history.

    Args:
        pairs: Labelled training pairs
        config: Dimensions and hyperparameters
        seed: Seed for initialization, shuffling and the validation split
        validation_pairs: Held-out pairs; split from pairs when None

    Returns:
        (model with the best validation loss, history)

    Raises:
        ConfigurationError: If the pairs do not contain both labels
    """
    config = config or EmbeddingConfig()
    if not pairs:
        raise ConfigurationError("Training data is empty")
    _check_labels(pairs)

    rng = np.random.default_rng(seed)
    if validation_pairs is None:
        training, validation = split_pairs(pairs, config.validation_fraction, rng)
    else:
        training, validation = list(pairs), list(validation_pairs)

    model = EmbeddingModel.initialize(config.embedding_dim, config.iterations, seed=seed)
    optimizer = AdamOptimizer(model.parameters(), learning_rate=config.learning_rate)
    history = TrainingHistory()
    best_model = model.copy()
    best_loss = contrastive_loss(validation, model) / len(validation)

    logger.info(
        f"Training on {len(training)} pairs ({len(validation)} held out), "
        f"p={config.embedding_dim}, T={config.iterations}, {config.epochs} epochs"
    )

    for epoch in range(config.epochs):
        order = rng.permutation(len(training))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [training[i] for i in order[start:start + config.batch_size]]
            loss, grads = loss_and_gradient(batch, model)
            epoch_loss += loss
            mean_grads = {name: g / len(batch) for name, g in grads.items()}
            model = model.with_parameters(optimizer.step(model.parameters(), mean_grads))

        val_loss = contrastive_loss(validation, model) / len(validation)
        history.train_loss.append(epoch_loss / len(training))
        history.validation_loss.append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_model = model.copy()
            history.best_epoch = epoch
        logger.info(
            f"  epoch {epoch + 1}/{config.epochs}: train {history.train_loss[-1]:.4f}, "
            f"validation {val_loss:.4f}"
        )

    logger.info(f"Best validation loss {best_loss:.4f} (epoch {history.best_epoch + 1})")
    return best_model, history


def train(
    pairs: Sequence[TrainingPair],
    config: Optional[EmbeddingConfig] = None,
    seed: int = 0,
) -> EmbeddingModel:
    """Train a model; see train_with_history."""
    return train_with_history(pairs, config, seed)[0]
