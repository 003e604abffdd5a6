"""Function embedding: Structure2vec in a Siamese setup with a contrastive loss."""

from bintpl.embedding.loss import (
    TrainingPair,
    contrastive_loss,
    cosine,
    loss_and_gradient,
    loss_gradient,
    pair_loss,
)
from bintpl.embedding.model import (
    EmbeddingModel,
    FunctionVector,
    embed_acfg,
    embed_functions,
)
from bintpl.embedding.train import TrainingHistory, train, train_with_history

__all__ = [
    "EmbeddingModel",
    "FunctionVector",
    "TrainingPair",
    "TrainingHistory",
    "embed_acfg",
    "embed_functions",
    "cosine",
    "pair_loss",
    "contrastive_loss",
    "loss_gradient",
    "loss_and_gradient",
    "train",
    "train_with_history",
]
