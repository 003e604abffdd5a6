"""Structure2vec function embedding network.

Each block v starts from state mu_v = 0; T rounds of message passing update

    mu_v <- tanh(W1 x_v + sigma(sum_{u in N(v)} mu_u)),   sigma(l) = P1 relu(P2 l)

where N(v) is the undirected block neighborhood and x_v = log1p(attributes).
The graph vector W2 * sum_v mu_v is L2-normalized, so inner products of
emitted vectors are cosine similarities.

Checkpoint format: a JSON document with format name, format_version, the
dimensions, the seed and every parameter matrix as nested lists. JSON float
text round-trips exactly, so reloads are bit-identical.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from bintpl.errors import ConfigurationError, DegenerateEmbeddingError, ShapeError
from bintpl.features import N_ATTRIBUTES, Acfg

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "bintpl-embedding"
CHECKPOINT_VERSION = 1
PARAMETER_NAMES = ("W1", "P1", "P2", "W2")

# Norms below this are treated as the zero vector.
_ZERO_NORM = 1e-12


def scale_attributes(blocks: np.ndarray) -> np.ndarray:
    """Compress raw block attributes so large instruction counts do not saturate tanh."""
    return np.log1p(blocks)


@dataclass
class EmbeddingModel:
    """Parameters of the embedding network.

    Attributes:
        W1: (p, d) input projection
        P1: (p, p) outer layer of sigma
        P2: (p, p) inner layer of sigma
        W2: (p, p) output aggregation
        iterations: Message-passing rounds T
        seed: Seed the parameters were initialized from
    """
    W1: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    W2: np.ndarray
    iterations: int = 5
    seed: Optional[int] = None

    def __post_init__(self):
        p = self.W1.shape[0]
        expected = {"W1": (p, self.W1.shape[1]), "P1": (p, p), "P2": (p, p), "W2": (p, p)}
        for name, shape in expected.items():
            matrix = np.asarray(getattr(self, name), dtype=np.float64)
            if matrix.shape != shape:
                raise ShapeError(f"{name} has shape {matrix.shape}, expected {shape}")
            if not np.all(np.isfinite(matrix)):
                raise ValueError(f"{name} contains non-finite values")
            setattr(self, name, matrix)
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")

    @classmethod
    def initialize(
        cls,
        embedding_dim: int = 64,
        iterations: int = 5,
        seed: int = 0,
        input_dim: int = N_ATTRIBUTES,
    ) -> "EmbeddingModel":
        """Seeded uniform initialization in [-1/sqrt(p), 1/sqrt(p)]."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(embedding_dim)
        p, d = embedding_dim, input_dim
        return cls(
            W1=rng.uniform(-bound, bound, (p, d)),
            P1=rng.uniform(-bound, bound, (p, p)),
            P2=rng.uniform(-bound, bound, (p, p)),
            W2=rng.uniform(-bound, bound, (p, p)),
            iterations=iterations,
            seed=seed,
        )

    @property
    def embedding_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "EmbeddingModel":
        return EmbeddingModel(
            **{name: np.array(params[name], dtype=np.float64) for name in PARAMETER_NAMES},
            iterations=self.iterations,
            seed=self.seed,
        )

    def copy(self) -> "EmbeddingModel":
        return self.with_parameters(self.parameters())

    def to_document(self) -> Dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "format_version": CHECKPOINT_VERSION,
            "input_dim": self.input_dim,
            "embedding_dim": self.embedding_dim,
            "iterations": self.iterations,
            "attribute_scaling": "log1p",
            "seed": self.seed,
            "parameters": {name: matrix.tolist() for name, matrix in self.parameters().items()},
        }

    def to_bytes(self) -> bytes:
        return (json.dumps(self.to_document(), separators=(",", ":")) + "\n").encode("utf-8")

    def fingerprint(self) -> str:
        """SHA-256 of the checkpoint bytes."""
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.info(f"Saved embedding model to {path} (sha256 {self.fingerprint()[:12]})")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EmbeddingModel":
        """Load a checkpoint.

        Raises:
            FileNotFoundError: If the file does not exist
            ConfigurationError: If the file is not a bintpl checkpoint
        """
        path = Path(path)
        try:
            doc = json.loads(path.read_bytes())
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path} is not a model checkpoint: {e}") from e
        if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
            raise ConfigurationError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
        if doc.get("format_version", 0) > CHECKPOINT_VERSION:
            raise ConfigurationError(
                f"{path} has checkpoint version {doc['format_version']}, "
                f"this bintpl reads up to {CHECKPOINT_VERSION}"
            )
        params = doc["parameters"]
        return cls(
            **{name: np.array(params[name], dtype=np.float64) for name in PARAMETER_NAMES},
            iterations=int(doc["iterations"]),
            seed=doc.get("seed"),
        )


@dataclass
class FunctionVector:
    """L2-normalized embedding of one function of one unit (or target)."""
    function_id: str
    unit_id: str
    vector: np.ndarray


@dataclass
class ForwardCache:
    """Intermediate values of one forward pass, kept for backpropagation."""
    x: np.ndarray
    adjacency: np.ndarray
    states: List[np.ndarray] = field(default_factory=list)
    neighbor_sums: List[np.ndarray] = field(default_factory=list)
    hidden: List[np.ndarray] = field(default_factory=list)
    pooled: Optional[np.ndarray] = None
    graph: Optional[np.ndarray] = None
    norm: float = 0.0
    output: Optional[np.ndarray] = None


def forward(acfg: Acfg, model: EmbeddingModel) -> ForwardCache:
    """Run the network on one Acfg.

    Raises:
        ShapeError: If the block attribute count does not match the model
        DegenerateEmbeddingError: If the graph vector is zero
    """
    if acfg.blocks.shape[1] != model.input_dim:
        raise ShapeError(
            f"Function {acfg.function_id!r} has {acfg.blocks.shape[1]} attributes, "
            f"model expects {model.input_dim}"
        )
    if acfg.block_count < 1:
        raise ShapeError(f"Function {acfg.function_id!r} has no blocks")

    x = scale_attributes(acfg.blocks)
    cache = ForwardCache(x=x, adjacency=acfg.undirected_adjacency())
    projected = x @ model.W1.T
    mu = np.zeros((acfg.block_count, model.embedding_dim))
    cache.states.append(mu)
    for _ in range(model.iterations):
        sums = cache.adjacency @ mu
        hidden = sums @ model.P2.T
        mu = np.tanh(projected + np.maximum(hidden, 0.0) @ model.P1.T)
        cache.neighbor_sums.append(sums)
        cache.hidden.append(hidden)
        cache.states.append(mu)

    cache.pooled = mu.sum(axis=0)
    cache.graph = model.W2 @ cache.pooled
    cache.norm = float(np.linalg.norm(cache.graph))
    if cache.norm < _ZERO_NORM:
        raise DegenerateEmbeddingError(acfg.function_id)
    cache.output = cache.graph / cache.norm
    return cache


def backward(cache: ForwardCache, model: EmbeddingModel, d_output: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradient of a scalar w.r.t. every parameter, given its gradient w.r.t. the output vector."""
    grads = {name: np.zeros_like(matrix) for name, matrix in model.parameters().items()}

    y = cache.output
    d_graph = (d_output - y * (y @ d_output)) / cache.norm
    grads["W2"] += np.outer(d_graph, cache.pooled)
    d_mu = np.broadcast_to(model.W2.T @ d_graph, cache.states[-1].shape).copy()

    for t in range(model.iterations, 0, -1):
        mu = cache.states[t]
        d_pre = d_mu * (1.0 - mu * mu)
        grads["W1"] += d_pre.T @ cache.x
        hidden = cache.hidden[t - 1]
        activated = np.maximum(hidden, 0.0)
        grads["P1"] += d_pre.T @ activated
        d_hidden = (d_pre @ model.P1) * (hidden > 0.0)
        grads["P2"] += d_hidden.T @ cache.neighbor_sums[t - 1]
        d_mu = cache.adjacency.T @ (d_hidden @ model.P2)

    return grads


def embed_acfg(acfg: Acfg, model: EmbeddingModel, unit_id: str = "") -> FunctionVector:
    """Embed one Acfg as a unit-norm FunctionVector.

    Raises:
        ShapeError: If the attribute count does not match the model
        DegenerateEmbeddingError: If the graph vector is zero (e.g. T = 0)
    """
    cache = forward(acfg, model)
    return FunctionVector(acfg.function_id, unit_id, cache.output)


def embed_functions(
    acfgs: List[Acfg],
    model: EmbeddingModel,
    unit_id: str = "",
) -> List[FunctionVector]:
    """Embed many Acfgs, skipping (and logging) degenerate ones."""
    vectors = []
    for acfg in acfgs:
        try:
            vectors.append(embed_acfg(acfg, model, unit_id))
        except DegenerateEmbeddingError as e:
            logger.warning(f"{unit_id or 'target'}: {e}; function skipped")
    return vectors
