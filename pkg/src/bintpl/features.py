"""Feature types shared by every stage of the pipeline.

A BinaryFeatureSet holds everything known about one binary: its string
literals, exported function names, one attributed control-flow graph (Acfg)
per function and the function-call graph (Fcg). Database units and detection
targets use the same type; only units carry provenance.

Block attribute order (part of the manifest contract):
    0 string_constants       count of string constants referenced
    1 numeric_constants      count of numeric constants
    2 transfer_instructions  count of control-transfer instructions
    3 call_instructions      count of call instructions
    4 instructions           total instruction count
    5 arithmetic_instructions count of arithmetic instructions
    6 offspring              number of blocks reachable from the block
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from bintpl.errors import IntegrityError, ShapeError

logger = logging.getLogger(__name__)

ATTRIBUTE_NAMES: Tuple[str, ...] = (
    "string_constants",
    "numeric_constants",
    "transfer_instructions",
    "call_instructions",
    "instructions",
    "arithmetic_instructions",
    "offspring",
)
N_ATTRIBUTES = len(ATTRIBUTE_NAMES)
OFFSPRING_INDEX = ATTRIBUTE_NAMES.index("offspring")

# Functions with fewer blocks carry too little structure to embed.
MIN_EMBEDDABLE_BLOCKS = 5

SPECIAL_STRING_MARKERS = ("://", "/", "\\")


def string_weight(value: str, cap: float = 50.0, special_multiplier: float = 2.0) -> float:
    """Weight of a string literal for basic-feature matching.

    Long strings are rarer than short ones up to a cap; links and paths
    count double.
    """
    weight = float(min(len(value), cap))
    if any(marker in value for marker in SPECIAL_STRING_MARKERS):
        weight *= special_multiplier
    return weight


@dataclass(frozen=True, order=True)
class StringLiteral:
    """A string literal found in a binary. Identity is the text alone."""
    value: str
    weight: float = field(default=1.0, compare=False)

    def __post_init__(self):
        if "\x00" in self.value:
            raise ValueError(f"String literal contains NUL: {self.value!r}")
        if not self.weight > 0:
            raise ValueError(f"String weight must be positive, got {self.weight}")


@dataclass(frozen=True, order=True)
class ExportedName:
    """A globally visible function symbol."""
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("Exported name must be nonempty")


def compute_offspring(edges: Iterable[Tuple[int, int]], block_count: int) -> List[int]:
    """Count the blocks reachable from each block along directed edges.

    A block only counts itself when it lies on a cycle through itself
    (including a self-loop).

    Args:
        edges: Directed (src, dst) block-index pairs
        block_count: Number of blocks

    Returns:
        Offspring count per block, indexed by block
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(range(block_count))
    graph.add_edges_from(edges)

    counts = []
    for block in range(block_count):
        reachable = nx.descendants(graph, block)
        on_cycle = graph.has_edge(block, block) or any(
            pred in reachable for pred in graph.predecessors(block)
        )
        counts.append(len(reachable) + int(on_cycle))
    return counts


@dataclass(eq=False)
class Acfg:
    """Attributed control-flow graph of one function.

    Attributes:
        function_id: Function identifier, unique within its binary
        blocks: (block_count, 7) array of non-negative block attributes
        edges: Sorted, deduplicated directed block-index pairs
    """
    function_id: str
    blocks: np.ndarray
    edges: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=np.float64)
        if blocks.size == 0:
            blocks = blocks.reshape(0, N_ATTRIBUTES)
        if blocks.ndim != 2 or blocks.shape[1] != N_ATTRIBUTES:
            raise ShapeError(
                f"Function {self.function_id!r}: blocks must have shape (n, {N_ATTRIBUTES}), "
                f"got {blocks.shape}"
            )
        if not np.all(np.isfinite(blocks)) or np.any(blocks < 0):
            raise ValueError(f"Function {self.function_id!r}: block attributes must be finite and >= 0")
        blocks.setflags(write=False)
        self.blocks = blocks

        n = blocks.shape[0]
        edges = set()
        for src, dst in self.edges:
            src, dst = int(src), int(dst)
            if not (0 <= src < n and 0 <= dst < n):
                raise IntegrityError(
                    f"Function {self.function_id!r}: edge ({src}, {dst}) outside {n} blocks"
                )
            edges.add((src, dst))
        self.edges = tuple(sorted(edges))

    @property
    def block_count(self) -> int:
        return self.blocks.shape[0]

    @classmethod
    def from_attributes(
        cls,
        function_id: str,
        blocks: Sequence[Sequence[float]],
        edges: Iterable[Tuple[int, int]],
    ) -> "Acfg":
        """Build an Acfg from six raw attributes per block, computing offspring."""
        edges = list(edges)
        raw = np.asarray(blocks, dtype=np.float64).reshape(-1, N_ATTRIBUTES - 1)
        offspring = np.asarray(compute_offspring(edges, raw.shape[0]), dtype=np.float64)
        full = np.insert(raw, OFFSPRING_INDEX, offspring, axis=1)
        return cls(function_id, full, tuple(edges))

    def undirected_adjacency(self) -> np.ndarray:
        """Symmetric 0/1 block adjacency without self-loops."""
        n = self.block_count
        adjacency = np.zeros((n, n), dtype=np.float64)
        for src, dst in self.edges:
            if src != dst:
                adjacency[src, dst] = 1.0
                adjacency[dst, src] = 1.0
        return adjacency

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Acfg):
            return NotImplemented
        return (
            self.function_id == other.function_id
            and self.edges == other.edges
            and np.array_equal(self.blocks, other.blocks)
        )


@dataclass(eq=True)
class Fcg:
    """Function-call graph: caller -> callee edges between function ids."""
    nodes: Tuple[str, ...] = ()
    edges: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes)))
        known = set(nodes)
        edges = set()
        for caller, callee in self.edges:
            for endpoint in (caller, callee):
                if endpoint not in known:
                    raise IntegrityError(f"FCG edge ({caller!r}, {callee!r}) references undeclared function {endpoint!r}")
            edges.add((caller, callee))
        self.nodes = nodes
        self.edges = tuple(sorted(edges))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.edges)
        return graph


@dataclass(eq=True)
class BinaryFeatureSet:
    """All features of one binary.

    Attributes:
        binary_id: Identifier of the binary
        strings: String literals (unique by text)
        exports: Exported function names
        acfgs: Function id -> Acfg
        fcg: Function-call graph; contains every function in acfgs
        library: Library id when this is a database unit
        version: Version text when this is a database unit
    """
    binary_id: str
    strings: FrozenSet[StringLiteral] = frozenset()
    exports: FrozenSet[ExportedName] = frozenset()
    acfgs: Dict[str, Acfg] = field(default_factory=dict)
    fcg: Fcg = field(default_factory=Fcg)
    library: Optional[str] = None
    version: Optional[str] = None

    def __post_init__(self):
        self.strings = frozenset(self.strings)
        self.exports = frozenset(self.exports)
        known = set(self.fcg.nodes)
        for function_id, acfg in self.acfgs.items():
            if acfg.function_id != function_id:
                raise IntegrityError(
                    f"{self.binary_id}: acfg keyed {function_id!r} has id {acfg.function_id!r}"
                )
            if function_id not in known:
                raise IntegrityError(f"{self.binary_id}: function {function_id!r} missing from FCG nodes")
        if (self.library is None) != (self.version is None):
            raise IntegrityError(f"{self.binary_id}: library and version must be given together")

    @property
    def provenance(self) -> Optional[Tuple[str, str]]:
        if self.library is None or self.version is None:
            return None
        return (self.library, self.version)

    @property
    def string_values(self) -> FrozenSet[str]:
        return frozenset(s.value for s in self.strings)

    @property
    def export_names(self) -> FrozenSet[str]:
        return frozenset(e.name for e in self.exports)


def embeddable_functions(
    feature_set: BinaryFeatureSet,
    min_blocks: int = MIN_EMBEDDABLE_BLOCKS,
) -> List[Acfg]:
    """Acfgs with at least min_blocks blocks, sorted by function id."""
    return [
        feature_set.acfgs[function_id]
        for function_id in sorted(feature_set.acfgs)
        if feature_set.acfgs[function_id].block_count >= min_blocks
    ]
