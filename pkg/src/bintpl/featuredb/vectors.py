"""Exact inner-product vector store.

All stored vectors are unit-norm, so inner product equals cosine. Search is
an exhaustive matrix-vector product followed by a partial sort; ties are
broken by ascending (function id, unit id), which makes results deterministic.
"""

import io
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np

from bintpl.embedding.model import FunctionVector
from bintpl.errors import ConflictError, DomainError, IntegrityError, ShapeError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6

Hit = Tuple[str, str, float]


class VectorStore:
    """Matrix of unit-tagged function vectors."""

    def __init__(self, dim: int):
        self.dim = dim
        self._rows: List[np.ndarray] = []
        self._function_ids: List[str] = []
        self._unit_ids: List[str] = []
        self._keys: Dict[Tuple[str, str], int] = {}
        self._by_unit: Dict[str, List[int]] = {}
        self._matrix = np.zeros((0, dim))
        self._rank = np.zeros(0, dtype=np.int64)
        self._stale = False

    def __len__(self) -> int:
        return len(self._function_ids)

    def add(self, vectors: Sequence[FunctionVector]) -> None:
        """Append vectors.

        Raises:
            ShapeError: On a dimension mismatch
            DomainError: If a vector is not unit-norm
            ConflictError: If a (function id, unit id) is already stored
        """
        for fv in vectors:
            vector = np.asarray(fv.vector, dtype=np.float64)
            if vector.shape != (self.dim,):
                raise ShapeError(f"Vector for {fv.function_id!r} has shape {vector.shape}, store dim is {self.dim}")
            norm = np.linalg.norm(vector)
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise DomainError(f"Vector for {fv.function_id!r} has norm {norm:.8f}, expected 1")
            key = (fv.function_id, fv.unit_id)
            if key in self._keys:
                raise ConflictError(f"Vector for function {fv.function_id!r} of unit {fv.unit_id!r} already stored")
            self._keys[key] = len(self._function_ids)
            self._by_unit.setdefault(fv.unit_id, []).append(len(self._function_ids))
            self._rows.append(vector)
            self._function_ids.append(fv.function_id)
            self._unit_ids.append(fv.unit_id)
            self._stale = True

    def _refresh(self) -> None:
        if not self._stale:
            return
        self._matrix = np.vstack(self._rows) if self._rows else np.zeros((0, self.dim))
        order = sorted(range(len(self._function_ids)), key=lambda i: (self._function_ids[i], self._unit_ids[i]))
        rank = np.empty(len(order), dtype=np.int64)
        rank[order] = np.arange(len(order))
        self._rank = rank
        self._stale = False

    @property
    def matrix(self) -> np.ndarray:
        self._refresh()
        return self._matrix

    def topk(self, query: np.ndarray, k: int) -> List[Hit]:
        """The k stored vectors with the largest inner product with query.

        Args:
            query: Unit-norm vector
            k: Number of results (>= 1); fewer when the store is smaller

        Returns:
            (function id, unit id, score) triples by descending score, ties by
            ascending function id then unit id

        Raises:
            ValueError: If k < 1
            DomainError: If the query is not unit-norm
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        query = np.asarray(query, dtype=np.float64)
        if abs(np.linalg.norm(query) - 1.0) > NORM_TOLERANCE:
            raise DomainError("topk query must be unit-norm")
        n = len(self)
        if n == 0:
            return []
        self._refresh()

        scores = self._matrix @ query
        if k >= n:
            candidates = np.arange(n)
        else:
            kth = np.partition(scores, n - k)[n - k]
            candidates = np.flatnonzero(scores >= kth)
        order = np.lexsort((self._rank[candidates], -scores[candidates]))
        chosen = candidates[order][:k]
        return [(self._function_ids[i], self._unit_ids[i], float(scores[i])) for i in chosen]

    def unit_vectors(self, unit_id: str) -> Tuple[List[str], np.ndarray]:
        """Function ids (sorted) and their vectors for one unit."""
        rows = sorted(self._by_unit.get(unit_id, []), key=lambda i: self._function_ids[i])
        self._refresh()
        if not rows:
            return [], np.zeros((0, self.dim))
        return [self._function_ids[i] for i in rows], self._matrix[rows]

    def to_bytes(self) -> bytes:
        """Row-major matrix followed by the function-id and unit-id tables, as .npy records."""
        self._refresh()
        buffer = io.BytesIO()
        np.save(buffer, np.ascontiguousarray(self._matrix), allow_pickle=False)
        np.save(buffer, np.array(self._function_ids, dtype=str), allow_pickle=False)
        np.save(buffer, np.array(self._unit_ids, dtype=str), allow_pickle=False)
        return buffer.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes, dim: int) -> "VectorStore":
        """Rebuild a store from to_bytes output.

        Raises:
            IntegrityError: If the tables are inconsistent
        """
        buffer = io.BytesIO(data)
        try:
            matrix = np.load(buffer, allow_pickle=False)
            function_ids = np.load(buffer, allow_pickle=False)
            unit_ids = np.load(buffer, allow_pickle=False)
        except (ValueError, EOFError, OSError) as e:
            raise IntegrityError(f"Vector table is unreadable: {e}") from e
        rows = matrix.shape[0] if matrix.ndim == 2 else -1
        if rows != len(function_ids) or rows != len(unit_ids) or (rows and matrix.shape[1] != dim):
            raise IntegrityError(
                f"Vector table shape {matrix.shape} does not match {len(function_ids)} ids and dim {dim}"
            )
        store = cls(dim)
        store.add([
            FunctionVector(str(f), str(u), matrix[i])
            for i, (f, u) in enumerate(zip(function_ids, unit_ids))
        ])
        return store
