"""The TPL feature database: library -> version -> comparison unit -> features.

On-disk layout (a directory):
    meta.json       hierarchy (libraries -> versions -> units), dims, model fingerprint
    index.bin       zlib-compressed JSON inverted index
    vectors.bin     .npy records: vector matrix, function-id table, unit-id table
    units/NNNNN.json per-unit FCG and embedded function ids (for the FCG filter)
    checksums.json  SHA-256 of every file above

The database is built by a single writer. Once built or loaded it is only
read, so one instance can be shared by any number of reader threads.
"""

import hashlib
import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from bintpl.embedding.model import EmbeddingModel, FunctionVector, embed_functions
from bintpl.errors import ConflictError, IntegrityError
from bintpl.featuredb.index import InvertedIndex, UnitTotals
from bintpl.featuredb.vectors import Hit, VectorStore
from bintpl.features import BinaryFeatureSet, Fcg, embeddable_functions
from bintpl.versions import Version

logger = logging.getLogger(__name__)

DB_FORMAT = "bintpl-featuredb"
DB_FORMAT_VERSION = 1
META_FILE = "meta.json"
INDEX_FILE = "index.bin"
VECTORS_FILE = "vectors.bin"
UNITS_DIR = "units"
CHECKSUMS_FILE = "checksums.json"


@dataclass(frozen=True, order=True)
class UnitRef:
    """Location of a comparison unit in the hierarchy.

    Ordering is by unit id, which is globally unique.
    """
    unit_id: str
    library: str = field(compare=False)
    version: str = field(compare=False)

    @property
    def parsed_version(self) -> Version:
        return Version.parse(self.version)


@dataclass
class UnitPayload:
    """What the FCG filter needs about a unit besides its vectors."""
    unit: UnitRef
    fcg: Fcg
    function_ids: List[str] = field(default_factory=list)


def default_unit_id(feature_set: BinaryFeatureSet) -> str:
    return f"{feature_set.library}/{feature_set.version}/{feature_set.binary_id}"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class TplDatabase:
    """Basic-feature inverted index plus function vector store over indexed units."""

    def __init__(self, embedding_dim: int = 64, model_fingerprint: Optional[str] = None):
        self.embedding_dim = embedding_dim
        self.model_fingerprint = model_fingerprint
        self.index = InvertedIndex()
        self.vectors = VectorStore(embedding_dim)
        self._units: Dict[str, UnitRef] = {}
        self._payloads: Dict[str, UnitPayload] = {}

    @classmethod
    def for_model(cls, model: Optional[EmbeddingModel]) -> "TplDatabase":
        if model is None:
            return cls()
        return cls(model.embedding_dim, model.fingerprint())

    @classmethod
    def build(
        cls,
        feature_sets: Sequence[BinaryFeatureSet],
        model: Optional[EmbeddingModel] = None,
    ) -> "TplDatabase":
        """Index every feature set, in unit-id order."""
        db = cls.for_model(model)
        for feature_set in sorted(feature_sets, key=default_unit_id):
            db.index_unit(feature_set, model=model)
        logger.info(f"Built database: {db.summary()}")
        return db

    # -- build --------------------------------------------------------------

    def index_unit(
        self,
        feature_set: BinaryFeatureSet,
        model: Optional[EmbeddingModel] = None,
        vectors: Optional[Sequence[FunctionVector]] = None,
        unit_id: Optional[str] = None,
    ) -> UnitRef:
        """Insert one comparison unit.

        Function vectors come from vectors when given, else from embedding the
        unit's embeddable functions with model; with neither the unit only
        contributes basic features.

        Raises:
            IntegrityError: If the feature set carries no provenance
            ConflictError: If the unit id is already indexed
        """
        if feature_set.provenance is None:
            raise IntegrityError(f"{feature_set.binary_id}: database units need library and version")
        library, version = feature_set.provenance
        unit_id = unit_id or default_unit_id(feature_set)
        if unit_id in self._units:
            raise ConflictError(f"Unit {unit_id!r} is already indexed")
        Version.parse(version)

        if vectors is None and model is not None:
            vectors = embed_functions(embeddable_functions(feature_set), model, unit_id)
        vectors = [FunctionVector(v.function_id, unit_id, v.vector) for v in (vectors or [])]

        unit = UnitRef(unit_id, library, version)
        self.vectors.add(vectors)
        self.index.add_unit(unit_id, feature_set.strings, feature_set.exports)
        self._units[unit_id] = unit
        self._payloads[unit_id] = UnitPayload(
            unit=unit,
            fcg=feature_set.fcg,
            function_ids=sorted(v.function_id for v in vectors),
        )
        logger.debug(
            f"Indexed {unit_id}: {len(feature_set.strings)} strings, "
            f"{len(feature_set.exports)} exports, {len(vectors)} vectors"
        )
        return unit

    # -- query --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._units)

    def __contains__(self, unit_id: str) -> bool:
        return unit_id in self._units

    def unit(self, unit_id: str) -> UnitRef:
        try:
            return self._units[unit_id]
        except KeyError:
            raise IntegrityError(f"Unknown unit {unit_id!r}") from None

    def units(self) -> List[UnitRef]:
        return [self._units[u] for u in sorted(self._units)]

    def lookup_basic(self, feature: str, kind: Optional[str] = None) -> Set[UnitRef]:
        """Units containing a basic feature (exact, case-sensitive)."""
        return {self._units[u] for u in self.index.lookup(feature, kind)}

    def unit_totals(self, unit_id: str) -> UnitTotals:
        return self.index.totals(unit_id)

    def topk(self, query: np.ndarray, k: int) -> List[Hit]:
        return self.vectors.topk(query, k)

    def payload(self, unit_id: str) -> UnitPayload:
        """FCG and function ids of a unit.

        Raises:
            IntegrityError: If the unit has no stored payload
        """
        try:
            return self._payloads[unit_id]
        except KeyError:
            raise IntegrityError(f"No FCG payload stored for unit {unit_id!r}") from None

    def unit_vectors(self, unit_id: str) -> Tuple[List[str], np.ndarray]:
        return self.vectors.unit_vectors(unit_id)

    def hierarchy(self) -> Dict[str, Dict[str, List[str]]]:
        """library -> version -> sorted unit ids."""
        tree: Dict[str, Dict[str, List[str]]] = {}
        for unit in self.units():
            tree.setdefault(unit.library, {}).setdefault(unit.version, []).append(unit.unit_id)
        return {
            lib: dict(sorted(versions.items(), key=lambda kv: (Version.parse(kv[0]), kv[0])))
            for lib, versions in sorted(tree.items())
        }

    def summary(self) -> Dict[str, int]:
        return {
            "libraries": len({u.library for u in self._units.values()}),
            "units": len(self._units),
            "features": len(self.index),
            "postings": self.index.posting_count,
            "vectors": len(self.vectors),
        }

    # -- persistence --------------------------------------------------------

    def persist(self, path: Union[str, Path]) -> None:
        """Write the database directory (see module docstring)."""
        root = Path(path)
        (root / UNITS_DIR).mkdir(parents=True, exist_ok=True)

        files: Dict[str, bytes] = {}
        unit_entries = []
        for i, unit in enumerate(self.units()):
            payload = self._payloads[unit.unit_id]
            name = f"{UNITS_DIR}/{i:05d}.json"
            files[name] = json.dumps({
                "unit_id": unit.unit_id,
                "fcg": {"nodes": list(payload.fcg.nodes), "edges": [list(e) for e in payload.fcg.edges]},
                "functions": payload.function_ids,
            }, sort_keys=True).encode("utf-8")
            unit_entries.append({
                "unit_id": unit.unit_id,
                "library": unit.library,
                "version": unit.version,
                "payload": name,
            })

        meta = {
            "format": DB_FORMAT,
            "format_version": DB_FORMAT_VERSION,
            "embedding_dim": self.embedding_dim,
            "model_fingerprint": self.model_fingerprint,
            "libraries": self.hierarchy(),
            "units": unit_entries,
        }
        files[META_FILE] = json.dumps(meta, indent=1, sort_keys=True).encode("utf-8")
        files[INDEX_FILE] = zlib.compress(
            json.dumps(self.index.to_document(), sort_keys=True).encode("utf-8"), 6
        )
        files[VECTORS_FILE] = self.vectors.to_bytes()

        for name, data in files.items():
            (root / name).write_bytes(data)
        checksums = {name: _sha256(data) for name, data in sorted(files.items())}
        (root / CHECKSUMS_FILE).write_text(json.dumps(checksums, indent=1, sort_keys=True), encoding="utf-8")
        logger.info(f"Persisted database to {root}: {self.summary()}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TplDatabase":
        """Load a database directory, verifying every checksum.

        Raises:
            IntegrityError: If a file is missing, corrupt or inconsistent
        """
        root = Path(path)
        try:
            checksums = json.loads((root / CHECKSUMS_FILE).read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise IntegrityError(f"{root} is not a bintpl database: {CHECKSUMS_FILE} missing") from e
        except json.JSONDecodeError as e:
            raise IntegrityError(f"{root / CHECKSUMS_FILE} is corrupt: {e}") from e

        files: Dict[str, bytes] = {}
        for name, expected in checksums.items():
            try:
                data = (root / name).read_bytes()
            except FileNotFoundError as e:
                raise IntegrityError(f"Database file {name} is missing") from e
            actual = _sha256(data)
            if actual != expected:
                raise IntegrityError(
                    f"Checksum mismatch for {name}: expected {expected}, got {actual}"
                )
            files[name] = data
        for required in (META_FILE, INDEX_FILE, VECTORS_FILE):
            if required not in files:
                raise IntegrityError(f"Database file {required} is not covered by checksums")

        try:
            meta = json.loads(files[META_FILE])
            index_doc = json.loads(zlib.decompress(files[INDEX_FILE]))
        except (json.JSONDecodeError, zlib.error) as e:
            raise IntegrityError(f"Database metadata is unreadable: {e}") from e
        if meta.get("format") != DB_FORMAT:
            raise IntegrityError(f"{root} is not a {DB_FORMAT} directory")

        db = cls(int(meta["embedding_dim"]), meta.get("model_fingerprint"))
        db.index = InvertedIndex.from_document(index_doc)
        db.vectors = VectorStore.from_bytes(files[VECTORS_FILE], db.embedding_dim)
        for entry in meta["units"]:
            unit = UnitRef(entry["unit_id"], entry["library"], entry["version"])
            try:
                doc = json.loads(files[entry["payload"]])
            except KeyError:
                raise IntegrityError(f"Payload of unit {unit.unit_id!r} is missing") from None
            fcg = Fcg(
                nodes=tuple(doc["fcg"]["nodes"]),
                edges=tuple(tuple(e) for e in doc["fcg"]["edges"]),
            )
            db._units[unit.unit_id] = unit
            db._payloads[unit.unit_id] = UnitPayload(unit, fcg, list(doc["functions"]))

        logger.info(f"Loaded database from {root}: {db.summary()}")
        return db
