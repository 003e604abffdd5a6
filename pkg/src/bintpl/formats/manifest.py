"""Feature manifest reader and writer.

A manifest is one JSON document per binary carrying every feature bintpl
uses. External disassemblers and the synthetic corpus generator both emit it.

Manifest format:
    {
      "binary_id": "libpng16.so",
      "strings":   ["libpng error: %s", ...],
      "exports":   ["png_read_info", ...],
      "functions": [
        {"id": "png_read_info",
         "blocks": [[s, n, t, c, i, a, o], ...],   # 7 attributes, fixed order
         "edges":  [[0, 1], [1, 2], ...]}
      ],
      "fcg_nodes": ["thunk_malloc"],               # optional: nodes without a CFG
      "fcg_edges": [["png_read_info", "png_crc_read"], ...],
      "library": "libpng",                         # optional provenance
      "version": "1.6.37"
    }

The attribute order is bintpl.features.ATTRIBUTE_NAMES and is also recorded
in the shipped schema file manifest.schema.json.
"""

import json
import logging
import math
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from bintpl.errors import ManifestValidationError
from bintpl.features import (
    N_ATTRIBUTES,
    Acfg,
    BinaryFeatureSet,
    ExportedName,
    Fcg,
    StringLiteral,
    string_weight,
)

logger = logging.getLogger(__name__)

SCHEMA_FILE = "manifest.schema.json"


class FunctionEntry(BaseModel):
    """One function and its attributed CFG."""
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)

    id: str = Field(..., min_length=1, description="Function id, unique within the binary")
    blocks: List[List[float]] = Field(default_factory=list, description="Per-block attribute vectors")
    edges: List[Tuple[int, int]] = Field(default_factory=list, description="Directed [src, dst] block edges")

    @field_validator("blocks")
    @classmethod
    def _check_blocks(cls, blocks: List[List[float]]) -> List[List[float]]:
        for i, block in enumerate(blocks):
            if len(block) != N_ATTRIBUTES:
                raise ValueError(f"block {i} has {len(block)} attributes, expected {N_ATTRIBUTES}")
            if not all(math.isfinite(value) for value in block):
                raise ValueError(f"block {i} has a non-finite attribute")
            if any(value < 0 for value in block):
                raise ValueError(f"block {i} has a negative attribute")
        return blocks

    @model_validator(mode="after")
    def _check_edges(self) -> "FunctionEntry":
        n = len(self.blocks)
        for src, dst in self.edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge [{src}, {dst}] outside {n} blocks")
        return self


class Manifest(BaseModel):
    """Wire form of a BinaryFeatureSet."""
    model_config = ConfigDict(extra="forbid")

    binary_id: str = Field(..., min_length=1)
    strings: List[str] = Field(default_factory=list)
    exports: List[str] = Field(default_factory=list)
    functions: List[FunctionEntry] = Field(default_factory=list)
    fcg_nodes: List[str] = Field(default_factory=list)
    fcg_edges: List[Tuple[str, str]] = Field(default_factory=list)
    library: Optional[str] = None
    version: Optional[str] = None

    @field_validator("strings")
    @classmethod
    def _check_strings(cls, strings: List[str]) -> List[str]:
        for s in strings:
            if "\x00" in s:
                raise ValueError(f"string contains NUL: {s!r}")
        return strings

    @field_validator("exports")
    @classmethod
    def _check_exports(cls, exports: List[str]) -> List[str]:
        if any(not name for name in exports):
            raise ValueError("exported names must be nonempty")
        return exports

    @model_validator(mode="after")
    def _check_unique_functions(self) -> "Manifest":
        seen = set()
        for fn in self.functions:
            if fn.id in seen:
                raise ValueError(f"duplicate function id {fn.id!r}")
            seen.add(fn.id)
        if (self.library is None) != (self.version is None):
            raise ValueError("library and version must be given together")
        return self


def _error_paths(error: ValidationError) -> Tuple[List[str], List[str]]:
    paths, details = [], []
    for item in error.errors():
        paths.append(".".join(str(part) for part in item["loc"]) or "<root>")
        details.append(item["msg"])
    return paths, details


def manifest_to_feature_set(
    manifest: Manifest,
    min_length: int = 5,
    weight_cap: float = 50.0,
    special_multiplier: float = 2.0,
    source: str = "<memory>",
) -> BinaryFeatureSet:
    """Convert a validated manifest into a BinaryFeatureSet.

    Raises:
        ManifestValidationError: If a function's CFG is rejected by Acfg
        IntegrityError: If an FCG edge references an undeclared function
    """
    strings = frozenset(
        StringLiteral(s, string_weight(s, weight_cap, special_multiplier))
        for s in manifest.strings
        if len(s) >= min_length
    )
    dropped = len(set(manifest.strings)) - len(strings)
    if dropped:
        logger.debug(f"{manifest.binary_id}: dropped {dropped} strings shorter than {min_length}")

    acfgs = {}
    for i, fn in enumerate(manifest.functions):
        try:
            acfgs[fn.id] = Acfg(fn.id, fn.blocks, tuple(tuple(e) for e in fn.edges))
        except ValueError as e:
            raise ManifestValidationError(source, [f"functions.{i}"], [str(e)]) from e
    fcg = Fcg(
        nodes=tuple(acfgs) + tuple(manifest.fcg_nodes),
        edges=tuple(tuple(e) for e in manifest.fcg_edges),
    )
    return BinaryFeatureSet(
        binary_id=manifest.binary_id,
        strings=strings,
        exports=frozenset(ExportedName(n) for n in manifest.exports),
        acfgs=acfgs,
        fcg=fcg,
        library=manifest.library,
        version=manifest.version,
    )


def feature_set_to_manifest(feature_set: BinaryFeatureSet) -> Manifest:
    """Convert a BinaryFeatureSet to its wire form (deterministic ordering)."""
    functions = [
        FunctionEntry(
            id=function_id,
            blocks=acfg.blocks.tolist(),
            edges=list(acfg.edges),
        )
        for function_id, acfg in sorted(feature_set.acfgs.items())
    ]
    return Manifest(
        binary_id=feature_set.binary_id,
        strings=sorted(feature_set.string_values),
        exports=sorted(feature_set.export_names),
        functions=functions,
        fcg_nodes=[n for n in feature_set.fcg.nodes if n not in feature_set.acfgs],
        fcg_edges=list(feature_set.fcg.edges),
        library=feature_set.library,
        version=feature_set.version,
    )


def parse_manifest(document: Union[str, bytes, Dict[str, Any]], source: str = "<memory>") -> Manifest:
    """Validate a manifest document.

    Raises:
        ManifestValidationError: If the document is not JSON or violates the schema
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise ManifestValidationError(source, ["<root>"], [f"not valid JSON: {e}"]) from e
    try:
        return Manifest.model_validate(document)
    except ValidationError as e:
        paths, details = _error_paths(e)
        raise ManifestValidationError(source, paths, details) from e


def load_manifest(
    path: Union[str, Path],
    min_length: int = 5,
    weight_cap: float = 50.0,
    special_multiplier: float = 2.0,
) -> BinaryFeatureSet:
    """Read a manifest file into a BinaryFeatureSet.

    Args:
        path: Manifest JSON file
        min_length: Shortest string literal kept
        weight_cap: Cap of the length-based string weight
        special_multiplier: Weight factor for links and paths

    Returns:
        Fully populated BinaryFeatureSet

    Raises:
        FileNotFoundError: If the file does not exist
        ManifestValidationError: If the document violates the schema
        IntegrityError: If an FCG edge references an undeclared function
    """
    path = Path(path)
    manifest = parse_manifest(path.read_bytes(), source=str(path))
    return manifest_to_feature_set(manifest, min_length, weight_cap, special_multiplier, source=str(path))


def format_manifest_string(feature_set: BinaryFeatureSet) -> str:
    """Serialize a BinaryFeatureSet as manifest JSON text."""
    manifest = feature_set_to_manifest(feature_set)
    return json.dumps(manifest.model_dump(exclude_none=True), indent=1) + "\n"


def write_manifest(feature_set: BinaryFeatureSet, path: Union[str, Path]) -> None:
    """Write a BinaryFeatureSet as a manifest file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_manifest_string(feature_set), encoding="utf-8")


def manifest_schema() -> Dict[str, Any]:
    """The JSON schema shipped with the package."""
    text = resources.files("bintpl.formats").joinpath(SCHEMA_FILE).read_text(encoding="utf-8")
    return json.loads(text)
