"""Seeded synthetic corpus: library packages, fused targets and their ground truth.

Each library gets its own string literals, exported names and functions whose
call graph is a set of small call trees ("modules"). The first sibling_pairs
pairs of libraries share most of their strings but none of their code, which
is what makes basic-feature matching alone report wrong libraries. Each version
rewrites a share of the previous version's functions in place and replaces a
share of its strings.

A fused target links fan_in libraries at random versions: every function is
"recompiled" (attribute jitter plus edge insertions and deletions), a share
of the basic features is stripped, application code is added and all
function names are discarded.

On disk:
    units/<library>/<version>/<library>.so.json   manifests with provenance
    targets/<target>.json                         manifests
    ground_truth.json                             libraries, versions and
                                                  function origins per target
"""

import json
import logging
import string as _string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from bintpl.embedding.loss import TrainingPair
from bintpl.errors import ConfigurationError
from bintpl.features import (
    OFFSPRING_INDEX,
    Acfg,
    BinaryFeatureSet,
    ExportedName,
    Fcg,
    StringLiteral,
    embeddable_functions,
    string_weight,
)
from bintpl.formats.manifest import load_manifest, write_manifest

logger = logging.getLogger(__name__)

GROUND_TRUTH_FILE = "ground_truth.json"
UNITS_DIR = "units"
TARGETS_DIR = "targets"

_LETTERS = np.array(list(_string.ascii_lowercase))


class CorpusSpec(BaseModel):
    """Size and difficulty knobs of a synthetic corpus."""
    model_config = ConfigDict(extra="forbid")

    seed: int = 1729
    libraries: int = Field(50, gt=0)
    versions: int = Field(3, gt=0, description="Versions per library")
    functions_per_unit: int = Field(40, gt=0)
    strings_per_unit: int = Field(30, gt=0)
    exports_per_unit: int = Field(25, gt=0)
    targets: int = Field(30, gt=0)
    fan_in: int = Field(3, gt=0, description="Libraries per fused target")
    strip: float = Field(0.3, ge=0.0, le=1.0, description="Share of library basic features removed from targets")
    perturbation: float = Field(0.2, ge=0.0, le=1.0, description="Recompilation strength")
    version_churn: float = Field(0.15, ge=0.0, le=1.0, description="Share of functions and strings changed per version")
    sibling_pairs: int = Field(5, ge=0, description="Leading library pairs that are siblings")
    sibling_overlap: float = Field(0.8, ge=0.0, le=1.0, description="Share of strings sibling libraries have in common")
    junk_functions: int = Field(20, ge=0)
    junk_strings: int = Field(20, ge=0)
    module_size: int = Field(8, gt=1, description="Functions per call tree")

    @model_validator(mode="after")
    def _fan_in_fits(self):
        if self.fan_in > self.libraries:
            raise ValueError(f"fan_in {self.fan_in} exceeds library count {self.libraries}")
        return self

    @property
    def basic_features_stripped(self) -> bool:
        """Whether targets keep no library basic features at all."""
        return self.strip >= 1.0


@dataclass
class TargetTruth:
    """What a fused target really contains."""
    libraries: Dict[str, str] = field(default_factory=dict)
    functions: Dict[str, Tuple[str, str]] = field(default_factory=dict)


@dataclass
class Corpus:
    spec: CorpusSpec
    units: List[BinaryFeatureSet]
    targets: List[BinaryFeatureSet]
    truth: Dict[str, TargetTruth]


# -- random building blocks -------------------------------------------------

def _word(rng: np.random.Generator, low: int = 4, high: int = 10) -> str:
    return "".join(rng.choice(_LETTERS, size=int(rng.integers(low, high + 1))))


def _random_string(rng: np.random.Generator, prefix: str) -> str:
    kind = rng.random()
    if kind < 0.15:
        return f"/usr/share/{prefix}/{_word(rng)}.{_word(rng, 2, 4)}"
    if kind < 0.25:
        return f"https://{_word(rng)}.org/{prefix}/{_word(rng)}"
    words = " ".join(_word(rng) for _ in range(int(rng.integers(1, 5))))
    return f"{prefix}: {words}"


def random_acfg(function_id: str, rng: np.random.Generator, n_blocks: Optional[int] = None) -> Acfg:
    """A CFG of fall-through, branch and loop edges with per-function attribute rates."""
    if n_blocks is None:
        n_blocks = int(rng.integers(2, 5)) if rng.random() < 0.1 else int(rng.integers(5, 31))
    rates = rng.uniform([0.0, 0.0, 0.0, 3.0, 0.0], [2.0, 4.0, 2.0, 20.0, 6.0])

    edges = set()
    for i in range(n_blocks - 1):
        if rng.random() < 0.85:
            edges.add((i, i + 1))
        if i + 2 < n_blocks and rng.random() < 0.35:
            edges.add((i, int(rng.integers(i + 2, n_blocks))))
        if i > 0 and rng.random() < 0.08:
            edges.add((i, int(rng.integers(0, i + 1))))

    out_degree = np.zeros(n_blocks)
    for src, _ in edges:
        out_degree[src] += 1
    blocks = []
    for i in range(n_blocks):
        strings, numerics, calls, instructions, arithmetic = rng.poisson(rates)
        instructions += 1 + int(out_degree[i] > 0)
        blocks.append([
            strings,
            numerics,
            float(out_degree[i] > 1) + float(out_degree[i] > 0),
            calls,
            instructions,
            min(arithmetic, instructions),
        ])
    return Acfg.from_attributes(function_id, blocks, sorted(edges))


def perturb_acfg(
    acfg: Acfg,
    rng: np.random.Generator,
    strength: float = 0.2,
    function_id: Optional[str] = None,
) -> Acfg:
    """A "recompiled" variant: attribute jitter plus edge deletions and insertions.

    strength is the share of attributes jittered by +-1 and, halved, the
    share of edges replaced by random ones. Offspring is recomputed.
    """
    raw = np.delete(acfg.blocks, OFFSPRING_INDEX, axis=1)
    n = acfg.block_count
    mask = rng.random(raw.shape) < strength
    raw = np.maximum(raw + mask * rng.choice([-1.0, 1.0], size=raw.shape), 0.0)

    edges = list(acfg.edges)
    if edges and n > 1:
        n_edits = int(rng.binomial(len(edges), strength / 2))
        if n_edits:
            keep = rng.permutation(len(edges))[n_edits:]
            edges = [edges[i] for i in sorted(keep)]
            for _ in range(n_edits):
                src = int(rng.integers(0, n - 1))
                edges.append((src, int(rng.integers(src + 1, n))))
    return Acfg.from_attributes(function_id or acfg.function_id, raw, sorted(set(edges)))


def _call_forest(function_ids: Sequence[str], rng: np.random.Generator, module_size: int) -> List[Tuple[str, str]]:
    """Caller -> callee edges forming one small call tree per module, plus rare cross calls."""
    edges = []
    for j in range(len(function_ids)):
        start = (j // module_size) * module_size
        if j > start:
            edges.append((function_ids[int(rng.integers(start, j))], function_ids[j]))
            if j > start + 1 and rng.random() < 0.2:
                edges.append((function_ids[int(rng.integers(start, j))], function_ids[j]))
        if start > 0 and j == start and rng.random() < 0.3:
            edges.append((function_ids[int(rng.integers(0, start))], function_ids[j]))
    return sorted(set(edges))


def _next_version(previous: Tuple[int, int, int], rng: np.random.Generator) -> Tuple[int, int, int]:
    major, minor, patch = previous
    step = rng.random()
    if step < 0.5:
        return (major, minor, patch + int(rng.integers(1, 4)))
    if step < 0.9:
        return (major, minor + 1, int(rng.integers(0, 3)))
    return (major + 1, 0, 0)


def _feature_set(
    binary_id: str,
    strings: Sequence[str],
    exports: Sequence[str],
    acfgs: Dict[str, Acfg],
    edges: Sequence[Tuple[str, str]],
    library: Optional[str] = None,
    version: Optional[str] = None,
) -> BinaryFeatureSet:
    return BinaryFeatureSet(
        binary_id=binary_id,
        strings=frozenset(StringLiteral(s, string_weight(s)) for s in strings),
        exports=frozenset(ExportedName(e) for e in exports),
        acfgs=acfgs,
        fcg=Fcg(nodes=tuple(acfgs), edges=tuple(edges)),
        library=library,
        version=version,
    )


# -- generation -------------------------------------------------------------

def _generate_library(
    index: int,
    spec: CorpusSpec,
    rng: np.random.Generator,
    sibling_strings: Optional[List[str]],
) -> List[BinaryFeatureSet]:
    name = f"lib{_word(rng, 3, 6)}{index:02d}"
    function_ids = [f"{name}_{j:03d}" for j in range(spec.functions_per_unit)]
    acfgs = {fid: random_acfg(fid, rng) for fid in function_ids}
    call_edges = _call_forest(function_ids, rng, spec.module_size)

    strings = [_random_string(rng, name) for _ in range(spec.strings_per_unit)]
    if sibling_strings:
        shared = int(round(spec.sibling_overlap * spec.strings_per_unit))
        strings[:shared] = sibling_strings[:shared]
    exports = [f"{name}_{_word(rng)}" for _ in range(spec.exports_per_unit)]

    version = (1, int(rng.integers(0, 4)), int(rng.integers(0, 10)))
    units = []
    for v in range(spec.versions):
        if v > 0:
            version = _next_version(version, rng)
            for fid in function_ids:
                if rng.random() < spec.version_churn:
                    acfgs[fid] = random_acfg(fid, rng)
            strings = [
                _random_string(rng, name) if rng.random() < spec.version_churn else s
                for s in strings
            ]
            exports = exports + [f"{name}_{_word(rng)}"]
        text = ".".join(str(part) for part in version)
        units.append(_feature_set(f"{name}.so", strings, exports, dict(acfgs), call_edges, name, text))
    return units


def _fuse_target(
    target_id: str,
    members: Sequence[BinaryFeatureSet],
    spec: CorpusSpec,
    rng: np.random.Generator,
) -> Tuple[BinaryFeatureSet, TargetTruth]:
    truth = TargetTruth(libraries={u.library: u.version for u in members})
    strings: List[str] = []
    exports: List[str] = []
    acfgs: Dict[str, Acfg] = {}
    edges: List[Tuple[str, str]] = []
    origin: Dict[str, Tuple[str, str]] = {}

    for unit in members:
        unit_id = f"{unit.library}/{unit.version}/{unit.binary_id}"
        for values, sink in ((sorted(unit.string_values), strings), (sorted(unit.export_names), exports)):
            keep = len(values) - int(round(spec.strip * len(values)))
            chosen = rng.permutation(len(values))[:keep]
            sink.extend(values[i] for i in sorted(chosen))
        for fid in sorted(unit.acfgs):
            acfgs[fid] = perturb_acfg(unit.acfgs[fid], rng, spec.perturbation)
            origin[fid] = (unit_id, fid)
        edges.extend(unit.fcg.edges)

    app = f"app{target_id[-3:]}"
    junk_ids = [f"{app}_{j:03d}" for j in range(spec.junk_functions)]
    for fid in junk_ids:
        acfgs[fid] = random_acfg(fid, rng)
    edges.extend(_call_forest(junk_ids, rng, spec.module_size))
    library_functions = sorted(origin)
    if junk_ids:
        for _ in range(3 * len(members)):
            caller = junk_ids[int(rng.integers(0, len(junk_ids)))]
            edges.append((caller, library_functions[int(rng.integers(0, len(library_functions)))]))
    strings.extend(_random_string(rng, app) for _ in range(spec.junk_strings))

    order = rng.permutation(len(acfgs))
    old_ids = sorted(acfgs)
    rename = {old_ids[i]: f"{target_id}:f{k:05d}" for k, i in enumerate(order)}
    renamed = {
        rename[fid]: Acfg(rename[fid], acfg.blocks, acfg.edges)
        for fid, acfg in acfgs.items()
    }
    target = _feature_set(
        target_id,
        strings,
        exports,
        dict(sorted(renamed.items())),
        [(rename[a], rename[b]) for a, b in edges],
    )
    for fid, source in origin.items():
        if renamed[rename[fid]].block_count >= 5:
            truth.functions[rename[fid]] = source
    return target, truth


def generate_corpus(spec: Optional[CorpusSpec] = None) -> Corpus:
    """Generate a corpus; equal specs give identical corpora."""
    spec = spec or CorpusSpec()
    if spec.basic_features_stripped:
        logger.warning("strip=1: targets carry no library basic features, basic-feature matching cannot recall anything")
    rng = np.random.default_rng(spec.seed)

    libraries: List[List[BinaryFeatureSet]] = []
    for index in range(spec.libraries):
        sibling = None
        if index % 2 == 1 and index // 2 < spec.sibling_pairs and spec.sibling_overlap > 0:
            sibling = sorted(libraries[index - 1][0].string_values)
            rng.shuffle(sibling)
        libraries.append(_generate_library(index, spec, rng, sibling))

    targets, truth = [], {}
    for t in range(spec.targets):
        chosen = sorted(rng.choice(spec.libraries, size=spec.fan_in, replace=False))
        members = [libraries[i][int(rng.integers(0, spec.versions))] for i in chosen]
        target_id = f"target{t:03d}"
        target, target_truth = _fuse_target(target_id, members, spec, rng)
        targets.append(target)
        truth[target_id] = target_truth

    units = [unit for versions in libraries for unit in versions]
    logger.info(f"Generated {len(units)} units of {spec.libraries} libraries and {len(targets)} targets")
    return Corpus(spec, units, targets, truth)


def build_training_pairs(
    feature_sets: Sequence[BinaryFeatureSet],
    count: int = 2400,
    strength: float = 0.2,
    seed: int = 0,
) -> List[TrainingPair]:
    """Alternating similar and dissimilar pairs of recompiled function variants.

    A similar pair is two independent variants of one function; a dissimilar
    pair is variants of two different functions.

    Raises:
        ConfigurationError: If fewer than two embeddable functions exist
    """
    functions = [acfg for fs in sorted(feature_sets, key=lambda f: f.binary_id) for acfg in embeddable_functions(fs)]
    if len(functions) < 2:
        raise ConfigurationError("Training pairs need at least two embeddable functions")
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        a = int(rng.integers(0, len(functions)))
        if i % 2 == 0:
            b, label = a, 1
        else:
            b = (a + int(rng.integers(1, len(functions)))) % len(functions)
            label = -1
        pairs.append(TrainingPair(
            perturb_acfg(functions[a], rng, strength),
            perturb_acfg(functions[b], rng, strength),
            label,
        ))
    return pairs


# -- persistence ------------------------------------------------------------

def _truth_document(corpus: Corpus) -> Dict:
    return {
        "spec": corpus.spec.model_dump(),
        "targets": {
            target_id: {
                "libraries": dict(sorted(t.libraries.items())),
                "functions": {fid: list(src) for fid, src in sorted(t.functions.items())},
            }
            for target_id, t in sorted(corpus.truth.items())
        },
    }


def write_corpus(corpus: Corpus, root: Union[str, Path]) -> None:
    root = Path(root)
    for unit in corpus.units:
        write_manifest(unit, root / UNITS_DIR / unit.library / unit.version / f"{unit.binary_id}.json")
    for target in corpus.targets:
        write_manifest(target, root / TARGETS_DIR / f"{target.binary_id}.json")
    (root / GROUND_TRUTH_FILE).write_text(
        json.dumps(_truth_document(corpus), indent=1) + "\n", encoding="utf-8"
    )
    logger.info(f"Wrote corpus to {root}")


def load_ground_truth(path: Union[str, Path]) -> Tuple[CorpusSpec, Dict[str, TargetTruth]]:
    """Read ground_truth.json.

    Raises:
        ConfigurationError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        spec = CorpusSpec.model_validate(doc["spec"])
        truth = {
            target_id: TargetTruth(
                libraries=dict(entry["libraries"]),
                functions={fid: (src[0], src[1]) for fid, src in entry.get("functions", {}).items()},
            )
            for target_id, entry in doc["targets"].items()
        }
    except FileNotFoundError as e:
        raise ConfigurationError(f"Ground truth not found: {path}") from e
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
        raise ConfigurationError(f"Malformed ground truth {path}: {e}") from e
    return spec, truth


def load_corpus(root: Union[str, Path]) -> Corpus:
    """Read a corpus written by write_corpus."""
    root = Path(root)
    spec, truth = load_ground_truth(root / GROUND_TRUTH_FILE)
    units = [load_manifest(p) for p in sorted((root / UNITS_DIR).rglob("*.json"))]
    targets = [load_manifest(p) for p in sorted((root / TARGETS_DIR).glob("*.json"))]
    return Corpus(spec, units, targets, truth)
