"""Shared fixtures: a tiny ELF64 writer, feature-set factories and a small corpus."""

import struct
from typing import Dict, Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pytest

from bintpl.evaluation.corpus import CorpusSpec, generate_corpus, random_acfg
from bintpl.features import Acfg, BinaryFeatureSet, ExportedName, Fcg, StringLiteral, string_weight

STB_LOCAL, STB_GLOBAL, STB_WEAK = 0, 1, 2
STT_OBJECT, STT_FUNC = 1, 2
STV_DEFAULT, STV_HIDDEN, STV_PROTECTED = 0, 2, 3

SHT_PROGBITS, SHT_STRTAB, SHT_DYNSYM = 1, 3, 11
SHF_ALLOC = 2

_EHDR = struct.Struct("<16sHHIQQQIHHHHHH")
_SHDR = struct.Struct("<IIQQQQIIQQ")
_SYM = struct.Struct("<IBBHQQ")


class Symbol(NamedTuple):
    name: str
    bind: int = STB_GLOBAL
    type: int = STT_FUNC
    visibility: int = STV_DEFAULT
    defined: bool = True


def _align(blob: bytearray, boundary: int) -> None:
    blob.extend(b"\x00" * (-len(blob) % boundary))


def build_elf(
    rodata: bytes = b"",
    symbols: Sequence[Symbol] = (),
    rodata_overrun: int = 0,
) -> bytes:
    """Little-endian ELF64 shared object with .rodata, .dynsym, .dynstr and .shstrtab.

    rodata_overrun declares .rodata that many bytes longer than the file holds.
    """
    shstrtab = bytearray(b"\x00")
    names = {}
    for name in (".rodata", ".dynsym", ".dynstr", ".shstrtab"):
        names[name] = len(shstrtab)
        shstrtab += name.encode() + b"\x00"

    dynstr = bytearray(b"\x00")
    dynsym = bytearray(_SYM.pack(0, 0, 0, 0, 0, 0))
    for symbol in symbols:
        offset = len(dynstr)
        dynstr += symbol.name.encode() + b"\x00"
        shndx = 1 if symbol.defined else 0
        dynsym += _SYM.pack(offset, (symbol.bind << 4) | symbol.type, symbol.visibility, shndx, 0x1000, 16)

    blob = bytearray(b"\x00" * _EHDR.size)
    layout: Dict[str, Tuple[int, int]] = {}
    for name, data, boundary in (
        (".rodata", rodata, 1),
        (".dynstr", dynstr, 1),
        (".dynsym", dynsym, 8),
        (".shstrtab", shstrtab, 1),
    ):
        _align(blob, boundary)
        layout[name] = (len(blob), len(data))
        blob += data
    _align(blob, 8)
    shoff = len(blob)

    rodata_off, rodata_len = layout[".rodata"]
    headers = [
        _SHDR.pack(0, 0, 0, 0, 0, 0, 0, 0, 0, 0),
        _SHDR.pack(names[".rodata"], SHT_PROGBITS, SHF_ALLOC, rodata_off, rodata_off,
                   rodata_len + rodata_overrun, 0, 0, 1, 0),
        _SHDR.pack(names[".dynsym"], SHT_DYNSYM, SHF_ALLOC, layout[".dynsym"][0], layout[".dynsym"][0],
                   layout[".dynsym"][1], 3, 1, 8, _SYM.size),
        _SHDR.pack(names[".dynstr"], SHT_STRTAB, SHF_ALLOC, layout[".dynstr"][0], layout[".dynstr"][0],
                   layout[".dynstr"][1], 0, 0, 1, 0),
        _SHDR.pack(names[".shstrtab"], SHT_STRTAB, 0, 0, layout[".shstrtab"][0],
                   layout[".shstrtab"][1], 0, 0, 1, 0),
    ]
    for header in headers:
        blob += header

    ident = b"\x7fELF" + bytes([2, 1, 1, 0]) + b"\x00" * 8
    blob[:_EHDR.size] = _EHDR.pack(
        ident, 3, 62, 1, 0, 0, shoff, 0, _EHDR.size, 56, 0, _SHDR.size, len(headers), 4
    )
    return bytes(blob)


def chain_acfg(function_id: str, n_blocks: int = 5, seed: int = 0) -> Acfg:
    """A straight-line CFG with random raw attributes."""
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 6, size=(n_blocks, 6)).astype(float)
    return Acfg.from_attributes(function_id, raw, [(i, i + 1) for i in range(n_blocks - 1)])


def make_feature_set(
    binary_id: str,
    strings: Iterable[str] = (),
    exports: Iterable[str] = (),
    acfgs: Optional[Dict[str, Acfg]] = None,
    fcg_edges: Iterable[Tuple[str, str]] = (),
    library: Optional[str] = None,
    version: Optional[str] = None,
) -> BinaryFeatureSet:
    acfgs = acfgs or {}
    edges = tuple(fcg_edges)
    nodes = set(acfgs) | {n for edge in edges for n in edge}
    return BinaryFeatureSet(
        binary_id=binary_id,
        strings=frozenset(StringLiteral(s, string_weight(s)) for s in strings),
        exports=frozenset(ExportedName(e) for e in exports),
        acfgs=dict(acfgs),
        fcg=Fcg(nodes=tuple(nodes), edges=edges),
        library=library,
        version=version,
    )


def random_library_unit(
    name: str,
    version: str,
    n_functions: int = 12,
    seed: int = 0,
) -> BinaryFeatureSet:
    """A unit whose functions form one call chain, with distinctive strings and exports."""
    rng = np.random.default_rng(seed)
    ids = [f"{name}_{j:02d}" for j in range(n_functions)]
    acfgs = {fid: random_acfg(fid, rng, n_blocks=int(rng.integers(6, 15))) for fid in ids}
    return make_feature_set(
        f"{name}.so",
        strings=[f"{name}: message number {j}" for j in range(10)],
        exports=[f"{name}_api_{j}" for j in range(5)],
        acfgs=acfgs,
        fcg_edges=[(ids[j], ids[j + 1]) for j in range(n_functions - 1)],
        library=name,
        version=version,
    )


@pytest.fixture
def elf_builder():
    return build_elf


@pytest.fixture
def feature_set_factory():
    return make_feature_set


@pytest.fixture
def acfg_factory():
    return chain_acfg


@pytest.fixture
def unit_factory():
    return random_library_unit


@pytest.fixture(scope="session")
def small_corpus_spec() -> CorpusSpec:
    return CorpusSpec(
        seed=7,
        libraries=6,
        versions=2,
        functions_per_unit=16,
        strings_per_unit=12,
        exports_per_unit=8,
        targets=4,
        fan_in=2,
        junk_functions=6,
        junk_strings=4,
    )


@pytest.fixture(scope="session")
def small_corpus(small_corpus_spec):
    return generate_corpus(small_corpus_spec)
