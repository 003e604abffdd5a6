"""Native ELF extractor for bintpl.

Reads the basic features of an ELF binary without disassembling it:
string literals from the read-only and data sections, and exported
function names from the symbol tables. Functions and call graphs are not
recovered here; they arrive through feature manifests.
"""

import io
import logging
import struct
from pathlib import Path
from typing import Optional, Set, Tuple, Union

from elftools.common.exceptions import ELFError, ELFParseError
from elftools.elf.elffile import ELFFile
from elftools.elf.sections import SymbolTableSection

from bintpl.errors import ElfParseError, PartialParseError
from bintpl.extractors.base import FeatureExtractor
from bintpl.features import BinaryFeatureSet, ExportedName, StringLiteral, string_weight

logger = logging.getLogger(__name__)

ELF_MAGIC = b"\x7fELF"
STRING_SECTIONS = (".rodata", ".rodata1", ".data", ".data.rel.ro")
EXPORTED_BINDINGS = ("STB_GLOBAL", "STB_WEAK")
EXPORTED_VISIBILITY = ("STV_DEFAULT", "STV_PROTECTED")


def _check_header(data: bytes) -> None:
    """Validate the identification bytes and header table bounds."""
    if len(data) < 4 or data[:4] != ELF_MAGIC:
        raise ElfParseError("bad ELF magic", 0)
    if len(data) < 6:
        raise ElfParseError("truncated ELF identification", len(data))
    ei_class, ei_data = data[4], data[5]
    if ei_class not in (1, 2):
        raise ElfParseError(f"invalid EI_CLASS {ei_class}", 4)
    if ei_data not in (1, 2):
        raise ElfParseError(f"invalid EI_DATA {ei_data}", 5)

    is64 = ei_class == 2
    endian = "<" if ei_data == 1 else ">"
    header_size = 64 if is64 else 52
    if len(data) < header_size:
        raise ElfParseError(f"ELF header needs {header_size} bytes", len(data))

    if is64:
        e_shoff = struct.unpack_from(endian + "Q", data, 0x28)[0]
        e_shentsize, e_shnum = struct.unpack_from(endian + "HH", data, 0x3A)
    else:
        e_shoff = struct.unpack_from(endian + "I", data, 0x20)[0]
        e_shentsize, e_shnum = struct.unpack_from(endian + "HH", data, 0x2E)
    if e_shoff and e_shoff + e_shentsize * e_shnum > len(data):
        raise ElfParseError("section header table extends past end of file", e_shoff)


def _split_strings(blob: bytes, min_length: int) -> Set[str]:
    """NUL-delimited printable runs of at least min_length characters."""
    found = set()
    for chunk in blob.split(b"\x00"):
        if len(chunk) < min_length:
            continue
        try:
            text = chunk.decode("utf-8")
        except UnicodeDecodeError:
            continue
        if len(text) >= min_length and text.isprintable():
            found.add(text)
    return found


def _exported_symbols(elf: ELFFile) -> Set[str]:
    tables = [s for s in elf.iter_sections() if isinstance(s, SymbolTableSection)]
    dynamic = [s for s in tables if s["sh_type"] == "SHT_DYNSYM"]
    chosen = dynamic or [s for s in tables if s["sh_type"] == "SHT_SYMTAB"]

    names = set()
    for table in chosen:
        if table["sh_entsize"] == 0:
            continue
        for symbol in table.iter_symbols():
            if symbol["st_info"]["type"] != "STT_FUNC":
                continue
            if symbol["st_info"]["bind"] not in EXPORTED_BINDINGS:
                continue
            if symbol["st_shndx"] == "SHN_UNDEF":
                continue
            if symbol["st_other"]["visibility"] not in EXPORTED_VISIBILITY:
                continue
            if symbol.name:
                names.add(symbol.name)
    return names


def extract_elf_basics(
    data: bytes,
    min_length: int = 5,
    weight_cap: float = 50.0,
    special_multiplier: float = 2.0,
) -> Tuple[Set[StringLiteral], Set[ExportedName]]:
    """Extract string literals and exported function names from ELF bytes.

    Args:
        data: Raw ELF file contents
        min_length: Shortest string literal kept
        weight_cap: Cap of the length-based string weight
        special_multiplier: Weight factor for links and paths

    Returns:
        (strings, exports)

    Raises:
        ElfParseError: If the header is malformed (offset of the bad field)
        PartialParseError: If a section lies partly outside the file
    """
    _check_header(data)
    try:
        elf = ELFFile(io.BytesIO(data))
        sections = list(elf.iter_sections())
    except (ELFError, ELFParseError, struct.error) as e:
        raise ElfParseError(f"malformed ELF: {e}", 0) from e

    for section in sections:
        if section["sh_type"] in ("SHT_NOBITS", "SHT_NULL"):
            continue
        offset, size = section["sh_offset"], section["sh_size"]
        if offset + size > len(data):
            raise PartialParseError(section.name, offset, size, max(0, len(data) - offset))

    values: Set[str] = set()
    for section in sections:
        if section.name in STRING_SECTIONS and section["sh_type"] != "SHT_NOBITS":
            values |= _split_strings(section.data(), min_length)

    try:
        export_names = _exported_symbols(elf)
    except (ELFError, ELFParseError, struct.error) as e:
        raise ElfParseError(f"malformed symbol table: {e}", 0) from e

    strings = {StringLiteral(v, string_weight(v, weight_cap, special_multiplier)) for v in values}
    exports = {ExportedName(n) for n in export_names}
    return strings, exports


class ElfExtractor(FeatureExtractor):
    """Basic-feature extractor for native ELF binaries.

    Args:
        min_length: Shortest string literal kept
        weight_cap: Cap of the length-based string weight
        special_multiplier: Weight factor for links and paths
    """

    def __init__(
        self,
        min_length: int = 5,
        weight_cap: float = 50.0,
        special_multiplier: float = 2.0,
        **kwargs
    ):
        super().__init__(
            min_length=min_length,
            weight_cap=weight_cap,
            special_multiplier=special_multiplier,
            **kwargs
        )
        self.min_length = min_length
        self.weight_cap = weight_cap
        self.special_multiplier = special_multiplier

    def get_name(self) -> str:
        return "ELF"

    def get_version(self) -> str:
        try:
            import elftools
            return f"pyelftools-{elftools.__version__}"
        except AttributeError:
            return "unknown"

    def extract(
        self,
        path: Union[str, Path],
        binary_id: Optional[str] = None,
        library: Optional[str] = None,
        version: Optional[str] = None,
    ) -> BinaryFeatureSet:
        path = Path(path)
        data = path.read_bytes()
        strings, exports = extract_elf_basics(
            data,
            min_length=self.min_length,
            weight_cap=self.weight_cap,
            special_multiplier=self.special_multiplier,
        )
        logger.debug(f"{path.name}: {len(strings)} strings, {len(exports)} exports")
        return BinaryFeatureSet(
            binary_id=binary_id or path.name,
            strings=frozenset(strings),
            exports=frozenset(exports),
            library=library,
            version=version,
        )
