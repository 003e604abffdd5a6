"""Exception hierarchy for bintpl.

Every error raised by the library derives from BintplError, and also from the
builtin exception callers would naturally catch for that failure.
"""

from typing import Optional, Sequence


class BintplError(Exception):
    """Base class for all bintpl errors."""

    def __reduce__(self):
        # pickle by constructor arguments
        return (type(self), getattr(self, "_init_args", self.args))


class ElfParseError(BintplError, ValueError):
    """Raised when bytes are not a structurally valid ELF file."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at offset {offset:#x})")
        self.offset = offset
        self._init_args = (message, offset)


class PartialParseError(ElfParseError):
    """Raised when a section extends beyond the end of the file."""

    def __init__(self, section: str, offset: int, size: int, available: int):
        super().__init__(
            f"section {section!r} truncated: needs {size} bytes, {available} available",
            offset,
        )
        self.section = section
        self._init_args = (section, offset, size, available)


class ManifestValidationError(BintplError, ValueError):
    """Raised when a manifest does not conform to the schema."""

    def __init__(self, source: str, paths: Sequence[str], details: Sequence[str] = ()):
        lines = [f"invalid manifest {source}:"]
        for i, path in enumerate(paths):
            detail = details[i] if i < len(details) else ""
            lines.append(f"  {path}: {detail}" if detail else f"  {path}")
        super().__init__("\n".join(lines))
        self.source = source
        self.paths = list(paths)
        self._init_args = (source, list(paths), list(details))


class IntegrityError(BintplError, RuntimeError):
    """Raised when stored or loaded data violates a structural invariant."""


class ConflictError(BintplError, ValueError):
    """Raised when a unit id is indexed twice."""


class ShapeError(BintplError, ValueError):
    """Raised when array dimensions do not match the model."""


class DegenerateEmbeddingError(BintplError, ArithmeticError):
    """Raised when a graph vector is zero and cannot be normalized."""

    def __init__(self, function_id: Optional[str] = None):
        what = f"function {function_id!r}" if function_id else "graph"
        super().__init__(f"degenerate embedding for {what}: zero vector before normalization")
        self.function_id = function_id
        self._init_args = (function_id,)


class DomainError(BintplError, ValueError):
    """Raised when an operation is undefined for its input (e.g. cosine of a zero vector)."""


class ConfigurationError(BintplError, ValueError):
    """Raised for invalid configuration or unusable inputs to a command."""


class VersionParseError(BintplError, ValueError):
    """Raised when version text contains no numeric component."""
