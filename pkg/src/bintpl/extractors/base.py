"""Base feature extractor interface for bintpl.

All extractors should inherit from FeatureExtractor.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Union

from bintpl.features import BinaryFeatureSet


class FeatureExtractor(ABC):
    """Abstract base class for feature extractors.

    Each input kind (native ELF, feature manifest, ...) implements this
    interface and produces a BinaryFeatureSet.
    """

    def __init__(self, **kwargs):
        """Initialize the extractor.

        Args:
            **kwargs: Extractor-specific configuration options
        """
        self.config = kwargs

    @abstractmethod
    def get_name(self) -> str:
        """Get the name of this extractor.

        Returns:
            Name string (e.g., "ELF", "manifest")
        """
        pass

    def get_version(self) -> str:
        """Get version information for this extractor.

        Returns:
            Version string
        """
        return "unknown"

    @abstractmethod
    def extract(
        self,
        path: Union[str, Path],
        binary_id: Optional[str] = None,
        library: Optional[str] = None,
        version: Optional[str] = None,
    ) -> BinaryFeatureSet:
        """Extract the features of one binary.

        Args:
            path: Input file
            binary_id: Identifier to use instead of the extractor's default
            library: Library id when the binary is a database unit
            version: Version text when the binary is a database unit

        Returns:
            BinaryFeatureSet

        Raises:
            FileNotFoundError: If the input does not exist
            BintplError: If the input cannot be parsed
        """
        pass

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name={self.get_name()})"
