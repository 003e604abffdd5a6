"""TPL feature database: inverted index, vector store and their persistence."""

from bintpl.featuredb.database import TplDatabase, UnitPayload, UnitRef, default_unit_id
from bintpl.featuredb.index import EXPORT, STRING, InvertedIndex, UnitTotals
from bintpl.featuredb.vectors import VectorStore

__all__ = [
    "TplDatabase",
    "UnitRef",
    "UnitPayload",
    "InvertedIndex",
    "UnitTotals",
    "VectorStore",
    "STRING",
    "EXPORT",
    "default_unit_id",
]
