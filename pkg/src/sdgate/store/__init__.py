"""Document store with rule-based entity resolution."""

from .engine import (
    CorruptStoreError,
    EntityStore,
    MergeReport,
    NotFoundError,
    StoreError,
    StoreSnapshot,
    globalize,
    load,
    persist,
    subgraph,
)
from .resolution import find_match, merge, name_key, r2_pair

__all__ = [
    "CorruptStoreError",
    "EntityStore",
    "MergeReport",
    "NotFoundError",
    "StoreError",
    "StoreSnapshot",
    "find_match",
    "globalize",
    "load",
    "merge",
    "name_key",
    "persist",
    "r2_pair",
    "subgraph",
]
