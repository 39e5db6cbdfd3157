"""Incremental retrieval: a key-free map from inserted keys to short values.

The structure answers ``query(k) = f(k)`` for every inserted key while
storing only bucketed fingerprints, linear-probing offsets and round tags
next to the values.  Fingerprints shrink over a schedule of rounds through
per-bucket perfect universe-reducing hash functions.
"""

from .collisions import CollisionStore, Reason
from .errors import (CapacityExceeded, ChainError, ConfigError, DegenerateGrid, DomainError,
                     DuplicateKey, InjectivityViolation, RangeError, RetrievalError,
                     SearchExhausted, SnapshotError, StoreFull)
from .metering import SpaceReport, audit, expected_collision_fraction, fit_envelope, measure
from .params import RetrievalConfig, RoundSchedule, derive_schedule, iterated_log
from .retrieval import IncrementalRetrieval
from .snapshot import dump, dumps, load, loads

__all__ = [
    "IncrementalRetrieval", "RetrievalConfig", "RoundSchedule", "derive_schedule",
    "iterated_log", "SpaceReport", "measure", "audit", "fit_envelope",
    "expected_collision_fraction", "CollisionStore", "Reason", "dump", "dumps", "load", "loads",
    "RetrievalError", "ConfigError", "DomainError", "RangeError", "ChainError",
    "SearchExhausted", "InjectivityViolation", "StoreFull", "DuplicateKey", "CapacityExceeded",
    "DegenerateGrid", "SnapshotError",
]
