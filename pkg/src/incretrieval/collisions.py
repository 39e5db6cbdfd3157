"""Explicit key-value store for keys the fingerprint path cannot hold."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import DuplicateKey

COUNT_BITS = 64
REASON_BITS = 2


class Reason(enum.IntEnum):
    FINGERPRINT_COLLISION = 0
    BUCKET_FULL = 1
    OFFSET_TOO_LARGE = 2


@dataclass
class CollisionRecord:
    key: int
    value: int
    reason: Reason


class CollisionStore:
    """Backed by a dict; metered as a sorted record array.

    The serialized layout is a 64-bit count followed by ``(key, value,
    reason)`` records of ``universe_bits + value_bits + 2`` bits each.
    """

    def __init__(self, universe_bits: int, value_bits: int):
        self.universe_bits = universe_bits
        self.value_bits = value_bits
        self._records: dict[int, CollisionRecord] = {}

    def __len__(self):
        return len(self._records)

    def __contains__(self, key):
        return key in self._records

    def insert(self, key: int, value: int, reason: Reason) -> None:
        if key in self._records:
            raise DuplicateKey(key)
        self._records[key] = CollisionRecord(key, value, Reason(reason))

    def lookup(self, key: int):
        """The stored value, or None when ``key`` is absent."""
        rec = self._records.get(key)
        return None if rec is None else rec.value

    def update(self, key: int, value: int) -> bool:
        rec = self._records.get(key)
        if rec is None:
            return False
        rec.value = value
        return True

    def record(self, key: int):
        return self._records.get(key)

    def records(self):
        """Records in key order (the serialized order)."""
        return [self._records[k] for k in sorted(self._records)]

    def reason_counts(self) -> dict:
        out = {r: 0 for r in Reason}
        for rec in self._records.values():
            out[rec.reason] += 1
        return out

    @property
    def record_bits(self) -> int:
        return self.universe_bits + self.value_bits + REASON_BITS

    @property
    def encoded_bits(self) -> int:
        return COUNT_BITS + len(self._records) * self.record_bits
