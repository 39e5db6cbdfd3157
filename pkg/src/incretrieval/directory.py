"""Per-bucket fingerprint sets with aligned offsets and round tags.

Encoded layout of one bucket holding ``s`` entries at width ``w``:

* header: ``s`` as a fixed ``capacity.bit_length()``-bit field;
* fingerprints: Elias-Fano, i.e. ``s + B`` upper bits (unary counts of
  ``fp >> w`` for each of the ``B`` high values) followed by ``s * w`` low bits;
* offsets: Elias-gamma of ``p + 1`` per entry, in fingerprint order;
* round tags: ``0`` for the first tag, else ``1`` plus a fixed-width field.

In memory each bucket is three parallel Python lists; only the metered
encoding above is ever serialized.
"""

from __future__ import annotations

import enum
from bisect import bisect_left

from .codes import gamma_length, tag_length
from .errors import InjectivityViolation, RangeError


class InsertStatus(enum.Enum):
    OK = "ok"
    FINGERPRINT_PRESENT = "fingerprint-present"
    BUCKET_FULL = "bucket-full"


class BucketDirectory:
    def __init__(self, num_buckets: int, bucket_size: int, capacity: int, start_bits: int,
                 start_round: int = 1, tag_rounds: int = 1):
        self.num_buckets = num_buckets
        self.bucket_size = bucket_size
        self.capacity = capacity
        self.start_round = start_round
        self.tag_rounds = tag_rounds
        self.header_bits = capacity.bit_length()
        self.fps = [[] for _ in range(num_buckets)]
        self.offsets = [[] for _ in range(num_buckets)]
        self.tags = [[] for _ in range(num_buckets)]
        self.widths = [start_bits] * num_buckets
        self.count = 0
        self.offset_bits = 0
        self.tag_bits = 0

    def __len__(self):
        return self.count

    def _check(self, b: int, fp: int) -> None:
        if fp < 0 or fp >= self.bucket_size << self.widths[b]:
            raise RangeError(f"fingerprint {fp} outside bucket {b} range "
                             f"[{self.bucket_size} * 2^{self.widths[b]}]")

    def probe(self, b: int, fp: int) -> InsertStatus:
        """What :meth:`insert` would report, without modifying anything."""
        self._check(b, fp)
        fps = self.fps[b]
        i = bisect_left(fps, fp)
        if i < len(fps) and fps[i] == fp:
            return InsertStatus.FINGERPRINT_PRESENT
        if len(fps) >= self.capacity:
            return InsertStatus.BUCKET_FULL
        return InsertStatus.OK

    def insert(self, b: int, fp: int, offset: int, round_: int) -> InsertStatus:
        self._check(b, fp)
        fps = self.fps[b]
        i = bisect_left(fps, fp)
        if i < len(fps) and fps[i] == fp:
            return InsertStatus.FINGERPRINT_PRESENT
        if len(fps) >= self.capacity:
            return InsertStatus.BUCKET_FULL
        fps.insert(i, fp)
        self.offsets[b].insert(i, offset)
        self.tags[b].insert(i, round_)
        self.count += 1
        self.offset_bits += gamma_length(offset + 1)
        self.tag_bits += tag_length(round_ - self.start_round + 1, self.tag_rounds)
        return InsertStatus.OK

    def lookup(self, b: int, fp: int):
        """``(offset, round)`` stored for ``fp`` in bucket ``b``, or None."""
        fps = self.fps[b]
        i = bisect_left(fps, fp)
        if i < len(fps) and fps[i] == fp:
            return self.offsets[b][i], self.tags[b][i]
        return None

    def reduce_bucket(self, b: int, entry) -> None:
        """Re-key bucket ``b`` through ``entry``, keeping offsets and tags aligned."""
        if entry.bucket != b or entry.from_bits != self.widths[b]:
            raise InjectivityViolation(f"reducer for bucket {entry.bucket} at width "
                                       f"{entry.from_bits} applied to bucket {b} at width "
                                       f"{self.widths[b]}")
        fps = self.fps[b]
        if fps and not entry.identity:
            images = [entry.apply(f) for f in fps]
            if len(set(images)) != len(images):
                raise InjectivityViolation(f"reducer for bucket {b} is not injective")
            order = sorted(range(len(images)), key=images.__getitem__)
            self.fps[b] = [images[i] for i in order]
            offs, tags = self.offsets[b], self.tags[b]
            self.offsets[b] = [offs[i] for i in order]
            self.tags[b] = [tags[i] for i in order]
        self.widths[b] = entry.out_bits

    def encoded_bits(self, b: int) -> int:
        s = len(self.fps[b])
        tag_bits = sum(tag_length(t - self.start_round + 1, self.tag_rounds) for t in self.tags[b])
        return (self.header_bits + s + self.bucket_size + s * self.widths[b]
                + sum(gamma_length(p + 1) for p in self.offsets[b]) + tag_bits)

    # -- component totals ----------------------------------------------------

    @property
    def headers_total(self) -> int:
        return self.num_buckets * self.header_bits

    @property
    def fps_total(self) -> int:
        return (self.count + self.num_buckets * self.bucket_size
                + sum(len(f) * w for f, w in zip(self.fps, self.widths)))

    def envelope_bits(self) -> int:
        """The fixed ``8 * B * w`` per-bucket envelope, for comparison only."""
        return sum(8 * self.bucket_size * w for w in self.widths)

    def recount(self) -> tuple[int, int]:
        """Offsets and tag bit totals recomputed from scratch."""
        offs = sum(gamma_length(p + 1) for bucket in self.offsets for p in bucket)
        tags = sum(tag_length(t - self.start_round + 1, self.tag_rounds)
                   for bucket in self.tags for t in bucket)
        return offs, tags

    def check(self) -> None:
        """Assert the structural invariants of every bucket."""
        for b in range(self.num_buckets):
            fps = self.fps[b]
            assert len(fps) == len(self.offsets[b]) == len(self.tags[b]) <= self.capacity, b
            assert all(x < y for x, y in zip(fps, fps[1:])), f"bucket {b} not strictly sorted"
            if fps:
                assert 0 <= fps[0] and fps[-1] < self.bucket_size << self.widths[b], b
