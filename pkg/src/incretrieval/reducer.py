"""Per-bucket search for perfect universe-reducing hash functions.

Trial ``s`` for bucket ``b`` entering round ``j`` is the function
``f -> fastrange(mix64(f ^ key_s), B * 2^to_bits)`` where ``key_s`` is the
``s``-th output of a splitmix64 stream seeded by ``(stream_seed, j, b)``.
Only the index ``s`` is stored.  When ``from_bits == to_bits`` trial 0 is
the identity, so equal-width transitions cost a single code bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codes import gamma_length
from .errors import RangeError, SearchExhausted
from .hashing import (GOLDEN, MASK64, fastrange_np, mix64_np, reduce_fp, reduce_fp_np, trial_base,
                      trial_bases_np, trial_key, trial_keys_np)

DEFAULT_BUDGET = 1 << 24
_SCALAR_TRIALS = 4
_CHUNK = 256


@dataclass(frozen=True)
class ReducerEntry:
    round: int
    bucket: int
    seed_index: int
    from_bits: int
    to_bits: int
    stream_seed: int
    bucket_size: int
    escaped: bool = False

    def __post_init__(self):
        ident = self.escaped or (self.seed_index == 0 and self.from_bits == self.to_bits)
        object.__setattr__(self, "identity", ident)
        key = 0 if ident else trial_key(trial_base(self.stream_seed, self.round, self.bucket),
                                        self.seed_index)
        object.__setattr__(self, "key", key)

    @property
    def out_bits(self) -> int:
        """Width of the images; an escaped entry keeps the source width."""
        return self.from_bits if self.escaped else self.to_bits

    @property
    def out_range(self) -> int:
        return self.bucket_size << self.out_bits

    def encoded_bits(self, budget: int = DEFAULT_BUDGET) -> int:
        return gamma_length(self.code_value(budget) + 1)

    def code_value(self, budget: int = DEFAULT_BUDGET) -> int:
        """Integer stored for this entry; the budget itself marks an escape."""
        return budget if self.escaped else self.seed_index

    def apply(self, fp: int) -> int:
        return apply_reduction(fp, self)


@lru_cache(maxsize=4096)
def success_probability(size: int, out_range: int) -> float:
    """Probability a uniformly random function is injective on ``size`` points."""
    p = 1.0
    for i in range(size):
        p *= 1 - i / out_range
        if p == 0.0:
            break
    return p


def apply_reduction(fp: int, entry: ReducerEntry) -> int:
    if fp < 0 or fp >= entry.bucket_size << entry.from_bits:
        raise RangeError(f"fingerprint {fp} outside [{entry.bucket_size} * 2^{entry.from_bits}]")
    if entry.identity:
        return fp
    return reduce_fp(fp, entry.key, entry.bucket_size << entry.to_bits)


def _injective(fps, key: int, out_range: int) -> bool:
    seen = set()
    for f in fps:
        h = reduce_fp(f, key, out_range)
        if h in seen:
            return False
        seen.add(h)
    return True


def find_perfect_reduction(fps, from_bits: int, to_bits: int, stream_seed: int, *,
                           round_: int, bucket: int, bucket_size: int,
                           budget: int = DEFAULT_BUDGET) -> ReducerEntry:
    """Smallest trial index whose function maps ``fps`` injectively.

    Raises SearchExhausted when no trial below ``budget`` succeeds.  A search
    whose expected trial count already exceeds the budget fails immediately.
    """
    if to_bits > from_bits:
        raise ValueError(f"reduction must not widen: {from_bits} -> {to_bits}")
    out_range = bucket_size << to_bits
    fps = list(fps)
    size = len(fps)

    def entry(s):
        return ReducerEntry(round_, bucket, s, from_bits, to_bits, stream_seed, bucket_size)

    if size <= 1 or from_bits == to_bits:
        return entry(0)
    p = success_probability(size, out_range)
    if p * budget < 1:
        raise SearchExhausted(size, out_range, budget)

    base = trial_base(stream_seed, round_, bucket)
    for s in range(min(_SCALAR_TRIALS, budget)):
        if _injective(fps, trial_key(base, s), out_range):
            return entry(s)

    arr = np.asarray(fps, dtype=np.uint64)
    chunk = max(1, min(_CHUNK, (1 << 20) // size))
    s = _SCALAR_TRIALS
    while s < budget:
        count = min(chunk, budget - s)
        images = np.sort(reduce_fp_np(arr, trial_keys_np(base, s, count), out_range), axis=1)
        ok = np.all(images[:, 1:] != images[:, :-1], axis=1)
        hit = np.flatnonzero(ok)
        if hit.size:
            return entry(s + int(hit[0]))
        s += count
    raise SearchExhausted(size, out_range, budget)


def find_perfect_reductions(fps_by_bucket, from_bits, to_bits: int, stream_seed: int, *,
                            round_: int, bucket_size: int,
                            budget: int = DEFAULT_BUDGET) -> list:
    """:func:`find_perfect_reduction` for every bucket at once.

    Bucket ``b`` holds ``fps_by_bucket[b]`` at width ``from_bits[b]`` and is
    reduced to ``min(to_bits, from_bits[b])``.  Returns one ReducerEntry per
    bucket, or None where the search is exhausted.  All still-unresolved
    buckets evaluate trial ``s`` together, so the result per bucket is the
    same smallest index the single-bucket search finds.
    """
    nb = len(fps_by_bucket)
    out = [None] * nb
    pending = []
    for b, fps in enumerate(fps_by_bucket):
        frm = from_bits[b]
        to = min(to_bits, frm)
        if len(fps) <= 1 or frm == to:
            out[b] = ReducerEntry(round_, b, 0, frm, to, stream_seed, bucket_size)
        elif success_probability(len(fps), bucket_size << to) * budget >= 1:
            pending.append(b)
    if not pending:
        return out

    out_range = bucket_size << to_bits
    flat = np.fromiter((f for b in pending for f in fps_by_bucket[b]), dtype=np.uint64)
    owner = np.repeat(np.arange(len(pending), dtype=np.int64),
                      [len(fps_by_bucket[b]) for b in pending])
    ids = np.asarray(pending, dtype=np.int64)
    bases = trial_bases_np(stream_seed, round_, ids)
    R = np.uint64(out_range)
    s = 0
    while ids.size and s < budget:
        # a block of trials for every unresolved bucket, about 2^20 images per pass
        K = max(1, min(budget - s, (1 << 20) // flat.size))
        offs = np.arange(s + 1, s + K + 1, dtype=np.uint64) * np.uint64(GOLDEN)
        keys = mix64_np(bases[None, :] + offs[:, None])
        images = fastrange_np(mix64_np(flat[None, :] ^ keys[:, owner]), out_range)
        ranked = np.sort(owner.astype(np.uint64)[None, :] * R + images, axis=1)
        rows, cols = np.nonzero(ranked[:, 1:] == ranked[:, :-1])
        clash = np.zeros((K, ids.size), dtype=bool)
        clash[rows, (ranked[rows, cols + 1] // R).astype(np.int64)] = True
        ok = ~clash
        solved = ok.any(axis=0)
        first = ok.argmax(axis=0)
        for j in np.flatnonzero(solved).tolist():
            b = int(ids[j])
            out[b] = ReducerEntry(round_, b, s + int(first[j]), from_bits[b], to_bits,
                                  stream_seed, bucket_size)
        left = ~solved
        if not left.all():
            keep = left[owner]
            remap = np.cumsum(left) - 1
            flat, owner = flat[keep], remap[owner[keep]]
            ids, bases = ids[left], bases[left]
        s += K
    return out


def escape_entry(from_bits: int, to_bits: int, stream_seed: int, *, round_: int, bucket: int,
                 bucket_size: int) -> ReducerEntry:
    """Identity fallback used when a bucket cannot be reduced within budget."""
    return ReducerEntry(round_, bucket, 0, from_bits, to_bits, stream_seed, bucket_size,
                        escaped=True)
