"""Seeded hash families.

Two interchangeable families sit behind one call interface:

* :class:`MixHash` - a seeded splitmix64-style mixer (default; fast).
* :class:`PolyHash` - a degree ``k - 1`` polynomial over a Mersenne prime
  field, exactly ``k``-wise independent.  Used for the per-round value-store
  hash (``k = 5``) and, opt-in, for the bucket and fingerprint hashes.

Ranges are reduced with a 32x32 multiply-high so the scalar and the numpy
batch paths agree bit for bit; every range must therefore be at most 2^32.
"""

from __future__ import annotations

import random
from functools import lru_cache

import numpy as np

from .errors import ChainError, RangeError

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MAX_RANGE = 1 << 32
MERSENNE_61 = (1 << 61) - 1
MERSENNE_127 = (1 << 127) - 1

# labels for seeds derived from the master seed
LABEL_BUCKET = 1
LABEL_FINGERPRINT = 2
LABEL_REDUCER = 3
LABEL_VALUE = 4


def mix64(x: int) -> int:
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix64_np(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint64)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def fastrange(x: int, r: int) -> int:
    return ((x >> 32) * r) >> 32


def fastrange_np(x: np.ndarray, r: int) -> np.ndarray:
    return ((x >> np.uint64(32)) * np.uint64(r)) >> np.uint64(32)


def derive_seed(master: int, label: int, index: int = 0) -> int:
    """Sub-seed for a labelled component; independent-looking across labels."""
    s = mix64((master + GOLDEN * (label + 1)) & MASK64)
    return mix64((s ^ mix64((index + 1) * GOLDEN & MASK64)) & MASK64)


def _fold(x: int, seed: int) -> int:
    # keys wider than 64 bits are folded one word at a time
    h = seed
    while True:
        h = mix64((h ^ (x & MASK64)) + GOLDEN & MASK64)
        x >>= 64
        if not x:
            return h


def _check_range(r: int) -> None:
    if not 1 <= r <= MAX_RANGE:
        raise RangeError(f"hash range {r} outside [1, 2^32]")


class MixHash:
    """Seeded pseudorandom function ``[2^domain_bits] -> [range]``."""

    def __init__(self, seed: int, range_: int, domain_bits: int = 64):
        _check_range(range_)
        self.seed = seed & MASK64
        self.range = range_
        self.domain_bits = domain_bits
        self.independence = None

    def __call__(self, x: int) -> int:
        if x >> self.domain_bits or x < 0:
            raise RangeError(f"input {x} outside [2^{self.domain_bits}]")
        if self.domain_bits <= 64:
            return fastrange(mix64(x ^ self.seed), self.range)
        return fastrange(_fold(x, self.seed), self.range)

    @property
    def description_bits(self) -> int:
        return 64


class PolyHash:
    """``k``-wise independent polynomial hash over a Mersenne prime field."""

    def __init__(self, seed: int, range_: int, k: int, domain_bits: int = 61):
        _check_range(range_)
        if k < 1:
            raise ValueError("independence k must be positive")
        self.prime = MERSENNE_61 if domain_bits <= 60 else MERSENNE_127
        self.pbits = self.prime.bit_length()
        rng = random.Random(seed)
        self.coeffs = tuple(rng.randrange(self.prime) for _ in range(k))
        self.range = range_
        self.domain_bits = domain_bits
        self.independence = k

    @classmethod
    def from_coeffs(cls, coeffs, range_: int, domain_bits: int):
        self = cls.__new__(cls)
        _check_range(range_)
        self.prime = MERSENNE_61 if domain_bits <= 60 else MERSENNE_127
        self.pbits = self.prime.bit_length()
        self.coeffs = tuple(coeffs)
        self.range = range_
        self.domain_bits = domain_bits
        self.independence = len(self.coeffs)
        return self

    def raw(self, x: int) -> int:
        p = self.prime
        acc = 0
        for a in self.coeffs:
            acc = (acc * x + a) % p
        return acc

    def __call__(self, x: int) -> int:
        if x >> self.domain_bits or x < 0:
            raise RangeError(f"input {x} outside [2^{self.domain_bits}]")
        return (self.raw(x) * self.range) >> self.pbits

    @property
    def description_bits(self) -> int:
        return self.independence * self.pbits


def make_hash(family: str, seed: int, range_: int, domain_bits: int, k: int):
    if family == "poly":
        return PolyHash(seed, range_, k, domain_bits)
    return MixHash(seed, range_, domain_bits)


# -- reduction primitive ------------------------------------------------------

def trial_base(stream_seed: int, round_: int, bucket: int) -> int:
    return mix64((mix64((stream_seed ^ (round_ * GOLDEN)) & MASK64) + bucket * GOLDEN) & MASK64)


def trial_bases_np(stream_seed: int, round_: int, buckets: np.ndarray) -> np.ndarray:
    head = np.uint64(mix64((stream_seed ^ (round_ * GOLDEN)) & MASK64))
    return mix64_np(head + np.asarray(buckets, dtype=np.uint64) * np.uint64(GOLDEN))


def trial_key(base: int, trial: int) -> int:
    """Key of reducer trial ``trial``: the splitmix64 stream started at ``base``."""
    return mix64((base + (trial + 1) * GOLDEN) & MASK64)


def trial_keys_np(base: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64_np(np.uint64(base) + idx * np.uint64(GOLDEN))


def reduce_fp(fp: int, key: int, out_range: int) -> int:
    return fastrange(mix64(fp ^ key), out_range)


def reduce_fp_np(fps: np.ndarray, keys: np.ndarray, out_range: int) -> np.ndarray:
    """Images of ``fps`` (shape ``(s,)``) under every key in ``keys`` (shape ``(K,)``)."""
    return fastrange_np(mix64_np(keys[:, None] ^ fps[None, :]), out_range)


def compose_reduce(initial_fp: int, chain, upto: int) -> int:
    """Fingerprint at stage ``upto`` of a bucket's reduction chain.

    Stage 1 is the initial fingerprint; stage ``j`` applies ``chain[0:j-1]``
    in order.  Each chain element must provide ``apply(fp)``.
    """
    if upto < 1:
        raise ChainError(f"stage must be at least 1, got {upto}")
    if len(chain) < upto - 1:
        raise ChainError(f"chain has {len(chain)} reducers, stage {upto} needs {upto - 1}")
    fp = initial_fp
    for entry in chain[:upto - 1]:
        fp = entry.apply(fp)
    return fp


# -- the hashes of one structure ---------------------------------------------

class HashSuite:
    """Every hash function a structure built from ``cfg`` uses."""

    def __init__(self, cfg, start_bits: int):
        self.cfg = cfg
        fam = cfg.hash_family
        u = cfg.universe_bits
        self.bucket_hash = make_hash(fam, derive_seed(cfg.master_seed, LABEL_BUCKET),
                                     cfg.num_buckets, u, cfg.bucket_size)
        self.fp_range = cfg.bucket_size << start_bits
        self.fp_hash = make_hash(fam, derive_seed(cfg.master_seed, LABEL_FINGERPRINT),
                                 self.fp_range, u, cfg.bucket_size)
        self.reducer_seed = derive_seed(cfg.master_seed, LABEL_REDUCER)

    def value_hash(self, round_: int, slots: int) -> PolyHash:
        return PolyHash(derive_seed(self.cfg.master_seed, LABEL_VALUE, round_), slots, 5,
                        self.cfg.universe_bits)

    def check_key(self, key: int) -> None:
        if key < 0 or key >> self.cfg.universe_bits:
            raise RangeError(f"key {key} outside universe [2^{self.cfg.universe_bits}]")

    def bucket_of(self, key: int) -> int:
        return self.bucket_hash(key)

    def initial_fingerprint(self, key: int) -> int:
        return self.fp_hash(key)

    @property
    def description_bits(self) -> int:
        return self.bucket_hash.description_bits + self.fp_hash.description_bits + 64


@lru_cache(maxsize=32)
def suite_for(cfg) -> HashSuite:
    from .params import derive_schedule
    return HashSuite(cfg, derive_schedule(cfg).start_bits)


def bucket_of(key: int, cfg) -> int:
    """Bucket index of ``key`` in ``[ceil(n_max / B)]``."""
    suite = suite_for(cfg)
    suite.check_key(key)
    return suite.bucket_of(key)


def initial_fingerprint(key: int, cfg) -> int:
    """Bucket-local fingerprint of ``key`` in ``[B * 2^start_bits]``."""
    suite = suite_for(cfg)
    suite.check_key(key)
    return suite.initial_fingerprint(key)
