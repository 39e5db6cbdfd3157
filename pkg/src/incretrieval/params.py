"""Configuration and the round schedule derived from it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError

HASH_FAMILIES = ("mix", "poly")


def iterated_log(x: float, j: int) -> float:
    """Apply ``log2`` to ``x`` exactly ``j`` times.

    Raises DomainError when a logarithm of a non-positive value is needed.
    """
    if j < 0:
        raise DomainError(f"iteration count must be non-negative, got {j}")
    for _ in range(j):
        if x <= 0:
            raise DomainError(f"log2 of non-positive value {x}")
        x = math.log2(x)
    return x


def _ceil(x: float) -> int:
    # absorbs float noise such as 2*log2(4) = 4.000000000000001
    return math.ceil(round(x, 9))


@dataclass(frozen=True)
class RetrievalConfig:
    n_max: int
    value_bits: int
    universe_bits: int | None = None
    bucket_size: int = 32
    bucket_capacity: int | None = None
    slack: float = 2.0
    t_min: int = 6
    offset_bits_threshold: int | None = None
    master_seed: int = 0
    hash_family: str = "mix"
    reducer_budget: int = 1 << 24
    memoize: bool = False

    def __post_init__(self):
        if self.n_max < 2:
            raise ConfigError(f"n_max must be at least 2, got {self.n_max}")
        if not 1 <= self.value_bits <= 64:
            raise ConfigError(f"value_bits must lie in [1, 64], got {self.value_bits}")
        lg = math.log2(self.n_max)
        if self.universe_bits is None:
            object.__setattr__(self, "universe_bits", 3 * math.ceil(lg))
        if self.universe_bits <= lg or self.universe_bits > 125:
            raise ConfigError(f"universe_bits={self.universe_bits} must exceed log2(n_max)={lg:.3f} "
                              "and be at most 125")
        if self.bucket_size < 1:
            raise ConfigError("bucket_size must be positive")
        if self.bucket_capacity is None:
            object.__setattr__(self, "bucket_capacity", 4 * self.bucket_size)
        if self.bucket_capacity < 1:
            raise ConfigError("bucket_capacity must be positive")
        if not self.slack > 0:
            raise ConfigError("slack must be positive")
        if self.t_min < 2:
            raise ConfigError("t_min must be at least 2")
        if self.offset_bits_threshold is None:
            loglog = math.log2(lg) if lg > 1 else 0.0
            object.__setattr__(self, "offset_bits_threshold", max(1, 4 * _ceil(loglog)))
        if self.offset_bits_threshold < 1:
            raise ConfigError("offset_bits_threshold must be positive")
        if self.hash_family not in HASH_FAMILIES:
            raise ConfigError(f"hash_family must be one of {HASH_FAMILIES}")
        if self.reducer_budget < 1:
            raise ConfigError("reducer_budget must be positive")
        object.__setattr__(self, "master_seed", self.master_seed & ((1 << 64) - 1))

    @property
    def num_buckets(self) -> int:
        return -(-self.n_max // self.bucket_size)

    @property
    def log_n(self) -> float:
        return math.log2(self.n_max)


@dataclass(frozen=True)
class RoundSchedule:
    """Per-round insertion capacities and fingerprint widths.

    ``capacities[j - 1]`` and ``fp_bits[j - 1]`` describe round ``j`` for
    ``j = 1 .. ell + 1``.  ``start_round`` is the first round with non-zero
    capacity; keys of that round are fingerprinted at ``start_bits``.
    """

    ell: int
    capacities: tuple[int, ...]
    fp_bits: tuple[int, ...]
    initial_fp_bits: int
    single_round: bool = False
    start_round: int = field(init=False)

    def __post_init__(self):
        start = next((j + 1 for j, c in enumerate(self.capacities) if c > 0), len(self.capacities))
        object.__setattr__(self, "start_round", start)

    @property
    def rounds(self) -> int:
        return self.ell + 1

    @property
    def start_bits(self) -> int:
        return self.initial_fp_bits if self.start_round == 1 else self.fp_bits[self.start_round - 1]

    def width(self, round_: int) -> int:
        """Fingerprint width used by keys inserted in ``round_``."""
        return self.start_bits if round_ == self.start_round else self.fp_bits[round_ - 1]

    def prefix(self, round_: int) -> int:
        return sum(self.capacities[:round_])

    def next_round(self, round_: int) -> int | None:
        """The next round after ``round_`` with non-zero capacity, if any."""
        for j in range(round_ + 1, self.rounds + 1):
            if self.capacities[j - 1] > 0:
                return j
        return None

    @property
    def tag_rounds(self) -> int:
        """Number of distinct round tags a key can carry."""
        return self.rounds - self.start_round + 1


def derive_schedule(cfg: RetrievalConfig) -> RoundSchedule:
    n = cfg.n_max
    v = cfg.value_bits
    lg = math.log2(n)
    x = lg / v

    logs = [float(n)]  # logs[j] = log2 applied j times
    while logs[-1] > 0 and len(logs) < 64:
        logs.append(math.log2(logs[-1]))
    ell = max(j for j in range(1, len(logs)) if logs[j] >= x)

    if logs[ell] <= 1:
        # the final-round iterated log would be non-positive: large-v regime
        return RoundSchedule(ell=0, capacities=(n,), fp_bits=(cfg.t_min,),
                             initial_fp_bits=cfg.t_min, single_round=True)

    fp_bits = [max(cfg.t_min, _ceil(2 * logs[j + 1])) for j in range(1, ell + 1)]
    fp_bits.append(max(cfg.t_min, _ceil(2 * math.log2(x))))

    prefixes = []
    running = 0
    for j in range(1, ell + 1):
        p = math.floor(n * (1 - cfg.slack * logs[j + 1] / v))
        running = max(running, min(max(p, 0), n))
        prefixes.append(running)
    prefixes.append(n)
    capacities = [prefixes[0]] + [prefixes[j] - prefixes[j - 1] for j in range(1, len(prefixes))]

    t0 = max(fp_bits[0], _ceil(2 * math.log2(lg))) if lg > 1 else fp_bits[0]
    return RoundSchedule(ell=ell, capacities=tuple(capacities), fp_bits=tuple(fp_bits),
                         initial_fp_bits=t0)
