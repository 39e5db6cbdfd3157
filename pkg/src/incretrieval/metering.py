"""Exact bit accounting of a retrieval structure.

Every component of :class:`SpaceReport` is computed from in-memory state
and corresponds one-to-one with a snapshot section, so ``total`` plus the
declared byte padding equals the snapshot length in bits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import poisson

from .errors import DegenerateGrid
from .params import RetrievalConfig, derive_schedule
from .snapshot import FILE_HEADER_BITS, SECTION_HEADER_BITS, SECTIONS

CONF_BITS = 64 + 7 + 7 + 32 + 32 + 64 + 8 + 8 + 64 + 1 + 64 + 1
STAT_BITS = 8 + 64 + 64 + 8

COMPONENTS = ("value_slots", "occupancy_index", "directory_headers", "directory_fps",
              "directory_offsets", "directory_round_tags", "reducer_indices", "collision_store",
              "hash_descriptions", "fixed_overhead")

# snapshot section holding each component; fixed_overhead covers the rest
SECTION_OF = {
    "value_slots": "VALS",
    "occupancy_index": "OCCU",
    "directory_headers": "DHDR",
    "directory_fps": "DFPS",
    "directory_offsets": "DOFF",
    "directory_round_tags": "DTAG",
    "reducer_indices": "REDU",
    "collision_store": "COLL",
    "hash_descriptions": "HASH",
}
FIXED_SECTIONS = ("CONF", "SCHD", "STAT")


def schedule_bits(rounds: int) -> int:
    return 8 + 8 + rounds * (64 + 8) + 8 + 1


@dataclass(frozen=True)
class SpaceReport:
    value_slots: int
    occupancy_index: int
    directory_headers: int
    directory_fps: int
    directory_offsets: int
    directory_round_tags: int
    reducer_indices: int
    collision_store: int
    hash_descriptions: int
    fixed_overhead: int
    n_inserted: int
    value_bits: int
    padding: int
    collisions: int = 0
    mean_log_offset: float = 0.0

    @property
    def total(self) -> int:
        return sum(getattr(self, c) for c in COMPONENTS)

    @property
    def redundancy(self) -> int:
        return self.total - self.n_inserted * self.value_bits

    @property
    def redundancy_per_key(self) -> float:
        return self.redundancy / self.n_inserted if self.n_inserted else float("nan")

    @property
    def collision_fraction(self) -> float:
        return self.collisions / self.n_inserted if self.n_inserted else 0.0

    @property
    def snapshot_bits(self) -> int:
        return self.total + self.padding

    def components(self) -> dict:
        return {c: getattr(self, c) for c in COMPONENTS}

    def envelope(self, c1: float, c2: float) -> float:
        """``n v + c1 n + c2 n log2(log2 n / v)`` evaluated at this report's size."""
        n = self.n_inserted
        return n * self.value_bits + n * envelope_feature(n, self.value_bits, c1, c2)

    def to_text(self) -> str:
        lines = [f"{k}={v}" for k, v in asdict(self).items()]
        lines += [f"total={self.total}", f"redundancy={self.redundancy}"]
        return "\n".join(lines) + "\n"


def envelope_feature(n: int, v: int, c1: float = 0.0, c2: float = 1.0) -> float:
    return c1 + c2 * loglog_term(n, v)


def loglog_term(n: int, v: int) -> float:
    """``max(log2(log2 n / v), 0)``; the clamp covers ``v >= log2 n``."""
    return max(math.log2(math.log2(n) / v), 0.0)


def _byte_pad(bits: int) -> int:
    return -bits % 8


def measure(ir) -> SpaceReport:
    cfg = ir.cfg
    v = cfg.value_bits
    d = ir.directory
    stores = [ir.stores[j] for j in sorted(ir.stores)]
    budget = cfg.reducer_budget
    comp = {
        "value_slots": sum(s.slots * v for s in stores),
        "occupancy_index": sum(s.index_bits for s in stores),
        "directory_headers": d.headers_total,
        "directory_fps": d.fps_total,
        "directory_offsets": d.offset_bits,
        "directory_round_tags": d.tag_bits,
        "reducer_indices": sum(e.encoded_bits(budget) for e in ir.reducer_entries()),
        "collision_store": ir.collisions.encoded_bits,
        "hash_descriptions": ir.hashes.description_bits
        + sum(s.hash.description_bits for s in stores),
    }
    fixed = {"CONF": CONF_BITS, "SCHD": schedule_bits(ir.schedule.rounds), "STAT": STAT_BITS}
    comp["fixed_overhead"] = (FILE_HEADER_BITS + SECTION_HEADER_BITS * len(SECTIONS)
                              + sum(fixed.values()))
    padding = (sum(_byte_pad(comp[c]) for c in SECTION_OF)
               + sum(_byte_pad(b) for b in fixed.values()))
    offs = [p for bucket in d.offsets for p in bucket]
    mlo = float(np.mean(np.log2(1 + np.asarray(offs, dtype=float)))) if offs else 0.0
    return SpaceReport(**comp, n_inserted=ir.inserted, value_bits=v, padding=padding,
                       collisions=len(ir.collisions), mean_log_offset=mlo)


def audit(ir, data: bytes | None = None) -> dict:
    """Compare every component with the matching snapshot section.

    Returns ``{name: (measured, recounted)}`` for every line item, including
    ``padding`` and ``total``.
    """
    from .snapshot import dumps, section_bits

    rep = measure(ir)
    secs = section_bits(dumps(ir) if data is None else data)
    out = {c: (getattr(rep, c), secs[s]) for c, s in SECTION_OF.items()}
    out["fixed_overhead"] = (rep.fixed_overhead,
                             secs["headers"] + sum(secs[s] for s in FIXED_SECTIONS))
    out["padding"] = (rep.padding, secs["padding"])
    file_bits = secs["headers"] + sum(secs[s] for s in SECTIONS) + secs["padding"]
    out["total"] = (rep.snapshot_bits, file_bits)
    return out


def fit_envelope(points):
    """Least-squares fit of redundancy per key against ``[1, log2(log2 n / v)]``.

    ``points`` holds SpaceReports or ``(n, v, redundancy_per_key)`` triples.
    Returns ``(c1, c2, residual)`` where residual is the RMS error relative
    to the mean redundancy per key.
    """
    rows = []
    for p in points:
        if isinstance(p, SpaceReport):
            rows.append((p.n_inserted, p.value_bits, p.redundancy_per_key))
        else:
            rows.append(tuple(p))
    if len(rows) < 6:
        raise DegenerateGrid(f"need at least 6 grid points, got {len(rows)}")
    x = np.array([loglog_term(n, v) for n, v, _ in rows])
    y = np.array([r for _, _, r in rows], dtype=float)
    A = np.column_stack([np.ones_like(x), x])
    if np.linalg.matrix_rank(A) < 2:
        raise DegenerateGrid("all grid points share the same log2(log2 n / v)")
    (c1, c2), *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([c1, c2]) - y) ** 2)))
    mean = float(np.mean(y))
    residual = rms / abs(mean) if mean else float("inf")
    return float(c1), float(c2), residual


def expected_collision_fraction(cfg: RetrievalConfig, steps: int = 4096) -> float:
    """Mean-field estimate of the fraction of keys diverted to the collision store.

    Every stored key of a bucket carries distinct fingerprints at every width
    its bucket has passed through, keys inserted after a reduction included.
    A new key survives level ``l`` (range ``B 2^w_l``) unless its image there
    lands on one of the ``S`` stored images, so it is kept with probability
    ``prod_l (1 - S / (B 2^w_l))``.  Transitions that keep the width are
    identities and add no level.  The bucket-full term is the Poisson tail of
    the bucket load at capacity.  Oversized offsets are not modelled; at the
    default threshold they occur with negligible probability.
    """
    sched = derive_schedule(cfg)
    nb = cfg.num_buckets
    B = cfg.bucket_size
    cap = cfg.bucket_capacity
    stored = 0.0
    diverted = 0.0
    ranges = []  # fingerprint range of every level in the chain
    for j in range(1, sched.rounds + 1):
        m = sched.capacities[j - 1]
        if m == 0:
            continue
        w = sched.start_bits if not ranges else sched.fp_bits[j - 1]
        if not ranges or ranges[-1] != B << w:
            ranges.append(B << w)
        chunk = max(1, m // steps)
        done = 0
        while done < m:
            c = min(chunk, m - done)
            load = stored / nb
            q_fp = 1 - math.prod(1 - load / r for r in ranges)
            q_full = float(poisson.sf(cap - 1, load)) if load > 0 else 0.0
            q = 1 - (1 - q_fp) * (1 - q_full)
            diverted += c * q
            stored += c * (1 - q)
            done += c
    return diverted / cfg.n_max


def binomial_sigma(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)


__all__ = ["SpaceReport", "measure", "audit", "fit_envelope", "expected_collision_fraction",
           "binomial_sigma", "loglog_term", "COMPONENTS"]
