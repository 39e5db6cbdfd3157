"""Oracles: a plain shadow map and a direct small-n global-table algorithm.

The global-table oracle (the ``alg1_*`` functions) keeps one fingerprint
table per round and re-keys the whole table at each round change, using
scratch memory freely.
It shares only the hashing primitives with the production structure, so
agreement between the two is a real cross-check of the bucketed directory,
the value stores and the offset bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CapacityExceeded, SearchExhausted
from .hashing import (LABEL_FINGERPRINT, LABEL_REDUCER, derive_seed, make_hash, reduce_fp,
                      trial_base, trial_key)
from .params import RetrievalConfig, derive_schedule

ALG1_MAX_N = 1 << 10


class ShadowMap(dict):
    """Ground truth: an exact key to value map."""

    def insert(self, key, value):
        self[key] = value

    def update(self, key, value):
        self[key] = value

    def query(self, key):
        return self.get(key, 0)


@dataclass
class Algorithm1State:
    cfg: RetrievalConfig
    round: int
    table: dict = field(default_factory=dict)  # current fingerprint -> value
    seeds: list = field(default_factory=list)  # (round, trial index, to_bits, key or None)
    collisions: dict = field(default_factory=dict)
    inserted: int = 0
    round_inserted: int = 0

    def __post_init__(self):
        self.schedule = derive_schedule(self.cfg)
        self.fp_hash = _initial_fp(self.cfg, self.schedule.start_bits)

    @property
    def diverted(self) -> set:
        return set(self.collisions)


def _initial_fp(cfg, start_bits):
    # one bucket, so the bucket-local range is n_max * 2^t
    return make_hash(cfg.hash_family, derive_seed(cfg.master_seed, LABEL_FINGERPRINT),
                     cfg.n_max << start_bits, cfg.universe_bits, cfg.bucket_size)


def _global_search(fps, out_range, base, budget):
    for s in range(budget):
        key = trial_key(base, s)
        seen = set()
        for f in fps:
            h = reduce_fp(f, key, out_range)
            if h in seen:
                break
            seen.add(h)
        else:
            return s, key
    raise SearchExhausted(len(fps), out_range, budget)


def _check_small(cfg):
    if cfg.n_max > ALG1_MAX_N:
        raise ValueError(f"the global oracle is limited to n <= {ALG1_MAX_N}")
    if cfg.bucket_size != cfg.n_max:
        raise ValueError("the global oracle needs bucket_size == n_max (one bucket)")


def alg1_new(cfg: RetrievalConfig) -> Algorithm1State:
    _check_small(cfg)
    return Algorithm1State(cfg, derive_schedule(cfg).start_round)


def _advance(st: Algorithm1State, sched) -> None:
    # re-keys the whole table at once; scratch memory is not a concern here
    cfg = st.cfg
    nxt = sched.next_round(st.round)
    if nxt is None:
        raise CapacityExceeded("no round left")
    to_bits = sched.fp_bits[nxt - 1]
    width = sched.start_bits if not st.seeds else st.seeds[-1][2]
    if to_bits == width:
        st.seeds.append((nxt, 0, to_bits, None))
    else:
        base = trial_base(derive_seed(cfg.master_seed, LABEL_REDUCER), nxt, 0)
        fps = list(st.table)
        out_range = cfg.n_max << to_bits
        if len(fps) <= 1:
            s, key = 0, trial_key(base, 0)
        else:
            s, key = _global_search(fps, out_range, base, cfg.reducer_budget)
        st.table = {reduce_fp(f, key, out_range): y for f, y in st.table.items()}
        st.seeds.append((nxt, s, to_bits, key))
    st.round = nxt
    st.round_inserted = 0


def alg1_fingerprint(st: Algorithm1State, key: int) -> int:
    fp = st.fp_hash(key)
    for _, _, to_bits, rkey in st.seeds:
        if rkey is not None:
            fp = reduce_fp(fp, rkey, st.cfg.n_max << to_bits)
    return fp


def alg1_insert(st: Algorithm1State, key: int, value: int) -> None:
    cfg = st.cfg
    sched = st.schedule
    if st.inserted >= cfg.n_max:
        raise CapacityExceeded("oracle is full")
    while st.round_inserted >= sched.capacities[st.round - 1]:
        _advance(st, sched)
    fp = alg1_fingerprint(st, key)
    st.inserted += 1
    st.round_inserted += 1
    if fp in st.table:
        st.collisions[key] = value
    else:
        st.table[fp] = value


def alg1_update(st: Algorithm1State, key: int, value: int) -> None:
    if key in st.collisions:
        st.collisions[key] = value
        return
    fp = alg1_fingerprint(st, key)
    if fp in st.table:
        st.table[fp] = value


def alg1_query(st: Algorithm1State, key: int) -> int:
    if key in st.collisions:
        return st.collisions[key]
    return st.table.get(alg1_fingerprint(st, key), 0)


def alg1_build(cfg: RetrievalConfig, stream) -> Algorithm1State:
    """Run the global-table algorithm over ``(key, value)`` pairs."""
    st = alg1_new(cfg)
    for key, value in stream:
        alg1_insert(st, key, value)
    return st
