import random

import pytest
from hypothesis import given, settings, strategies as st

from incretrieval import (CapacityExceeded, IncrementalRetrieval, RangeError, Reason,
                          RetrievalConfig, measure)
from incretrieval.workload import distinct_keys, generate, replay

SMALL = RetrievalConfig(n_max=1 << 12, value_bits=8, slack=0.5, t_min=2)


def keys(n, bits=27, seed=0):
    rng = random.Random(seed)
    return distinct_keys(rng, n, bits)


def test_fresh_structure():
    ir = IncrementalRetrieval(SMALL)
    assert ir.inserted == 0
    ir.query(12345)  # any answer is allowed; it must not fail
    rep = measure(ir)
    parts = rep.components()
    assert rep.redundancy == rep.total
    assert all(parts[c] == 0 for c in ("value_slots", "occupancy_index", "directory_offsets",
                                       "directory_round_tags", "reducer_indices"))


def test_single_insert_query():
    ir = IncrementalRetrieval(SMALL)
    ir.insert(77, 0xAB)
    assert ir.query(77) == 0xAB


def test_insert_update_query():
    ir = IncrementalRetrieval(SMALL)
    ir.insert(77, 1)
    ir.update(77, 2)
    assert ir.query(77) == 2


def test_range_checks():
    ir = IncrementalRetrieval(SMALL)
    with pytest.raises(RangeError):
        ir.insert(1 << SMALL.universe_bits, 1)
    with pytest.raises(RangeError):
        ir.insert(5, 256)


def test_capacity():
    cfg = RetrievalConfig(n_max=300, value_bits=4, slack=0.5, t_min=2)
    ir = IncrementalRetrieval(cfg)
    for k in keys(300):
        ir.insert(k, k & 15)
    with pytest.raises(CapacityExceeded):
        ir.insert(1, 1)


def test_engineered_fingerprint_collision():
    ir = IncrementalRetrieval(SMALL)
    first = 1
    b, fp = ir.bucket_of(first), ir.fingerprint(first)
    second = next(k for k in range(2, 1 << 24)
                  if ir.bucket_of(k) == b and ir.fingerprint(k) == fp)
    ir.insert(first, 10)
    ir.insert(second, 20)
    assert ir.locate(second) == ("collision", Reason.FINGERPRINT_COLLISION)
    assert ir.query(first) == 10 and ir.query(second) == 20
    ir.update(second, 21)
    assert ir.query(second) == 21


def test_offset_threshold_diverts():
    cfg = RetrievalConfig(n_max=1 << 10, value_bits=4, offset_bits_threshold=1)
    ir = IncrementalRetrieval(cfg)
    shadow = {}
    for k in keys(1 << 10, bits=30):
        ir.insert(k, k & 15)
        shadow[k] = k & 15
    assert ir.collisions.reason_counts()[Reason.OFFSET_TOO_LARGE] > 0
    assert all(ir.query(k) == y for k, y in shadow.items())
    ir.check()


def test_bucket_full_diverts():
    cfg = RetrievalConfig(n_max=1 << 10, value_bits=8, bucket_size=4, bucket_capacity=2)
    ir = IncrementalRetrieval(cfg)
    shadow = {}
    for k in keys(1 << 10, bits=30, seed=3):
        ir.insert(k, k & 255)
        shadow[k] = k & 255
    assert ir.collisions.reason_counts()[Reason.BUCKET_FULL] > 0
    assert all(ir.query(k) == y for k, y in shadow.items())


def test_zero_capacity_rounds_skipped():
    cfg = RetrievalConfig(n_max=1 << 12, value_bits=4, slack=4, t_min=4)
    ir = IncrementalRetrieval(cfg)
    assert ir.schedule.capacities[:2] == (0, 0)
    assert ir.current_round == 3
    for k in keys(1 << 12):
        ir.insert(k, 1)
    assert ir.transitions == []


def test_rounds_only_advance_and_prefix_bound():
    ir = IncrementalRetrieval(SMALL)
    last = ir.current_round
    for k in keys(SMALL.n_max):
        ir.insert(k, 3)
        assert ir.current_round >= last
        assert ir.inserted <= ir.schedule.prefix(ir.current_round)
        last = ir.current_round
    assert len(ir.transitions) == ir.schedule.rounds - ir.schedule.start_round


class Snapshotting(IncrementalRetrieval):
    def __init__(self, cfg):
        super().__init__(cfg)
        self.shadow = {}
        self.checked = 0

    def advance_round(self):
        before = {k: self.query(k) for k in self.shadow}
        super().advance_round()
        for fps in self.directory.fps:
            assert len(set(fps)) == len(fps)
        assert {k: self.query(k) for k in self.shadow} == before
        self.checked += 1


@pytest.mark.parametrize("cfg", [SMALL, RetrievalConfig(n_max=1 << 12, value_bits=6)])
def test_reduction_preserves_answers(cfg):
    ir = Snapshotting(cfg)
    for k in keys(cfg.n_max, seed=5):
        ir.insert(k, k % 61)
        ir.shadow[k] = k % 61
    assert ir.checked == len(ir.transitions) > 0


@pytest.mark.parametrize("v", [1, 4, 8, 16, 20, 64])
def test_exhaustive_oracle_small(v):
    cfg = RetrievalConfig(n_max=1 << 12, value_bits=v, slack=0.5, t_min=2, master_seed=v)
    ir = IncrementalRetrieval(cfg)
    res = replay(ir, generate(cfg.n_max, v, cfg.universe_bits, v, extra_ops=1 << 12))
    assert res.ok, res.first_failure
    ir.check()


def test_ten_thousand_interleavings():
    cfg = RetrievalConfig(n_max=1 << 13, value_bits=8, master_seed=9)
    ir = IncrementalRetrieval(cfg)
    res = replay(ir, generate(cfg.n_max, 8, cfg.universe_bits, 9, extra_ops=10 ** 4))
    assert res.ok and res.queries >= cfg.n_max


@given(st.integers(0, 2 ** 32), st.integers(1, 24), st.sampled_from(["mix", "poly"]))
@settings(max_examples=25, deadline=None)
def test_oracle_property(seed, v, family):
    cfg = RetrievalConfig(n_max=400, value_bits=v, slack=0.5, t_min=2, bucket_size=8,
                          master_seed=seed, hash_family=family)
    ir = IncrementalRetrieval(cfg)
    res = replay(ir, generate(400, v, cfg.universe_bits, seed, extra_ops=400))
    assert res.ok, res.first_failure


def test_memoized_chain_gives_same_answers():
    plain = IncrementalRetrieval(SMALL)
    memo = IncrementalRetrieval(RetrievalConfig(n_max=1 << 12, value_bits=8, slack=0.5, t_min=2,
                                                memoize=True))
    ks = keys(SMALL.n_max, seed=2)
    for k in ks:
        plain.insert(k, k & 255)
        memo.insert(k, k & 255)
    assert all(plain.query(k) == memo.query(k) == k & 255 for k in ks)
    assert plain.collisions.records() == memo.collisions.records()


def test_escaped_bucket_keeps_width_and_answers():
    cfg = RetrievalConfig(n_max=1 << 11, value_bits=8, slack=0.5, t_min=2, reducer_budget=2)
    ir = IncrementalRetrieval(cfg)
    shadow = {}
    for k in keys(cfg.n_max, bits=33, seed=4):
        ir.insert(k, k & 255)
        shadow[k] = k & 255
    escaped = [e for e in ir.reducer_entries() if e.escaped]
    assert escaped
    assert all(ir.query(k) == y for k, y in shadow.items())
    ir.check()


def test_large_universe_keys():
    cfg = RetrievalConfig(n_max=512, value_bits=8, universe_bits=120)
    ir = IncrementalRetrieval(cfg)
    ks = keys(512, bits=120)
    for k in ks:
        ir.insert(k, k & 255)
    assert all(ir.query(k) == k & 255 for k in ks)
