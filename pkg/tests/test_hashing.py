import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from incretrieval.errors import ChainError, RangeError
from incretrieval.hashing import (MixHash, PolyHash, bucket_of, compose_reduce, fastrange,
                                  fastrange_np, initial_fingerprint, mix64, mix64_np,
                                  reduce_fp, reduce_fp_np, suite_for, trial_keys_np, trial_key,
                                  trial_base)
from incretrieval.params import RetrievalConfig, derive_schedule
from incretrieval.reducer import ReducerEntry, apply_reduction

CFG = RetrievalConfig(n_max=1 << 16, value_bits=8)


def test_bucket_of_deterministic_and_in_range():
    rng = random.Random(1)
    for _ in range(1000):
        k = rng.getrandbits(CFG.universe_bits)
        b = bucket_of(k, CFG)
        assert b == bucket_of(k, CFG)
        assert 0 <= b < CFG.num_buckets


def test_single_bucket():
    cfg = RetrievalConfig(n_max=64, value_bits=4, bucket_size=64)
    assert {bucket_of(k, cfg) for k in range(500)} == {0}


def test_key_outside_universe():
    with pytest.raises(RangeError):
        bucket_of(1 << CFG.universe_bits, CFG)
    with pytest.raises(RangeError):
        initial_fingerprint(-1, CFG)


def test_max_bucket_load_tail():
    n, B = 1 << 20, 32
    cfg = RetrievalConfig(n_max=n, value_bits=8, bucket_size=B)
    h = suite_for(cfg).bucket_hash
    rng = random.Random(7)
    loads = np.bincount([h(rng.getrandbits(cfg.universe_bits)) for _ in range(10 ** 6)],
                        minlength=cfg.num_buckets)
    mean = 10 ** 6 / cfg.num_buckets
    assert loads.max() <= mean + 6 * math.sqrt(B * math.log(n / B))


def test_initial_fingerprint_range_and_pair_collisions():
    start = derive_schedule(CFG).start_bits
    r = CFG.bucket_size << start
    rng = random.Random(3)
    trials = 10 ** 5
    hits = 0
    for _ in range(trials):
        a, b = rng.getrandbits(48), rng.getrandbits(48)
        fa, fb = initial_fingerprint(a, CFG), initial_fingerprint(b, CFG)
        assert 0 <= fa < r
        hits += fa == fb
    p = 1 / r
    assert abs(hits - trials * p) <= 3 * math.sqrt(trials * p * (1 - p)) + 1


def test_degenerate_range():
    h = MixHash(5, 1, 40)
    assert {h(k) for k in range(200)} == {0}
    assert {PolyHash(5, 1, 3, 40)(k) for k in range(200)} == {0}


@pytest.mark.parametrize("family", ["mix", "poly"])
def test_chi_square_uniformity(family):
    r = 64
    h = MixHash(11, r, 48) if family == "mix" else PolyHash(11, r, 5, 48)
    rng = random.Random(0)
    counts = np.bincount([h(rng.getrandbits(48)) for _ in range(1 << 16)], minlength=r)
    assert chisquare(counts).pvalue > 0.001


def test_poly_hash_wide_universe_uses_large_prime():
    h = PolyHash(1, 1000, 5, 100)
    assert h.pbits == 127
    assert 0 <= h((1 << 100) - 1) < 1000
    assert h.description_bits == 5 * 127


def test_poly_hash_matches_horner_oracle():
    h = PolyHash(9, 1 << 20, 5, 48)
    p = (1 << 61) - 1
    for x in (0, 1, 12345, (1 << 48) - 1):
        acc = sum(a * pow(x, len(h.coeffs) - 1 - i, p) for i, a in enumerate(h.coeffs)) % p
        assert h(x) == (acc * (1 << 20)) >> 61


def test_poly_from_coeffs_round_trip():
    h = PolyHash(4, 999, 5, 48)
    g = PolyHash.from_coeffs(h.coeffs, 999, 48)
    assert all(g(x) == h(x) for x in range(100))


def test_numpy_variants_agree():
    xs = [random.Random(2).getrandbits(64) for _ in range(200)]
    arr = np.array(xs, dtype=np.uint64)
    assert [int(x) for x in mix64_np(arr)] == [mix64(x) for x in xs]
    assert [int(x) for x in fastrange_np(arr, 12345)] == [fastrange(x, 12345) for x in xs]
    base = trial_base(3, 2, 7)
    keys = trial_keys_np(base, 5, 4)
    assert [int(k) for k in keys] == [trial_key(base, s) for s in range(5, 9)]
    fps = np.array([1, 2, 3, 400], dtype=np.uint64)
    got = reduce_fp_np(fps, keys, 512)
    assert got.shape == (4, 4)
    assert int(got[2, 3]) == reduce_fp(400, trial_key(base, 7), 512)


def _entry(round_, s, frm, to, bucket=0, B=8):
    return ReducerEntry(round_, bucket, s, frm, to, 99, B)


def test_compose_upto_one_is_identity():
    assert compose_reduce(123, [], 1) == 123


def test_compose_identity_entry():
    assert compose_reduce(77, [_entry(2, 0, 6, 6)], 2) == 77


def test_compose_chain_too_short():
    with pytest.raises(ChainError):
        compose_reduce(5, [_entry(2, 1, 8, 6)], 3)


@given(st.integers(0, (8 << 10) - 1), st.lists(st.integers(0, 50), min_size=3, max_size=3))
def test_compose_matches_stepwise(fp, seeds):
    chain = [_entry(2, seeds[0], 10, 8), _entry(3, seeds[1], 8, 6), _entry(4, seeds[2], 6, 4)]
    manual = fp
    for j in range(2, 5):
        assert compose_reduce(fp, chain, j) == apply_reduction(compose_reduce(fp, chain, j - 1),
                                                               chain[j - 2])
        manual = apply_reduction(manual, chain[j - 2])
    assert compose_reduce(fp, chain, 4) == manual
