import math

import pytest
from hypothesis import given, settings, strategies as st

from incretrieval.errors import ConfigError, DomainError
from incretrieval.params import RetrievalConfig, derive_schedule, iterated_log


def test_iterated_log_examples():
    assert iterated_log(65536, 0) == 65536
    assert iterated_log(65536, 2) == pytest.approx(4.0)
    assert iterated_log(2, 1) == 1.0


def test_iterated_log_domain():
    with pytest.raises(DomainError):
        iterated_log(2, 3)  # log2 2 = 1, log2 1 = 0, log2 0 undefined
    with pytest.raises(DomainError):
        iterated_log(-1.0, 1)


def _oracle_schedule(n, v, c, t_min):
    """Straight transcription of the round formulas, evaluated independently."""
    lg = math.log2(n)
    x = lg / v
    L = [float(n)]
    for _ in range(8):
        L.append(math.log2(L[-1]) if L[-1] > 0 else float("-inf"))
    ell = max(j for j in range(1, 8) if L[j] >= x)
    ts = [max(t_min, math.ceil(2 * L[j + 1] - 1e-9)) for j in range(1, ell + 1)]
    ts.append(max(t_min, math.ceil(2 * math.log2(x) - 1e-9)))
    pre, run = [], 0
    for j in range(1, ell + 1):
        run = max(run, min(n, max(0, math.floor(n * (1 - c * L[j + 1] / v)))))
        pre.append(run)
    pre.append(n)
    caps = [pre[0]] + [b - a for a, b in zip(pre, pre[1:])]
    return ell, tuple(caps), tuple(ts)


def test_schedule_example_v8():
    cfg = RetrievalConfig(n_max=1 << 16, value_bits=8, slack=2, t_min=4)
    s = derive_schedule(cfg)
    assert s.ell == 3
    assert s.fp_bits == (8, 4, 4, 4)
    assert s.capacities == (0, 32768, 16384, 16384)
    assert (s.ell, s.capacities, s.fp_bits) == _oracle_schedule(1 << 16, 8, 2, 4)


def test_schedule_example_v16_single_round():
    s = derive_schedule(RetrievalConfig(n_max=1 << 16, value_bits=16))
    assert s.single_round and s.ell == 0
    assert s.capacities == (65536,)
    assert s.fp_bits == (6,)


def test_schedule_example_v4_clamps():
    s = derive_schedule(RetrievalConfig(n_max=1 << 16, value_bits=4, slack=2, t_min=4))
    assert s.ell == 2
    assert s.capacities == (0, 0, 65536)
    assert s.start_round == 3


GRID = [(1 << e, v) for e in range(10, 25) for v in range(1, 33)]


def test_schedule_invariants_over_grid():
    for n, v in GRID:
        cfg = RetrievalConfig(n_max=n, value_bits=v)
        s = derive_schedule(cfg)
        assert sum(s.capacities) == n
        assert all(c >= 0 for c in s.capacities)
        widths = (s.initial_fp_bits,) + s.fp_bits
        assert all(a >= b for a, b in zip(widths, widths[1:])), (n, v, widths)
        assert widths[-1] >= cfg.t_min
        if not s.single_round:
            assert (s.ell, s.capacities, s.fp_bits) == _oracle_schedule(n, v, cfg.slack, cfg.t_min)


def test_ell_non_decreasing_in_v_within_multi_round():
    # the number of rounds grows with v until the single-round regime takes over
    for e in range(10, 25):
        prev = -1
        for v in range(1, 33):
            s = derive_schedule(RetrievalConfig(n_max=1 << e, value_bits=v))
            if s.single_round:
                break
            assert s.ell >= prev
            prev = s.ell


@given(st.integers(2, 1 << 30), st.integers(1, 64))
@settings(max_examples=200)
def test_deterministic(n, v):
    cfg = RetrievalConfig(n_max=n, value_bits=v)
    assert derive_schedule(cfg) == derive_schedule(RetrievalConfig(n_max=n, value_bits=v))


@pytest.mark.parametrize("kwargs", [
    dict(n_max=1, value_bits=4),
    dict(n_max=100, value_bits=0),
    dict(n_max=100, value_bits=65),
    dict(n_max=100, value_bits=4, t_min=1),
    dict(n_max=1 << 10, value_bits=4, universe_bits=10),
    dict(n_max=100, value_bits=4, hash_family="md5"),
    dict(n_max=100, value_bits=4, slack=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RetrievalConfig(**kwargs)


def test_config_defaults():
    cfg = RetrievalConfig(n_max=1 << 16, value_bits=8)
    assert cfg.universe_bits == 48
    assert cfg.bucket_capacity == 128
    assert cfg.offset_bits_threshold == 16
    assert cfg.num_buckets == 2048
