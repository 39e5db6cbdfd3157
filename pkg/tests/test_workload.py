import random

from incretrieval import IncrementalRetrieval, RetrievalConfig
from incretrieval.workload import INSERT, QUERY, UPDATE, Op, distinct_keys, generate, replay


def test_distinct_keys():
    ks = distinct_keys(random.Random(0), 500, 10)
    assert len(set(ks)) == 500 and all(0 <= k < 1024 for k in ks)


def test_generate_shape():
    ops = generate(300, 6, 30, seed=1, extra_ops=200)
    kinds = [o.kind for o in ops]
    assert kinds.count(INSERT) == 300
    assert kinds.count(UPDATE) + kinds.count(QUERY) == 200
    seen = set()
    for o in ops:
        if o.kind == INSERT:
            assert o.key not in seen and o.value < 64
            seen.add(o.key)
        else:
            assert o.key in seen
    assert generate(300, 6, 30, seed=1, extra_ops=200) == ops


class Broken(IncrementalRetrieval):
    def query(self, key):
        return super().query(key) ^ 1


def test_replay_reports_mismatches():
    cfg = RetrievalConfig(n_max=64, value_bits=4)
    ops = generate(64, 4, cfg.universe_bits, 0, extra_ops=10)
    assert replay(IncrementalRetrieval(cfg), ops).ok
    bad = replay(Broken(cfg), ops)
    assert not bad.ok and bad.first_failure.startswith("op ")
    assert bad.mismatches == bad.queries


def test_replay_without_sweep():
    cfg = RetrievalConfig(n_max=8, value_bits=4)
    res = replay(IncrementalRetrieval(cfg), [Op(INSERT, 3, 5)], final_sweep=False)
    assert res.queries == 0 and res.shadow == {3: 5}
