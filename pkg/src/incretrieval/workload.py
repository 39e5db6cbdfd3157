"""Seeded workloads and their replay against a shadow map."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .reference import ShadowMap

INSERT, UPDATE, QUERY = "insert", "update", "query"


@dataclass(frozen=True)
class Op:
    kind: str
    key: int
    value: int = 0


def distinct_keys(rng: random.Random, count: int, universe_bits: int) -> list[int]:
    seen = set()
    out = []
    while len(out) < count:
        k = rng.getrandbits(universe_bits)
        if k not in seen:
            seen.add(k)
            out.append(k)
    return out


def generate(n: int, value_bits: int, universe_bits: int, seed: int, extra_ops: int = 0,
             update_share: float = 0.5) -> list[Op]:
    """``n`` inserts of distinct keys with ``extra_ops`` updates and queries mixed in.

    Each extra operation targets a uniformly chosen key inserted before it;
    ``update_share`` of them are updates, the rest queries.
    """
    rng = random.Random(seed)
    keys = distinct_keys(rng, n, universe_bits)
    # positions (in insert count) after which each extra op runs
    slots = sorted(rng.randrange(1, n + 1) for _ in range(extra_ops))
    ops = []
    j = 0
    for i, k in enumerate(keys, 1):
        ops.append(Op(INSERT, k, rng.getrandbits(value_bits)))
        while j < len(slots) and slots[j] <= i:
            target = keys[rng.randrange(i)]
            if rng.random() < update_share:
                ops.append(Op(UPDATE, target, rng.getrandbits(value_bits)))
            else:
                ops.append(Op(QUERY, target))
            j += 1
    return ops


@dataclass
class ReplayResult:
    queries: int = 0
    mismatches: int = 0
    first_failure: str | None = None
    shadow: ShadowMap = field(default_factory=ShadowMap)

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def replay(ir, ops, final_sweep: bool = True) -> ReplayResult:
    """Apply ``ops`` to ``ir`` and to a shadow map, comparing every query.

    With ``final_sweep`` every inserted key is queried once more at the end.
    """
    res = ReplayResult()
    shadow = res.shadow

    def compare(step, key):
        res.queries += 1
        got, want = ir.query(key), shadow[key]
        if got != want:
            res.mismatches += 1
            if res.first_failure is None:
                res.first_failure = f"op {step}: query({key:#x}) = {got:#x}, expected {want:#x}"

    for step, op in enumerate(ops):
        if op.kind == INSERT:
            ir.insert(op.key, op.value)
            shadow.insert(op.key, op.value)
        elif op.kind == UPDATE:
            ir.update(op.key, op.value)
            shadow.update(op.key, op.value)
        else:
            compare(step, op.key)
    if final_sweep:
        for key in shadow:
            compare(len(ops), key)
    return res
