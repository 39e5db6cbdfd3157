"""The incremental retrieval structure: rounds, reductions, insert/update/query."""

from __future__ import annotations

from .collisions import CollisionStore, Reason
from .directory import BucketDirectory, InsertStatus
from .errors import CapacityExceeded, RangeError
from .hashing import HashSuite, MixHash, mix64
from .params import RetrievalConfig, derive_schedule
from .reducer import escape_entry, find_perfect_reductions
from .value_store import ValueStore, slot_count


def _fast(h):
    """Unchecked evaluator for a hash; keys are range-checked once per operation."""
    if isinstance(h, MixHash) and h.domain_bits <= 64:
        seed, r = h.seed, h.range
        return lambda x: ((mix64(x ^ seed) >> 32) * r) >> 32
    return h


class IncrementalRetrieval:
    """Answers ``query(k) = f(k)`` for up to ``n_max`` inserted keys without storing them.

    Keys not inserted get an arbitrary answer.  Inserting the same key twice
    is outside the contract and is not detected.
    """

    def __init__(self, cfg: RetrievalConfig):
        self.cfg = cfg
        self.schedule = derive_schedule(cfg)
        self.hashes = HashSuite(cfg, self.schedule.start_bits)
        self._bucket_of = _fast(self.hashes.bucket_hash)
        self._fp0 = _fast(self.hashes.fp_hash)
        self.current_round = self.schedule.start_round
        self.inserted = 0
        self.round_inserted = 0
        self.directory = BucketDirectory(cfg.num_buckets, cfg.bucket_size, cfg.bucket_capacity,
                                         self.schedule.start_bits, self.schedule.start_round,
                                         self.schedule.tag_rounds)
        self.stores: dict[int, ValueStore] = {}
        self.chains = [[] for _ in range(cfg.num_buckets)]
        self.transitions: list[tuple[int, int]] = []
        self.collisions = CollisionStore(cfg.universe_bits, cfg.value_bits)
        self._offset_limit = 1 << cfg.offset_bits_threshold
        self._cache = {} if cfg.memoize else None

    def __len__(self):
        return self.inserted

    # -- hashing -------------------------------------------------------------

    def _check_key(self, key: int) -> None:
        if key < 0 or key >> self.cfg.universe_bits:
            raise RangeError(f"key {key} outside universe [2^{self.cfg.universe_bits}]")

    def _check_value(self, y: int) -> None:
        if y < 0 or y >> self.cfg.value_bits:
            raise RangeError(f"value {y} does not fit in {self.cfg.value_bits} bits")

    def bucket_of(self, key: int) -> int:
        return self._bucket_of(key)

    def fingerprint(self, key: int, bucket: int | None = None) -> int:
        """Current-round fingerprint of ``key`` within its bucket."""
        b = self._bucket_of(key) if bucket is None else bucket
        fp = self._fp0(key)
        cache = self._cache
        if cache is not None:
            hit = cache.get((b, fp))
            if hit is not None:
                return hit
            start = fp
        for e in self.chains[b]:
            if not e.identity:
                fp = ((mix64(fp ^ e.key) >> 32) * (e.bucket_size << e.to_bits)) >> 32
        if cache is not None:
            cache[(b, start)] = fp
        return fp

    # -- operations ----------------------------------------------------------

    def _store(self, round_: int) -> ValueStore:
        store = self.stores.get(round_)
        if store is None:
            cfg = self.cfg
            m = self.schedule.capacities[round_ - 1]
            store = ValueStore(m, cfg.value_bits, cfg.n_max,
                               hash_fn=self.hashes.value_hash(round_, slot_count(m, cfg.n_max)),
                               universe_bits=cfg.universe_bits)
            self.stores[round_] = store
        return store

    def insert(self, key: int, y: int) -> None:
        if self.inserted >= self.cfg.n_max:
            raise CapacityExceeded(f"already holds n_max={self.cfg.n_max} keys")
        self._check_key(key)
        self._check_value(y)
        caps = self.schedule.capacities
        while self.round_inserted >= caps[self.current_round - 1]:
            self.advance_round()
        b = self._bucket_of(key)
        fp = self.fingerprint(key, b)
        p = self._store(self.current_round).insert(key, y)
        self.inserted += 1
        self.round_inserted += 1
        if p < self._offset_limit:
            status = self.directory.insert(b, fp, p, self.current_round)
            if status is InsertStatus.OK:
                return
        else:
            status = self.directory.probe(b, fp)
        if status is InsertStatus.FINGERPRINT_PRESENT:
            reason = Reason.FINGERPRINT_COLLISION
        elif status is InsertStatus.BUCKET_FULL:
            reason = Reason.BUCKET_FULL
        else:
            reason = Reason.OFFSET_TOO_LARGE
        self.collisions.insert(key, y, reason)

    def update(self, key: int, y: int) -> None:
        self._check_key(key)
        self._check_value(y)
        if self.collisions.update(key, y):
            return
        b = self._bucket_of(key)
        loc = self.directory.lookup(b, self.fingerprint(key, b))
        if loc is not None:
            p, r = loc
            self.stores[r].update(key, p, y)

    def query(self, key: int) -> int:
        self._check_key(key)
        y = self.collisions.lookup(key)
        if y is not None:
            return y
        b = self._bucket_of(key)
        loc = self.directory.lookup(b, self.fingerprint(key, b))
        if loc is None:
            return 0
        p, r = loc
        return self.stores[r].query(key, p)

    def locate(self, key: int):
        """Where ``key`` resolves: ``("collision", reason)``, ``("directory", b, fp, p, round)``
        or None when neither path knows it."""
        rec = self.collisions.record(key)
        if rec is not None:
            return ("collision", rec.reason)
        b = self._bucket_of(key)
        fp = self.fingerprint(key, b)
        loc = self.directory.lookup(b, fp)
        if loc is None:
            return None
        return ("directory", b, fp) + loc

    def advance_round(self) -> None:
        """Reduce every bucket to the next non-empty round's fingerprint width."""
        nxt = self.schedule.next_round(self.current_round)
        if nxt is None:
            raise CapacityExceeded("no round left to advance into")
        to_bits = self.schedule.fp_bits[nxt - 1]
        cfg = self.cfg
        seed = self.hashes.reducer_seed
        d = self.directory
        entries = find_perfect_reductions(d.fps, d.widths, to_bits, seed, round_=nxt,
                                          bucket_size=cfg.bucket_size, budget=cfg.reducer_budget)
        for b, e in enumerate(entries):
            if e is None:
                frm = d.widths[b]
                e = escape_entry(frm, min(to_bits, frm), seed, round_=nxt, bucket=b,
                                 bucket_size=cfg.bucket_size)
            d.reduce_bucket(b, e)
            self.chains[b].append(e)
        self.transitions.append((nxt, to_bits))
        self.current_round = nxt
        self.round_inserted = 0
        if self._cache is not None:
            self._cache.clear()

    # -- introspection -------------------------------------------------------

    @property
    def round_capacity_used(self) -> int:
        return self.schedule.prefix(self.current_round - 1) + self.round_inserted

    def reducer_entries(self):
        for t in range(len(self.transitions)):
            for b in range(self.cfg.num_buckets):
                yield self.chains[b][t]

    def check(self) -> None:
        """Assert structural invariants; raises AssertionError on violation."""
        self.directory.check()
        assert self.inserted <= self.schedule.prefix(self.current_round)
        assert self.inserted == sum(len(s) for s in self.stores.values())
        assert len(self.directory) + len(self.collisions) == self.inserted
        limit = self._offset_limit
        assert all(p < limit for offs in self.directory.offsets for p in offs)
        for b, chain in enumerate(self.chains):
            assert len(chain) == len(self.transitions), b
