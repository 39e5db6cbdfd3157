"""Versioned binary snapshot of a retrieval structure.

A snapshot is an 8-byte file header (magic, version, section count) followed
by sections.  Each section is a 4-byte ASCII tag, a little-endian u64 giving
the payload length in bits, and the payload bit stream zero-padded to a byte
boundary.  Section order is fixed:

    CONF SCHD STAT HASH REDU DHDR DFPS DOFF DTAG VALS OCCU COLL

Keys are never written; only fingerprints, offsets, round tags, values and
the explicit collision records.
"""

from __future__ import annotations

import struct

from .codes import BitReader, BitWriter
from .collisions import Reason
from .errors import SnapshotError
from .hashing import MixHash, PolyHash
from .params import HASH_FAMILIES, RetrievalConfig
from .reducer import ReducerEntry
from .retrieval import IncrementalRetrieval, _fast
from .value_store import ValueStore, slot_count

MAGIC = b"IRTV"
VERSION = 1
FILE_HEADER_BITS = 64
SECTION_HEADER_BITS = 96
SECTIONS = ("CONF", "SCHD", "STAT", "HASH", "REDU", "DHDR", "DFPS", "DOFF", "DTAG", "VALS",
            "OCCU", "COLL")
POLY_K_VALUE = 5


def _write_hash(w: BitWriter, h) -> None:
    if isinstance(h, MixHash):
        w.write(h.seed, 64)
    else:
        for a in h.coeffs:
            w.write(a, h.pbits)


def _read_poly(r: BitReader, k: int, range_: int, domain_bits: int) -> PolyHash:
    pbits = 61 if domain_bits <= 60 else 127
    return PolyHash.from_coeffs([r.read(pbits) for _ in range(k)], range_, domain_bits)


def _read_hash(r: BitReader, family: str, k: int, range_: int, domain_bits: int):
    if family == "mix":
        return MixHash(r.read(64), range_, domain_bits)
    return _read_poly(r, k, range_, domain_bits)


def store_rounds(ir: IncrementalRetrieval):
    """Rounds whose value store exists, in order."""
    return sorted(ir.stores)


def _expected_store_rounds(schedule, current_round: int, inserted: int):
    if inserted == 0:
        return []
    out, j = [], schedule.start_round
    while j is not None and j <= current_round:
        out.append(j)
        j = schedule.next_round(j)
    return out


# -- section writers ----------------------------------------------------------

def _conf(w: BitWriter, cfg: RetrievalConfig) -> None:
    w.write(cfg.n_max, 64)
    w.write(cfg.value_bits, 7)
    w.write(cfg.universe_bits, 7)
    w.write(cfg.bucket_size, 32)
    w.write(cfg.bucket_capacity, 32)
    w.write(int.from_bytes(struct.pack("<d", cfg.slack), "little"), 64)
    w.write(cfg.t_min, 8)
    w.write(cfg.offset_bits_threshold, 8)
    w.write(cfg.master_seed, 64)
    w.write(HASH_FAMILIES.index(cfg.hash_family), 1)
    w.write(cfg.reducer_budget, 64)
    w.write(int(cfg.memoize), 1)


def _sched(w: BitWriter, s) -> None:
    w.write(s.ell, 8)
    w.write(len(s.capacities), 8)
    for c, t in zip(s.capacities, s.fp_bits):
        w.write(c, 64)
        w.write(t, 8)
    w.write(s.initial_fp_bits, 8)
    w.write(int(s.single_round), 1)


def _stat(w: BitWriter, ir) -> None:
    w.write(ir.current_round, 8)
    w.write(ir.inserted, 64)
    w.write(ir.round_inserted, 64)
    w.write(len(ir.transitions), 8)


def _hash(w: BitWriter, ir) -> None:
    _write_hash(w, ir.hashes.bucket_hash)
    _write_hash(w, ir.hashes.fp_hash)
    w.write(ir.hashes.reducer_seed, 64)
    for j in store_rounds(ir):
        _write_hash(w, ir.stores[j].hash)


def _redu(w: BitWriter, ir) -> None:
    budget = ir.cfg.reducer_budget
    for e in ir.reducer_entries():
        w.write_gamma(e.code_value(budget) + 1)


def _dhdr(w: BitWriter, d) -> None:
    w.write_array([len(f) for f in d.fps], d.header_bits)


def _dfps(w: BitWriter, d) -> None:
    B = d.bucket_size
    for fps, wd in zip(d.fps, d.widths):
        s = len(fps)
        mask = (1 << wd) - 1
        upper = 0
        low = 0
        for i, f in enumerate(fps):
            upper |= 1 << (i + (f >> wd))
            low |= (f & mask) << (i * wd)
        w.write(upper, s + B)
        w.write(low, s * wd)


def _doff(w: BitWriter, d) -> None:
    for offs in d.offsets:
        for p in offs:
            w.write_gamma(p + 1)


def _dtag(w: BitWriter, d) -> None:
    start, rounds = d.start_round, d.tag_rounds
    for tags in d.tags:
        for t in tags:
            w.write_tag(t - start + 1, rounds)


def _vals(w: BitWriter, ir) -> None:
    for j in store_rounds(ir):
        w.write_array(ir.stores[j].values, ir.cfg.value_bits)


def _occu(w: BitWriter, ir) -> None:
    for j in store_rounds(ir):
        index = ir.stores[j].index
        for blk, levels in enumerate(index.trees):
            for level, widths in zip(levels, index.level_widths(blk)):
                for word, wd in zip(level, widths):
                    w.write(word, wd)


def _coll(w: BitWriter, ir) -> None:
    c = ir.collisions
    w.write(len(c), 64)
    for rec in c.records():
        w.write(rec.key, c.universe_bits)
        w.write(rec.value, c.value_bits)
        w.write(int(rec.reason), 2)


_WRITERS = {
    "CONF": lambda w, ir: _conf(w, ir.cfg),
    "SCHD": lambda w, ir: _sched(w, ir.schedule),
    "STAT": _stat,
    "HASH": _hash,
    "REDU": _redu,
    "DHDR": lambda w, ir: _dhdr(w, ir.directory),
    "DFPS": lambda w, ir: _dfps(w, ir.directory),
    "DOFF": lambda w, ir: _doff(w, ir.directory),
    "DTAG": lambda w, ir: _dtag(w, ir.directory),
    "VALS": _vals,
    "OCCU": _occu,
    "COLL": _coll,
}


def dumps(ir: IncrementalRetrieval) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<HH", VERSION, len(SECTIONS))
    for tag in SECTIONS:
        w = BitWriter()
        _WRITERS[tag](w, ir)
        out += tag.encode("ascii")
        out += struct.pack("<Q", w.bits)
        out += w.getvalue()
    return bytes(out)


def dump(ir: IncrementalRetrieval, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(ir))


# -- reading ------------------------------------------------------------------

def read_sections(data: bytes) -> dict:
    """``tag -> (payload bytes, payload bit length)`` in file order."""
    if len(data) < 8 or data[:4] != MAGIC:
        raise SnapshotError("not a retrieval snapshot (bad magic)")
    version, count = struct.unpack_from("<HH", data, 4)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    pos = 8
    out = {}
    for _ in range(count):
        if pos + 12 > len(data):
            raise SnapshotError("truncated section header")
        tag = data[pos:pos + 4].decode("ascii", errors="replace")
        (nbits,) = struct.unpack_from("<Q", data, pos + 4)
        nbytes = (nbits + 7) >> 3
        pos += 12
        if pos + nbytes > len(data):
            raise SnapshotError(f"truncated section {tag}")
        out[tag] = (data[pos:pos + nbytes], nbits)
        pos += nbytes
    if pos != len(data):
        raise SnapshotError("trailing bytes after last section")
    if tuple(out) != SECTIONS:
        raise SnapshotError(f"unexpected section layout {tuple(out)}")
    return out


def section_bits(data: bytes) -> dict:
    """Payload bit length of every section, plus header and padding totals."""
    secs = read_sections(data)
    out = {tag: nbits for tag, (_, nbits) in secs.items()}
    out["headers"] = FILE_HEADER_BITS + SECTION_HEADER_BITS * len(secs)
    out["padding"] = sum(8 * len(payload) - nbits for payload, nbits in secs.values())
    return out


def _reader(secs, tag) -> BitReader:
    payload, nbits = secs[tag]
    return BitReader(payload, nbits)


def _done(r: BitReader, tag: str) -> None:
    if r.pos != r.nbits:
        raise SnapshotError(f"section {tag}: {r.nbits - r.pos} unread bits")


def loads(data: bytes) -> IncrementalRetrieval:
    try:
        return _loads(data)
    except (EOFError, ValueError, IndexError) as exc:
        raise SnapshotError(f"corrupt snapshot: {exc}") from exc


def _loads(data: bytes) -> IncrementalRetrieval:
    secs = read_sections(data)

    r = _reader(secs, "CONF")
    n_max, v, u = r.read(64), r.read(7), r.read(7)
    B, cap = r.read(32), r.read(32)
    slack = struct.unpack("<d", r.read(64).to_bytes(8, "little"))[0]
    t_min, thr, seed = r.read(8), r.read(8), r.read(64)
    family = HASH_FAMILIES[r.read(1)]
    budget, memoize = r.read(64), bool(r.read(1))
    _done(r, "CONF")
    cfg = RetrievalConfig(n_max=n_max, value_bits=v, universe_bits=u, bucket_size=B,
                          bucket_capacity=cap, slack=slack, t_min=t_min,
                          offset_bits_threshold=thr, master_seed=seed, hash_family=family,
                          reducer_budget=budget, memoize=memoize)
    ir = IncrementalRetrieval(cfg)
    sched = ir.schedule

    r = _reader(secs, "SCHD")
    w = BitWriter()
    _sched(w, sched)
    if r.nbits != w.bits or r.read(r.nbits) != int.from_bytes(w.getvalue(), "little"):
        raise SnapshotError("stored schedule differs from the one derived from the config")

    r = _reader(secs, "STAT")
    current, inserted, round_inserted, ntrans = r.read(8), r.read(64), r.read(64), r.read(8)
    _done(r, "STAT")
    rounds = _expected_store_rounds(sched, current, inserted)
    trans_rounds = []
    j = sched.start_round
    while j != current:
        j = sched.next_round(j)
        if j is None:
            raise SnapshotError(f"round {current} unreachable in schedule")
        trans_rounds.append(j)
    if len(trans_rounds) != ntrans:
        raise SnapshotError("transition count inconsistent with current round")
    ir.current_round, ir.inserted, ir.round_inserted = current, inserted, round_inserted

    r = _reader(secs, "HASH")
    h = ir.hashes
    h.bucket_hash = _read_hash(r, family, B, cfg.num_buckets, u)
    h.fp_hash = _read_hash(r, family, B, h.fp_range, u)
    h.reducer_seed = r.read(64)
    ir._bucket_of = _fast(h.bucket_hash)
    ir._fp0 = _fast(h.fp_hash)
    value_hashes = [_read_poly(r, POLY_K_VALUE, slot_count(sched.capacities[j - 1], n_max), u)
                    for j in rounds]
    _done(r, "HASH")

    d = ir.directory
    r = _reader(secs, "REDU")
    for j in trans_rounds:
        to_bits = sched.fp_bits[j - 1]
        for b in range(cfg.num_buckets):
            code = r.read_gamma() - 1
            frm = d.widths[b]
            e = ReducerEntry(j, b, 0 if code == budget else code, frm, min(to_bits, frm),
                             h.reducer_seed, B, escaped=code == budget)
            ir.chains[b].append(e)
            d.widths[b] = e.out_bits
        ir.transitions.append((j, to_bits))
    _done(r, "REDU")

    r = _reader(secs, "DHDR")
    sizes = [int(x) for x in r.read_array(cfg.num_buckets, d.header_bits)]
    _done(r, "DHDR")

    r = _reader(secs, "DFPS")
    for b, s in enumerate(sizes):
        wd = d.widths[b]
        upper = r.read(s + B)
        low = r.read(s * wd)
        fps = []
        i = 0
        while upper:
            pos = (upper & -upper).bit_length() - 1
            upper &= upper - 1
            fps.append(((pos - i) << wd) | ((low >> (i * wd)) & ((1 << wd) - 1)))
            i += 1
        if i != s:
            raise SnapshotError(f"bucket {b}: {i} fingerprints, header says {s}")
        d.fps[b] = fps
    _done(r, "DFPS")

    r = _reader(secs, "DOFF")
    for b, s in enumerate(sizes):
        d.offsets[b] = [r.read_gamma() - 1 for _ in range(s)]
    _done(r, "DOFF")

    r = _reader(secs, "DTAG")
    for b, s in enumerate(sizes):
        d.tags[b] = [r.read_tag(d.tag_rounds) + d.start_round - 1 for _ in range(s)]
    _done(r, "DTAG")
    d.count = sum(sizes)
    d.offset_bits, d.tag_bits = d.recount()

    r_vals = _reader(secs, "VALS")
    r_occ = _reader(secs, "OCCU")
    for j, vh in zip(rounds, value_hashes):
        store = ValueStore(sched.capacities[j - 1], v, n_max, hash_fn=vh, universe_bits=u)
        store.values = [int(x) for x in r_vals.read_array(store.slots, v)]
        index = store.index
        for blk, levels in enumerate(index.trees):
            for level, widths in zip(levels, index.level_widths(blk)):
                for i, wd in enumerate(widths):
                    level[i] = r_occ.read(wd)
        store.count = store.slots - index.free_count()
        ir.stores[j] = store
    _done(r_vals, "VALS")
    _done(r_occ, "OCCU")

    r = _reader(secs, "COLL")
    for _ in range(r.read(64)):
        key, value, reason = r.read(u), r.read(v), r.read(2)
        ir.collisions.insert(key, value, Reason(reason))
    _done(r, "COLL")
    return ir


def load(path) -> IncrementalRetrieval:
    with open(path, "rb") as fh:
        return loads(fh.read())


def values_equal(a: IncrementalRetrieval, b: IncrementalRetrieval) -> bool:
    """Whether two structures hold identical serialized state."""
    return dumps(a) == dumps(b)
