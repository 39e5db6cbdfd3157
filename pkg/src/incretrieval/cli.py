"""Command-line harness: verify, bench, build, query.

Exit codes: 0 success, 1 failed check or IO/snapshot error, 2 usage or
input parse error.
"""

from __future__ import annotations

import argparse
import os
import random
import sys
import time

from .errors import ConfigError, RetrievalError
from .metering import audit, fit_envelope, measure
from .params import RetrievalConfig
from .retrieval import IncrementalRetrieval
from .snapshot import dump, load
from .workload import distinct_keys, generate, replay

CSV_HEADER = ("n,v,seed,bits_values,bits_occupancy,bits_dir_fp,bits_dir_off,bits_dir_tag,"
              "bits_reducers,bits_collisions,bits_hash,bits_fixed,total_bits,"
              "redundancy_per_key,collision_frac,mean_log_offset,ms")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _env_seed() -> int:
    raw = os.environ.get("RETRIEVAL_SEED")
    if raw is None:
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"RETRIEVAL_SEED must be an integer, got {raw!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        out = [int(x, 0) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None
    if not out:
        raise UsageError("list must not be empty")
    return out


def _config(n, v, seed, args, **extra) -> RetrievalConfig:
    for name in ("slack", "t_min", "bucket_size"):
        val = getattr(args, name, None)
        if val is not None:
            extra[name] = val
    try:
        return RetrievalConfig(n_max=n, value_bits=v, master_seed=seed, **extra)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None


# -- verify -------------------------------------------------------------------

def inject_fault(ir) -> None:
    """Flip the low bit of the first stored fingerprint."""
    for fps in ir.directory.fps:
        if fps:
            fps[0] ^= 1
            return


def invariant_failures(ir) -> list[str]:
    out = []
    try:
        ir.check()
    except AssertionError as exc:
        out.append(f"structure check failed: {exc}")
    d = ir.directory
    if d.recount() != (d.offset_bits, d.tag_bits):
        out.append("directory bit counters disagree with a recount")
    for j, store in sorted(ir.stores.items()):
        if not store.index.consistent():
            out.append(f"occupancy summary of round {j} inconsistent with its bitmap")
    if not out:
        bad = {k: v for k, v in audit(ir).items() if v[0] != v[1]}
        if bad:
            out.append(f"snapshot audit mismatch: {bad}")
    return out


def cmd_verify(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    ops_count = args.n if args.ops is None else args.ops
    if ops_count < 0:
        raise UsageError("--ops must be non-negative")
    seed = _env_seed() if args.seed is None else args.seed
    cfg = _config(args.n, args.v, seed, args)
    ir = IncrementalRetrieval(cfg)
    res = replay(ir, generate(args.n, args.v, cfg.universe_bits, seed, ops_count))
    if args.inject_fault:
        inject_fault(ir)
        for key, want in res.shadow.items():
            got = ir.query(key)
            res.queries += 1
            if got != want:
                res.mismatches += 1
                if res.first_failure is None:
                    res.first_failure = f"after fault: query({key:#x}) = {got:#x}, expected {want:#x}"
    failures = invariant_failures(ir)
    if res.first_failure:
        failures.insert(0, res.first_failure)
    print(f"verify n={args.n} v={args.v} seed={seed}: {res.queries} queries, "
          f"{res.mismatches} mismatches, {len(ir.collisions)} diverted")
    if failures:
        print(f"FAIL {failures[0]}")
        return EXIT_FAIL
    print("OK")
    return EXIT_OK


# -- bench --------------------------------------------------------------------

def bench_run(cfg: RetrievalConfig, seed: int, timing: bool = False):
    """Insert ``n_max`` random pairs; returns ``(report, milliseconds)``."""
    rng = random.Random(seed)
    keys = distinct_keys(rng, cfg.n_max, cfg.universe_bits)
    values = [rng.getrandbits(cfg.value_bits) for _ in keys]
    ir = IncrementalRetrieval(cfg)
    t0 = time.perf_counter()
    for k, y in zip(keys, values):
        ir.insert(k, y)
    ms = (time.perf_counter() - t0) * 1000 if timing else 0.0
    return measure(ir), ms


def csv_row(n, v, seed, rep, ms) -> str:
    c = rep
    cells = [n, v, seed, c.value_slots, c.occupancy_index,
             c.directory_fps + c.directory_headers, c.directory_offsets,
             c.directory_round_tags, c.reducer_indices, c.collision_store,
             c.hash_descriptions, c.fixed_overhead, c.total,
             f"{c.redundancy_per_key:.6f}", f"{c.collision_fraction:.6f}",
             f"{c.mean_log_offset:.6f}", f"{ms:.1f}"]
    return ",".join(str(x) for x in cells)


def cmd_bench(args) -> int:
    n_list = _int_list(args.n_list)
    v_list = _int_list(args.v_list)
    seeds = _int_list(args.seeds) if args.seeds else [_env_seed()]
    if any(n < 2 for n in n_list):
        raise UsageError("every n must be at least 2")
    lines = [CSV_HEADER]
    reports = []
    for n in n_list:
        for v in v_list:
            for seed in seeds:
                cfg = _config(n, v, seed, args)
                rep, ms = bench_run(cfg, seed, args.timing)
                reports.append(rep)
                lines.append(csv_row(n, v, seed, rep, ms))
    try:
        with open(args.out, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        c1, c2, resid = fit_envelope(reports)
        print(f"fit c1={c1:.4f} c2={c2:.4f} residual={resid:.4f} points={len(reports)}")
    except RetrievalError as exc:
        print(f"fit skipped: {exc}")
    return EXIT_OK


# -- build / query ------------------------------------------------------------

def parse_pairs(lines):
    """``hex_key,hex_value`` lines; blank lines and ``#`` comments are skipped."""
    out = []
    for lineno, line in enumerate(lines, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            key, value = int(parts[0], 16), int(parts[1], 16)
            if key < 0 or value < 0:
                raise ValueError
        except ValueError:
            raise UsageError(f"line {lineno}: expected 'hex_key,hex_value', got {text!r}") from None
        out.append((lineno, key, value))
    return out


def cmd_build(args) -> int:
    try:
        with open(args.inp) as fh:
            pairs = parse_pairs(fh)
    except OSError as exc:
        print(f"error: cannot read {args.inp}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    n = max(2, len(pairs))
    v = args.v if args.v is not None else max([1] + [y.bit_length() for _, _, y in pairs])
    u = max([3 * (n - 1).bit_length()] + [k.bit_length() for _, k, _ in pairs]
            + [n.bit_length()])
    seed = _env_seed() if args.seed is None else args.seed
    cfg = _config(n, v, seed, args, universe_bits=u)
    seen = set()
    for lineno, key, value in pairs:
        if value >> v:
            raise UsageError(f"line {lineno}: value {value:#x} does not fit in {v} bits")
        if key in seen:
            raise UsageError(f"line {lineno}: duplicate key {key:#x}")
        seen.add(key)
    ir = IncrementalRetrieval(cfg)
    for _, key, value in pairs:
        ir.insert(key, value)
    try:
        dump(ir, args.out)
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rep = measure(ir)
    print(f"built {len(pairs)} pairs, {rep.snapshot_bits // 8} bytes, "
          f"{len(ir.collisions)} diverted")
    return EXIT_OK


def cmd_query(args) -> int:
    try:
        key = int(args.key, 16)
    except ValueError:
        raise UsageError(f"--key must be hexadecimal, got {args.key!r}") from None
    try:
        ir = load(args.snapshot)
    except OSError as exc:
        print(f"error: cannot read {args.snapshot}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except RetrievalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        print(f"{ir.query(key):x}")
    except RetrievalError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def _add_tuning(p):
    p.add_argument("--slack", type=float, default=None, help="round prefix slack constant")
    p.add_argument("--t-min", dest="t_min", type=int, default=None,
                   help="lower clamp on fingerprint widths")
    p.add_argument("--bucket-size", dest="bucket_size", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incretrieval",
                                     description="Incremental retrieval structure harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="replay a seeded workload against a shadow map")
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--v", type=int, default=8)
    p.add_argument("--seed", type=int, default=None, help="default: $RETRIEVAL_SEED or 0")
    p.add_argument("--ops", type=int, default=None,
                   help="updates and queries mixed into the inserts (default: n)")
    p.add_argument("--inject-fault", action="store_true",
                   help="flip one stored fingerprint bit before the final check")
    _add_tuning(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="space sweep over an (n, v, seed) grid, written as CSV")
    p.add_argument("--n-list", required=True)
    p.add_argument("--v-list", required=True)
    p.add_argument("--seeds", default=None, help="default: $RETRIEVAL_SEED or 0")
    p.add_argument("--out", required=True)
    p.add_argument("--timing", action="store_true",
                   help="fill the ms column (otherwise 0, keeping output reproducible)")
    _add_tuning(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("build", help="build a snapshot from hex_key,hex_value lines")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--v", type=int, default=None, help="value width (default: widest value)")
    p.add_argument("--seed", type=int, default=None)
    _add_tuning(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="look a key up in a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--key", required=True, help="hexadecimal key")
    p.set_defaults(func=cmd_query)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
