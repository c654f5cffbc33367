"""Command-line interface: build, query, verify, bench and info."""

from __future__ import annotations

import argparse
import struct
import sys
import time
from pathlib import Path

import numpy as np

from .analysis import bench, bench_csv, random_keys
from .builder import BuildConfig, BuildError, build, default_threads
from .fileformat import HEADER_SIZE, FormatError, load, save


def read_keys(path: str, binary: bool = False) -> list[bytes]:
    """Newline-delimited keys, or 32-bit little-endian length-prefixed records."""
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    if not binary:
        keys = data.split(b"\n")
        if keys and keys[-1] == b"":
            keys.pop()
        return keys
    keys = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated length prefix")
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        if pos + length > len(data):
            raise ValueError("truncated record")
        keys.append(data[pos:pos + length])
        pos += length
    return keys


def _load_key_source(args):
    if args.random is not None:
        return random_keys(args.random, args.random_seed)
    return read_keys(args.input, args.binary)


def cmd_build(args) -> int:
    keys = _load_key_source(args)
    config = BuildConfig(leaf_size=args.leaf, bucket_size=args.bucket, seed=args.seed,
                         threads=args.threads or default_threads())
    t0 = time.perf_counter()
    mphf = build(keys, config)
    elapsed = time.perf_counter() - t0
    size = save(mphf, args.output)
    n = len(keys)
    print(f"n: {n}")
    print(f"bits/key: {mphf.bits_per_key():.4f}")
    print(f"bits/key with header: {8 * size / n if n else 0.0:.4f}")
    print(f"build time: {elapsed:.3f} s ({elapsed * 1e9 / n if n else 0.0:.0f} ns/key)")
    return 0


def cmd_query(args) -> int:
    mphf = load(args.mphf)
    keys = [args.key.encode()] if args.key is not None else read_keys(args.keys, args.binary)
    if not keys:
        return 0
    ranks = mphf.lookup_many(keys)
    sys.stdout.write("".join(f"{r}\n" for r in ranks))
    return 0


def cmd_verify(args) -> int:
    mphf = load(args.mphf)
    keys = _load_key_source(args)
    if len(keys) != mphf.n:
        print(f"key count {len(keys)} differs from structure size {mphf.n}", file=sys.stderr)
        return 1
    if mphf.n == 0:
        print("ok: empty structure")
        return 0
    ranks = mphf.lookup_many(keys)
    seen = np.bincount(ranks, minlength=mphf.n)
    if ranks.min() < 0 or ranks.max() >= mphf.n or (seen != 1).any():
        print(f"FAIL: {int((seen == 0).sum())} ranks unused", file=sys.stderr)
        return 1
    print(f"ok: {mphf.n} keys map to a permutation of [0, {mphf.n})")
    return 0


def cmd_bench(args) -> int:
    row = bench(args.leaf, args.bucket, args.n, lookups=args.lookups, seed=args.seed,
                threads=args.threads, key_seed=args.random_seed)
    sys.stdout.write(bench_csv([row], header=not args.no_header))
    return 0


def cmd_info(args) -> int:
    mphf = load(args.mphf)
    space = mphf.space_breakdown()
    total = HEADER_SIZE * 8 + mphf.size_bits()
    n = mphf.n
    lines = [
        f"leaf size: {mphf.leaf_size}",
        f"bucket size: {mphf.bucket_size}",
        f"keys: {n}",
        f"seed: {mphf.seed}",
        f"beta: {mphf.beta / (1 << 20):.6f} ({mphf.beta})",
        f"buckets: {mphf.nbuckets}",
        f"wide select inventory: {mphf.ef.wide_inventory}",
    ]
    lines += [f"{name.replace('_', ' ')}: {bits}" for name, bits in space.items()]
    if n:
        lines.append(f"bits/key: {mphf.bits_per_key():.4f}")
        lines.append(f"bits/key with header: {total / n:.4f}")
    print("\n".join(lines))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recsplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def key_source(p, required=True):
        group = p.add_mutually_exclusive_group(required=required)
        group.add_argument("--input", help="key file ('-' for stdin)")
        group.add_argument("--random", type=int, metavar="N",
                           help="use N random 16-byte keys")
        p.add_argument("--random-seed", type=int, default=42,
                       help="generator seed for --random (default 42)")
        p.add_argument("--binary", action="store_true",
                       help="keys are 32-bit LE length-prefixed records")

    p = sub.add_parser("build", help="build an MPHF and write it to a file")
    key_source(p)
    p.add_argument("--leaf", type=int, default=8)
    p.add_argument("--bucket", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $RECSPLIT_THREADS or CPU count)")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="print the rank of keys")
    p.add_argument("--mphf", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--key")
    group.add_argument("--keys", help="key file ('-' for stdin)")
    p.add_argument("--binary", action="store_true")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("verify", help="check that the keys map to a permutation")
    p.add_argument("--mphf", required=True)
    key_source(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="build on random keys and print a CSV row")
    p.add_argument("--leaf", type=int, default=8)
    p.add_argument("--bucket", type=int, default=100)
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--lookups", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-seed", type=int, default=42)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("info", help="describe a serialized MPHF")
    p.add_argument("--mphf", required=True)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BuildError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
