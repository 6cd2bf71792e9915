"""twinpai command line: keygen, serve, run, bench and selftest.

Exit codes: 0 success, 1 usage, 2 crypto or protocol failure, 3 transport failure.
"""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading
from pathlib import Path

from .bench import DEFAULT_L, PROTOCOLS, run_bench
from .errors import KeyFileError, TransportError, TwinPaiError
from .fastpai import PROFILES, SecurityParams, dec, decode, encode
from .keyfile import KeySet, load_keyset, write_keyset
from .modmath import RandomSource
from .offline import build_table, encrypt, load_table, save_table
from .protocols import (
    MASK_MARGIN_BITS,
    local_session,
    make_s0_context,
    make_s1_context,
    run_server,
    scmp,
    sdiv,
    smul,
    ssba,
)
from .report import format_table, write_all
from .selftest import run_selftest
from .threshold import SplitParams
from .transport import ADDR_ENV, connect_tcp, listen_tcp

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CRYPTO = 2
EXIT_TRANSPORT = 3

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rs(seed: int | None) -> RandomSource:
    return RandomSource() if seed is None else RandomSource.seeded(seed)


def _keys(args, rs: RandomSource) -> KeySet:
    """Keys from --keys, or a throwaway set of --bits when none is given."""
    if args.keys:
        return load_keyset(args.keys)
    return KeySet.generate(SecurityParams.for_bits(args.bits), rs)


def cmd_keygen(args) -> int:
    rs = _rs(args.seed)
    params = SecurityParams.for_bits(args.bits, sigma=args.sigma)
    keys = KeySet.generate(params, rs, SplitParams(args.sigma, args.eta))
    paths = write_keyset(args.out, params, keys.pk, keys.sk, (keys.share1, keys.share2))
    print(f"N: {keys.pk.N.bit_length()} bits, alpha: {keys.sk.alpha.bit_length()} bits")
    for p in paths.values():
        print(f"wrote {p}")
    return EXIT_OK


def _s1_table(keys: KeySet, cache: str | None):
    if cache and Path(cache).exists():
        return load_table(cache, keys.pk)
    table = build_table(keys.pk, keys.params.table_block, keys.params.table_len)
    if cache:
        save_table(table, cache)
    return table


def cmd_serve(args) -> int:
    if args.role != "s1":
        raise UsageError("only the s1 role runs as a server")
    keys = load_keyset(args.keys)
    keys.require("share2")
    rs = RandomSource()
    ctx1 = make_s1_context(keys.pk, keys.share2, keys.params, rs, table=_s1_table(keys, args.table_cache))
    acceptor = listen_tcp(args.listen)
    host, port = acceptor.address
    print(f"listening on {host}:{port}", flush=True)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    run_server(ctx1, acceptor, stop)
    print("server stopped", flush=True)
    return EXIT_OK


def _check_operands(args) -> int:
    l = DEFAULT_L[args.op] if args.l is None else args.l
    if l < 1:
        raise UsageError("--l must be positive")
    bound = 1 << l
    if args.x is None or (args.op != "ssba" and args.y is None):
        raise UsageError(f"--op {args.op} needs --x" + ("" if args.op == "ssba" else " and --y"))
    values = [args.x] if args.op == "ssba" else [args.x, args.y]
    if any(abs(v) > bound for v in values):
        raise UsageError(f"operands must lie in [-2^{l}, 2^{l}]")
    if args.op == "sdiv" and not (args.x >= 0 and args.y > 0):
        raise UsageError("sdiv needs x >= 0 and y > 0")
    return l


def cmd_run(args) -> int:
    l = _check_operands(args)
    rs = _rs(args.seed)
    keys = _keys(args, rs)
    keys.require("share1")
    if args.local:
        keys.require("share2")
    if args.reveal:
        keys.require("sk")
    pk = keys.pk
    sigma = keys.params.sigma
    if l > sigma - MASK_MARGIN_BITS or (args.op == "sdiv" and 2 * l > sigma):
        raise UsageError(f"--l {l} too large for sigma={sigma}")
    ctx0 = make_s0_context(pk, keys.share1, keys.params, rs, range_l=l)

    def E(v: int):
        return encrypt(pk, encode(v, pk.N), rs)

    if args.local:
        ctx1 = make_s1_context(pk, keys.share2, keys.params, rs, range_l=l)
        session = local_session(ctx1)
    else:
        session = connect_tcp(args.connect, pk.digest())
    with session as channel:
        cx = E(args.x)
        if args.op == "smul":
            outputs = {"z": smul(ctx0, channel, cx, E(args.y))}
        elif args.op == "scmp":
            outputs = {"mu": scmp(ctx0, channel, cx, E(args.y))}
        elif args.op == "ssba":
            s, mag = ssba(ctx0, channel, cx)
            outputs = {"s": s, "abs": mag}
        else:
            q, e = sdiv(ctx0, channel, cx, E(args.y), l)
            outputs = {"q": q, "e": e}
        stats = channel.stats()
    if args.reveal:
        print(" ".join(f"{k}={decode(dec(keys.sk, c), pk.N)}" for k, c in outputs.items()))
    else:
        for k, c in outputs.items():
            print(f"[{k}]={c.value:x}")
    print(
        f"stats: ciphertexts={stats.ciphertexts} payload_bytes={stats.payload_bytes} "
        f"frames_sent={stats.frames_sent} frames_received={stats.frames_received} "
        f"bytes_sent={stats.bytes_sent} bytes_received={stats.bytes_received}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    rs = _rs(args.seed)
    keys = _keys(args, rs)
    protocols = PROTOCOLS if args.protocol == "all" else (args.protocol,)
    reports = [run_bench(keys, p, args.iters, args.l, args.bandwidth, rs) for p in protocols]
    print(format_table(reports))
    if args.out:
        for kind, path in write_all(reports, args.out).items():
            print(f"wrote {kind}: {path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    rs = _rs(args.seed)
    keys = _keys(args, rs)
    results = run_selftest(keys, rs)
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name} ({r.seconds:.2f}s)" + ("" if r.ok else f": {r.detail}"))
    failed = [r.name for r in results if not r.ok]
    if failed:
        print(f"selftest failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CRYPTO
    print(f"selftest passed: {len(results)} checks")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twinpai", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    bits = dict(type=int, choices=sorted(PROFILES), default=2048, help="modulus size in bits")

    p = sub.add_parser("keygen", help="generate keys and split the private key")
    p.add_argument("--bits", **bits)
    p.add_argument("--sigma", type=int, default=128, help="bit length of the S0 share")
    p.add_argument("--eta", type=int, default=0, help="lift of the S1 share, in multiples of 2*alpha*N")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="deterministic randomness (testing only)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("serve", help="run the S1 server")
    p.add_argument("--role", default="s1", choices=["s1"])
    p.add_argument("--keys", required=True, help="directory holding s1.key")
    p.add_argument("--listen", help=f"host:port (default ${ADDR_ENV} or 127.0.0.1:7700)")
    p.add_argument("--table-cache", help="fixed-base table cache file, created if absent")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="run one protocol on encrypted operands")
    p.add_argument("--op", required=True, choices=PROTOCOLS)
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.add_argument("--l", type=int, help="operand range 2^l (default 32, 10 for sdiv)")
    where = p.add_mutually_exclusive_group(required=True)
    where.add_argument("--connect", metavar="ADDR", help="S1 server address")
    where.add_argument("--local", action="store_true", help="run S1 in-process")
    p.add_argument("--reveal", action="store_true", help="decrypt outputs with master.key (testing only)")
    p.add_argument("--keys", help="key directory; without it a throwaway key set is generated")
    p.add_argument("--bits", **bits)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time the protocols over an in-memory channel")
    p.add_argument("--protocol", default="all", choices=PROTOCOLS + ("all",))
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--bits", **bits)
    p.add_argument("--l", type=int, help="operand range (default 32, 10 for sdiv)")
    p.add_argument("--bandwidth", type=float, help="link rate in Mbps for modeled transfer time")
    p.add_argument("--out", help="JSON report path; CSV and PNG are written next to it")
    p.add_argument("--keys")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("selftest", help="check key material and protocol invariants")
    p.add_argument("--keys")
    p.add_argument("--bits", **bits)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"twinpai: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"twinpai: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except KeyFileError as exc:
        print(f"twinpai: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TwinPaiError as exc:
        print(f"twinpai: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CRYPTO
    except OSError as exc:
        print(f"twinpai: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
