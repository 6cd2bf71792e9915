"""Acceptance criteria, each printing a single PASS/FAIL line.

Protocol runs are shared: one module-scoped pass per transport feeds the
correctness, communication and transport-transparency criteria.
"""

import random
import statistics
import threading
import time
from dataclasses import dataclass, field

import pytest

from twinpai.fastpai import SecurityParams, dec, decode, enc, enc_direct, encode, keygen
from twinpai.keyfile import KeySet
from twinpai.modmath import RandomSource, sample_bits
from twinpai.offline import (
    build_table,
    build_tuple_s0,
    build_tuple_s1,
    draw_cmp_masks,
    draw_constants,
    draw_mul_masks,
    draw_one,
    enc_fast,
    enc_fast_with_r,
    refresh,
    table_shape,
)
from twinpai.protocols import (
    ProtocolTranscript,
    local_session,
    make_s0_context,
    make_s1_context,
    oracle_cmp,
    oracle_divmod,
    oracle_mul,
    oracle_ssba,
    run_server,
    scmp,
    sdiv,
    smul,
    ssba,
)
from twinpai.threshold import SplitParams, pdec, split_key, tdec
from twinpai.transport import Frame, connect_tcp, decode_frame, encode_frame, listen_tcp

N_LEN = 2048
RANGE_L = 32
SDIV_L = 10
RUNS = 500
SDIV_RUNS = 200

# reference payloads in KiB (1 KB = 1024 bytes)
PAYLOAD_KIB = {"smul": 1.498, "scmp": 1.498, "ssba": 2.997, "sdiv": 32.965}
EXPECTED_COUNTS = {"smul": 3, "scmp": 3, "ssba": 6, "sdiv": 6 * (SDIV_L + 1)}
SLACK_PER_VALUE = 8


@pytest.fixture
def announce(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")

    return emit


@pytest.fixture(scope="module")
def keys():
    return KeySet.generate(SecurityParams.for_bits(N_LEN), RandomSource.seeded(0xACCE))


@pytest.fixture(scope="module")
def table(keys):
    return build_table(keys.pk, 5, keys.params.l_len)


def _timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


# 1 -----------------------------------------------------------------------


def test_criterion_1_roundtrip(announce):
    t0 = time.perf_counter()
    failures = []
    total = 0
    for n_len in (1024, 2048):
        rs = RandomSource.seeded(n_len)
        pk, sk = keygen(SecurityParams.for_bits(n_len), rs)
        signed = [0, 1, -1, 2**32, -(2**32)] + [rs.randrange(-(2**32), 2**32 + 1) for _ in range(245)]
        for x in signed:
            total += 1
            if decode(dec(sk, enc(pk, encode(x, pk.N), rs)), pk.N) != x:
                failures.append((n_len, x))
        for _ in range(250):
            m = rs.randbelow(pk.N)
            total += 1
            if dec(sk, enc(pk, m, rs)) != m:
                failures.append((n_len, m))
    elapsed = time.perf_counter() - t0
    ok = not failures and total == 1000 and elapsed < 60
    announce(1, "cryptosystem round-trip", ok, f"{total - len(failures)}/{total} exact at n_len 1024 and 2048, {elapsed:.1f} s")
    assert not failures
    assert elapsed < 60


# 2 -----------------------------------------------------------------------


def test_criterion_2_threshold(keys, table, announce):
    pk, sk = keys.pk, keys.sk
    rs = RandomSource.seeded(2)
    mismatches = 0
    for eta in (0, 1):
        k1, k2 = split_key(sk, pk, SplitParams(128, eta), rs)
        for _ in range(RUNS):
            c = enc_fast(pk, table, rs.randbelow(pk.N), rs)
            mismatches += tdec(pdec(k1, c), pdec(k2, c)) != dec(sk, c)
    bad_splits = 0
    for i in range(100):
        k1, k2 = split_key(sk, pk, SplitParams(128, i % 2), rs)
        total = k1.share + k2.share
        bad_splits += total % (2 * sk.alpha) != 0 or total % pk.N != 1
    ok = mismatches == 0 and bad_splits == 0
    announce(
        2, "threshold correctness", ok,
        f"{2 * RUNS - mismatches}/{2 * RUNS} tdec == dec over eta 0 and 1, {100 - bad_splits}/100 splits satisfy both congruences",
    )
    assert mismatches == 0 and bad_splits == 0


# 3 -----------------------------------------------------------------------


def test_criterion_3_fast_encryption(keys, table, announce):
    pk = keys.pk
    rs = RandomSource.seeded(3)
    assert (table.block, table.width) == (5, keys.params.l_len)
    differ = 0
    for _ in range(200):
        m, r = rs.randbelow(pk.N), sample_bits(rs, pk.r_bits)
        differ += enc_fast_with_r(pk, table, m, r) != enc_direct(pk, m, r)
    announce(3, "fast encryption equivalence", differ == 0, f"{200 - differ}/200 bit-identical at b=5, len={table.width}")
    assert differ == 0


# 4, 5 and 8 share these runs ----------------------------------------------


@dataclass
class SuiteOutcome:
    transport: str
    wrong: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    payloads: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    channel_ct_bytes: int = 0
    transcript_ct_bytes: int = 0
    seconds: float = 0.0


def _inputs():
    rng = random.Random(0x5EED)
    bound = 1 << RANGE_L
    edges = [(0, 0), (bound, bound), (-bound, bound), (bound, -bound), (-bound, -bound), (5, 5), (-5, -5), (0, -1)]
    pairs = edges + [(rng.randint(-bound, bound), rng.randint(-bound, bound)) for _ in range(RUNS - len(edges))]
    div_edges = [(17, 5), (0, 1), (1 << SDIV_L, 1), (1 << SDIV_L, 1 << SDIV_L), (3, 1 << SDIV_L)]
    div = div_edges + [
        (rng.randint(0, 1 << SDIV_L), rng.randint(1, 1 << SDIV_L)) for _ in range(SDIV_RUNS - len(div_edges))
    ]
    return pairs, div


def _run_suite(keys, table, channel, ctx0, transport):
    pk, sk = keys.pk, keys.sk
    rs = RandomSource.seeded(44)
    out = SuiteOutcome(transport)

    def E(v):
        return enc_fast(pk, table, encode(v, pk.N), rs)

    def D(c):
        return decode(dec(sk, c), pk.N)

    def record(name, ok, tr):
        out.runs[name] = out.runs.get(name, 0) + 1
        out.wrong[name] = out.wrong.get(name, 0) + (not ok)
        out.counts.setdefault(name, set()).add(tr.ciphertext_count)
        out.payloads.setdefault(name, []).append(tr.payload_bytes)
        out.transcript_ct_bytes += tr.payload_bytes

    before = channel.stats()
    t0 = time.perf_counter()
    pairs, div = _inputs()
    for x, y in pairs:
        cx, cy = E(x), E(y)
        tr = ProtocolTranscript("smul")
        z = D(smul(ctx0, channel, cx, cy, transcript=tr))
        record("smul", z == oracle_mul(x, y), tr)
        row = [z]
        for pi in (0, 1):
            tr = ProtocolTranscript("scmp")
            mu = D(scmp(ctx0, channel, cx, cy, pi=pi, transcript=tr))
            record("scmp", mu == oracle_cmp(x, y), tr)
            row.append(mu)
        tr = ProtocolTranscript("ssba")
        s, mag = ssba(ctx0, channel, cx, transcript=tr)
        s, mag = D(s), D(mag)
        record("ssba", (s, mag) == oracle_ssba(x), tr)
        out.outputs.append((x, y, *row, s, mag))
    for x, y in div:
        tr = ProtocolTranscript("sdiv")
        q, e = sdiv(ctx0, channel, E(x), E(y), SDIV_L, transcript=tr)
        q, e = D(q), D(e)
        record("sdiv", (q, e) == oracle_divmod(x, y) and x == q * y + e and 0 <= e < y, tr)
        out.outputs.append((x, y, q, e))
    out.seconds = time.perf_counter() - t0
    out.channel_ct_bytes = (channel.stats() - before).payload_bytes
    return out


@pytest.fixture(scope="module")
def parties(keys, table):
    rs = RandomSource.seeded(45)
    ctx1 = make_s1_context(keys.pk, keys.share2, keys.params, rs, range_l=RANGE_L, table=table)
    ctx0 = make_s0_context(keys.pk, keys.share1, keys.params, rs, range_l=RANGE_L, table=table)
    return ctx0, ctx1


@pytest.fixture(scope="module")
def outcomes(keys, table, parties):
    ctx0, ctx1 = parties
    results = {}
    with local_session(ctx1) as channel:
        results["in-memory"] = _run_suite(keys, table, channel, ctx0, "in-memory")
    acceptor = listen_tcp("127.0.0.1:0")
    host, port = acceptor.address
    stop = threading.Event()
    server = threading.Thread(target=run_server, args=(ctx1, acceptor, stop))
    server.start()
    try:
        with connect_tcp(f"{host}:{port}", keys.pk.digest()) as channel:
            results["tcp"] = _run_suite(keys, table, channel, ctx0, "tcp")
    finally:
        stop.set()
        server.join(timeout=30)
    return results


def _correct(o: SuiteOutcome) -> bool:
    expected_runs = {"smul": RUNS, "scmp": 2 * RUNS, "ssba": RUNS, "sdiv": SDIV_RUNS}
    return o.runs == expected_runs and not any(o.wrong.values())


def _communication_ok(o: SuiteOutcome) -> tuple[bool, str]:
    ct_bytes = (2 * N_LEN + 7) // 8
    parts, ok = [], True
    for name, count in EXPECTED_COUNTS.items():
        exact = o.counts[name] == {count}
        within_slack = all(count * ct_bytes - SLACK_PER_VALUE * count <= p <= count * ct_bytes for p in o.payloads[name])
        mean_kib = statistics.fmean(o.payloads[name]) / 1024
        rel = abs(mean_kib - PAYLOAD_KIB[name]) / PAYLOAD_KIB[name]
        ok &= exact and within_slack and rel <= 0.01
        parts.append(f"{name} {sorted(o.counts[name])} cts {mean_kib:.3f} KiB ({100 * rel:.2f}% off)")
    ok &= o.channel_ct_bytes == o.transcript_ct_bytes
    return ok, ", ".join(parts)


def test_criterion_4_protocols_vs_oracle(outcomes, announce):
    o = outcomes["in-memory"]
    ok = _correct(o) and o.seconds < 15 * 60
    wrong = sum(o.wrong.values())
    announce(
        4, "protocol correctness vs oracle", ok,
        f"smul {o.runs['smul']}, scmp {o.runs['scmp']} (both pi), ssba {o.runs['ssba']}, "
        f"sdiv {o.runs['sdiv']} at l={SDIV_L}; {wrong} mismatches; {o.seconds:.0f} s in-memory",
    )
    assert _correct(o)
    assert o.seconds < 15 * 60


def test_criterion_5_communication(outcomes, announce):
    o = outcomes["in-memory"]
    ok, detail = _communication_ok(o)
    announce(5, "communication exactness", ok, detail)
    assert ok


def test_criterion_6_performance(keys, table, announce):
    pk, sk = keys.pk, keys.sk
    rs = RandomSource.seeded(6)
    k1, _ = split_key(sk, pk, SplitParams(128, 0), rs)
    fast, slow = [], []
    for _ in range(200):
        m, r = rs.randbelow(pk.N), sample_bits(rs, pk.r_bits)
        slow.append(_timed(enc_direct, pk, m, r))
        fast.append(_timed(enc_fast_with_r, pk, table, m, r))
    part, full = [], []
    for _ in range(200):
        c = enc_fast(pk, table, rs.randbelow(pk.N), rs)
        part.append(_timed(pdec, k1, c))
        full.append(_timed(dec, sk, c))
    enc_ratio = statistics.median(slow) / statistics.median(fast)
    dec_ratio = statistics.median(full) / statistics.median(part)
    rows, cols = table_shape(keys.params.l_len, 5)
    ok = enc_ratio >= 3 and dec_ratio >= 2 and table.size == rows * cols == 2880
    announce(
        6, "performance ratios", ok,
        f"enc_fast {enc_ratio:.1f}x faster than direct two-exponentiation encryption, "
        f"pdec(sk1) {dec_ratio:.1f}x faster than dec, table {table.rows}x{table.columns} = {table.size} entries",
    )
    assert enc_ratio >= 3
    assert dec_ratio >= 2
    assert table.size == 2880


def test_criterion_7_refresh(keys, table, announce):
    pk, sk, params = keys.pk, keys.sk, keys.params
    rs = RandomSource.seeded(7)
    bad = 0
    for _ in range(200):
        m = rs.randbelow(pk.N)
        c = enc_fast(pk, table, m, rs)
        fresh = refresh(pk, c, enc_fast(pk, table, 0, rs))
        bad += fresh.value == c.value or dec(sk, fresh) != m
    t0 = build_tuple_s0(pk, params, rs, table)
    t1 = build_tuple_s1(pk, rs, table)
    seen, drawn = set(), 0
    for _ in range(100):
        slots = list(draw_mul_masks(t0, pk)[2:]) + list(draw_cmp_masks(t0, pk)[2:])
        slots += list(draw_constants(t0, pk)) + [draw_one(t0, pk)] + list(draw_constants(t1, pk))
        for c in slots:
            seen.add(c.value)
            drawn += 1
    ok = bad == 0 and len(seen) == drawn
    announce(
        7, "refresh soundness", ok,
        f"{200 - bad}/200 refreshed ciphertexts changed and decrypt unchanged, {len(seen)}/{drawn} drawn slots distinct over 100 draws",
    )
    assert bad == 0
    assert len(seen) == drawn


def test_criterion_8_transport_transparency(outcomes, announce):
    mem, tcp = outcomes["in-memory"], outcomes["tcp"]
    both_correct = _correct(mem) and _correct(tcp)
    comm_ok = _communication_ok(mem)[0] and _communication_ok(tcp)[0]
    same = mem.outputs == tcp.outputs and mem.counts == tcp.counts
    rng = random.Random(8)
    lossy = 0
    for _ in range(10_000):
        if rng.random() < 0.5:
            f = Frame.with_values(rng.choice([1, 2, 3, 4]), rng.getrandbits(64), [rng.getrandbits(4096) for _ in range(rng.randint(0, 3))])
        else:
            f = Frame(rng.randrange(256), rng.getrandbits(64), rng.randbytes(rng.randrange(200)))
        lossy += decode_frame(encode_frame(f)) != f
    ok = both_correct and comm_ok and same and lossy == 0
    announce(
        8, "transport transparency", ok,
        f"criteria 4-5 {'hold' if both_correct and comm_ok else 'fail'} on in-memory and loopback TCP "
        f"(tcp {tcp.seconds:.0f} s), identical outputs: {same}, frame codec {10_000 - lossy}/10000 lossless",
    )
    assert both_correct and comm_ok
    assert same
    assert lossy == 0
