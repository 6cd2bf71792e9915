"""Timing and communication measurements for the two-party protocols.

Runs go over an in-memory channel so that wall-clock numbers reflect
computation only. A bandwidth figure, if given, adds a modeled transfer time
of payload bits over the link rate.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass

from .errors import InternalInvariantError, InvalidArgument
from .fastpai import Ciphertext, encode
from .keyfile import KeySet
from .modmath import RandomSource
from .offline import encrypt
from .protocols import (
    ProtocolTranscript,
    expected_ciphertexts,
    local_session,
    make_s0_context,
    make_s1_context,
    scmp,
    sdiv,
    smul,
    ssba,
)

SCHEMA = "twinpai.bench/1"
PROTOCOLS = ("smul", "scmp", "ssba", "sdiv")
DEFAULT_L = {"smul": 32, "scmp": 32, "ssba": 32, "sdiv": 10}


@dataclass(frozen=True)
class BenchReport:
    protocol: str
    iterations: int
    median_ms: float
    mean_ms: float
    ciphertexts: int
    payload_bytes: int
    n_len: int
    l: int
    bandwidth_mbps: float | None = None
    modeled_transfer_ms: float | None = None

    @property
    def payload_kib(self) -> float:
        return self.payload_bytes / 1024

    def as_dict(self) -> dict:
        d = asdict(self)
        d["payload_kib"] = round(self.payload_kib, 3)
        d["expected_ciphertexts"] = expected_ciphertexts(self.protocol, self.l)
        return d


def modeled_transfer_ms(payload_bytes: int, bandwidth_mbps: float) -> float:
    return payload_bytes * 8 / (bandwidth_mbps * 1e6) * 1e3


def _operands(protocol: str, l: int, rs: RandomSource) -> tuple[int, int]:
    if protocol == "sdiv":
        return rs.randrange(0, (1 << l) + 1), rs.randrange(1, (1 << l) + 1)
    bound = 1 << l
    return rs.randrange(-bound, bound + 1), rs.randrange(-bound, bound + 1)


def run_bench(
    keys: KeySet,
    protocol: str,
    iterations: int,
    l: int | None = None,
    bandwidth_mbps: float | None = None,
    rs: RandomSource | None = None,
) -> BenchReport:
    if protocol not in PROTOCOLS:
        raise InvalidArgument(f"unknown protocol {protocol!r}")
    if iterations < 1:
        raise InvalidArgument("iterations must be positive")
    if bandwidth_mbps is not None and bandwidth_mbps <= 0:
        raise InvalidArgument("bandwidth must be positive")
    keys.require("share1", "share2")
    rs = rs or RandomSource()
    l = DEFAULT_L[protocol] if l is None else l
    pk = keys.pk
    ctx1 = make_s1_context(pk, keys.share2, keys.params, rs, range_l=max(l, 1))
    ctx0 = make_s0_context(pk, keys.share1, keys.params, rs, range_l=max(l, 1), table=ctx1.table)

    def fresh(v: int) -> Ciphertext:
        return encrypt(pk, encode(v, pk.N), rs, ctx1.table)

    samples = []
    counts = set()
    payloads = []
    with local_session(ctx1) as channel:
        for _ in range(iterations):
            x, y = _operands(protocol, l, rs)
            cx, cy = fresh(x), fresh(y)
            tr = ProtocolTranscript(protocol)
            t0 = time.perf_counter()
            if protocol == "smul":
                smul(ctx0, channel, cx, cy, transcript=tr)
            elif protocol == "scmp":
                scmp(ctx0, channel, cx, cy, transcript=tr)
            elif protocol == "ssba":
                ssba(ctx0, channel, cx, transcript=tr)
            else:
                sdiv(ctx0, channel, cx, cy, l, transcript=tr)
            samples.append((time.perf_counter() - t0) * 1e3)
            counts.add(tr.ciphertext_count)
            payloads.append(tr.payload_bytes)
    if len(counts) != 1:
        raise InternalInvariantError(f"ciphertext count varied across runs: {sorted(counts)}")
    payload = round(statistics.mean(payloads))
    return BenchReport(
        protocol=protocol,
        iterations=iterations,
        median_ms=statistics.median(samples),
        mean_ms=statistics.fmean(samples),
        ciphertexts=counts.pop(),
        payload_bytes=payload,
        n_len=keys.params.n_len,
        l=l,
        bandwidth_mbps=bandwidth_mbps,
        modeled_transfer_ms=None if bandwidth_mbps is None else modeled_transfer_ms(payload, bandwidth_mbps),
    )
