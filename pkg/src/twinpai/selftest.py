"""Named invariant checks over a key set, run by ``twinpai selftest``."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

from .fastpai import dec, decode, enc_direct, enc_with_r, encode
from .keyfile import KeySet
from .modmath import RandomSource, is_probable_prime, sample_bits
from .offline import build_table, enc_fast_with_r, encrypt
from .protocols import (
    local_session,
    make_s0_context,
    make_s1_context,
    oracle_cmp,
    oracle_divmod,
    oracle_mul,
    oracle_ssba,
    scmp,
    sdiv,
    smul,
    ssba,
)
from .threshold import pdec, shares_consistent, tdec


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


class CheckFailed(Exception):
    pass


def _expect(cond: bool, detail: str) -> None:
    if not cond:
        raise CheckFailed(detail)


def run_selftest(keys: KeySet, rs: RandomSource | None = None, samples: int = 8) -> list[CheckResult]:
    """Run every check, continuing past failures; one result per check."""
    keys.require("sk", "share1", "share2")
    rs = rs or RandomSource()
    pk, sk, k1, k2 = keys.pk, keys.sk, keys.share1, keys.share2
    state: dict = {}

    def E(v: int):
        return encrypt(pk, encode(v, pk.N), rs, state.get("table"))

    def D(c) -> int:
        return decode(dec(sk, c), pk.N)

    def primes() -> None:
        _expect(is_probable_prime((1 << 61) - 1) and not is_probable_prime(561), "known primes misclassified")

    def key_shape() -> None:
        _expect(pk.N.bit_length() in (keys.params.n_len, keys.params.n_len - 1), "modulus has the wrong size")
        _expect(sk.N == pk.N, "master key modulus differs from the public key")

    def roundtrip() -> None:
        for v in [0, 1, -1, (1 << 32), -(1 << 32)] + [rs.randrange(-(1 << 32), 1 << 32) for _ in range(samples)]:
            _expect(D(E(v)) == v, f"dec(enc({v})) != {v}")

    def enc_forms() -> None:
        for _ in range(samples // 2 or 1):
            m, r = rs.randbelow(pk.N), sample_bits(rs, pk.r_bits)
            _expect(enc_direct(pk, m, r) == enc_with_r(pk, m, r), "encryption forms disagree")

    def fast_enc() -> None:
        state["table"] = build_table(pk, keys.params.table_block, keys.params.table_len)
        for _ in range(samples // 2 or 1):
            m, r = rs.randbelow(pk.N), sample_bits(rs, pk.r_bits)
            _expect(enc_fast_with_r(pk, state["table"], m, r) == enc_with_r(pk, m, r), "table encryption differs")

    def share_congruence() -> None:
        _expect(k1.index == 1 and k2.index == 2, "share indices are not (1, 2)")
        total = k1.share + k2.share
        _expect(total % (2 * sk.alpha) == 0, "sk1 + sk2 is not 0 mod 2*alpha")
        _expect(total % sk.N == 1, "sk1 + sk2 is not 1 mod N")
        _expect(shares_consistent(sk, k1, k2), "share pair inconsistent")

    def recombine() -> None:
        for _ in range(samples):
            c = E(rs.randrange(-(1 << 32), 1 << 32))
            _expect(tdec(pdec(k1, c), pdec(k2, c)) == dec(sk, c), "tdec differs from dec")

    def protocols() -> None:
        ctx1 = make_s1_context(pk, k2, keys.params, rs, table=state.get("table"))
        ctx0 = make_s0_context(pk, k1, keys.params, rs, table=ctx1.table)
        bound = 1 << 32
        with local_session(ctx1) as ch:
            for _ in range(samples):
                x, y = rs.randrange(-bound, bound + 1), rs.randrange(-bound, bound + 1)
                cx, cy = E(x), E(y)
                _expect(D(smul(ctx0, ch, cx, cy)) == oracle_mul(x, y), f"smul({x}, {y})")
                for pi in (0, 1):
                    _expect(D(scmp(ctx0, ch, cx, cy, pi=pi)) == oracle_cmp(x, y), f"scmp({x}, {y}) pi={pi}")
                s, mag = ssba(ctx0, ch, cx)
                _expect((D(s), D(mag)) == oracle_ssba(x), f"ssba({x})")
            for _ in range(2):
                x, y = rs.randrange(0, 1025), rs.randrange(1, 1025)
                q, e = sdiv(ctx0, ch, E(x), E(y), 10)
                _expect((D(q), D(e)) == oracle_divmod(x, y), f"sdiv({x}, {y})")

    checks: list[tuple[str, Callable[[], None]]] = [
        ("modmath.primality", primes),
        ("keys.shape", key_shape),
        ("fastpai.roundtrip", roundtrip),
        ("fastpai.encryption_forms", enc_forms),
        ("offline.table_encryption", fast_enc),
        ("threshold.share_congruence", share_congruence),
        ("threshold.recombination", recombine),
        ("protocols.vs_oracle", protocols),
    ]
    results = []
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            fn()
            ok, detail = True, "ok"
        except Exception as exc:  # a check failing in any way is a result, not a crash
            ok, detail = False, str(exc) or type(exc).__name__
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
