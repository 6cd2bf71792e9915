"""Offline material for the online protocols.

S0 keeps a tuple of masks together with their encryptions, S1 keeps fresh
encryptions of 0 and 1, and S1 also holds a fixed-base table for the one
encryption it cannot precompute. Tuple ciphertexts are handed out and then
refreshed in place by multiplying with an encryption of zero.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2

from .codec import int_to_bytes
from .errors import InvalidArgument, WidthError
from .fastpai import Ciphertext, PublicKey, SecurityParams, enc_with_r, hom_add
from .modmath import RandomSource, sample_bits


@dataclass(frozen=True)
class PrecompTable:
    base: int
    block: int
    width: int
    modulus: int
    entries: tuple[tuple[gmpy2.mpz, ...], ...] = field(repr=False)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def columns(self) -> int:
        return 1 << self.block

    @property
    def size(self) -> int:
        return self.rows * self.columns

    @property
    def size_bits(self) -> int:
        return self.size * self.modulus.bit_length()

    def entry(self, i: int, j: int) -> int:
        return int(self.entries[i][j])


def table_shape(width: int, block: int) -> tuple[int, int]:
    return -(-width // block), 1 << block


def build_table(pk: PublicKey, b: int | None = None, width: int | None = None) -> PrecompTable:
    """Table of (a^(2^(i*b)))^j mod N^2 for the fixed base a = h^N mod N^2."""
    b = 5 if b is None else b
    width = pk.r_bits if width is None else width
    if not 1 <= b <= 16:
        raise InvalidArgument("block width must lie in [1, 16]")
    if width < 1:
        raise InvalidArgument("table width must be positive")
    n2 = gmpy2.mpz(pk.N_squared)
    rows, cols = table_shape(width, b)
    entries = []
    row_base = gmpy2.mpz(pk.h_pow_N)
    for _ in range(rows):
        row = [gmpy2.mpz(1)]
        for _ in range(cols - 1):
            row.append(row[-1] * row_base % n2)
        entries.append(tuple(row))
        row_base = row[-1] * row_base % n2
    return PrecompTable(pk.h_pow_N, b, width, pk.N_squared, tuple(entries))


def fixed_base_pow(t: PrecompTable, x: int) -> int:
    if x < 0:
        raise InvalidArgument("exponent must be non-negative")
    if x.bit_length() > t.width:
        raise WidthError(f"exponent has {x.bit_length()} bits, table covers {t.width}")
    mask = t.columns - 1
    acc = gmpy2.mpz(1)
    for row in t.entries:
        j = x & mask
        if j:
            acc = acc * row[j] % t.modulus
        x >>= t.block
    return int(acc)


def enc_fast_with_r(pk: PublicKey, t: PrecompTable, m: int, r: int) -> Ciphertext:
    if t.modulus != pk.N_squared or t.base != pk.h_pow_N:
        raise InvalidArgument("table was built for a different key")
    if not 0 <= m < pk.N:
        raise InvalidArgument("plaintext must lie in [0, N)")
    return Ciphertext(int((1 + m * pk.N) * gmpy2.mpz(fixed_base_pow(t, r)) % pk.N_squared))


def enc_fast(pk: PublicKey, t: PrecompTable, m: int, rs: RandomSource) -> Ciphertext:
    return enc_fast_with_r(pk, t, m, sample_bits(rs, t.width))


def encrypt(pk: PublicKey, m: int, rs: RandomSource, table: PrecompTable | None = None) -> Ciphertext:
    """Fresh encryption by the cheapest available route."""
    if table is not None:
        return enc_fast(pk, table, m, rs)
    return enc_with_r(pk, m, sample_bits(rs, pk.r_bits))


def refresh(pk: PublicKey, c: Ciphertext, enc_zero: Ciphertext) -> Ciphertext:
    return hom_add(pk, c, enc_zero)


@dataclass
class TupleS0:
    r1: int
    r2: int
    enc_r1: Ciphertext
    enc_r2: Ciphertext
    enc_neg_r1r2: Ciphertext
    r3: int
    r4: int
    enc_r3_plus_r4: Ciphertext
    enc_r4: Ciphertext
    enc_zero: Ciphertext
    enc_one: Ciphertext
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


@dataclass
class TupleS1:
    enc_zero: Ciphertext
    enc_one: Ciphertext
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)


def build_tuple_s0(
    pk: PublicKey, params: SecurityParams, rs: RandomSource, table: PrecompTable | None = None
) -> TupleS0:
    sigma = params.sigma
    half = pk.half_N
    r1 = sample_bits(rs, sigma)
    r2 = sample_bits(rs, sigma)
    r3 = 0
    while r3 == 0:
        r3 = sample_bits(rs, sigma)
    r4 = half - rs.randbelow(r3)

    def e(m: int) -> Ciphertext:
        return encrypt(pk, m % pk.N, rs, table)

    return TupleS0(
        r1=r1,
        r2=r2,
        enc_r1=e(r1),
        enc_r2=e(r2),
        enc_neg_r1r2=e(-r1 * r2),
        r3=r3,
        r4=r4,
        enc_r3_plus_r4=e(r3 + r4),
        enc_r4=e(r4),
        enc_zero=e(0),
        enc_one=e(1),
    )


def build_tuple_s1(pk: PublicKey, rs: RandomSource, table: PrecompTable | None = None) -> TupleS1:
    return TupleS1(enc_zero=encrypt(pk, 0, rs, table), enc_one=encrypt(pk, 1, rs, table))


def draw_mul_masks(t: TupleS0, pk: PublicKey) -> tuple[int, int, Ciphertext, Ciphertext, Ciphertext]:
    with t._lock:
        out = (t.r1, t.r2, t.enc_r1, t.enc_r2, t.enc_neg_r1r2)
        t.enc_r1 = refresh(pk, t.enc_r1, t.enc_zero)
        t.enc_r2 = refresh(pk, t.enc_r2, t.enc_zero)
        t.enc_neg_r1r2 = refresh(pk, t.enc_neg_r1r2, t.enc_zero)
    return out


def draw_cmp_masks(t: TupleS0, pk: PublicKey) -> tuple[int, int, Ciphertext, Ciphertext]:
    """r3, r4 and their encryptions, relabelled as (r1, r2, [r1+r2], [r2])."""
    with t._lock:
        out = (t.r3, t.r4, t.enc_r3_plus_r4, t.enc_r4)
        t.enc_r3_plus_r4 = refresh(pk, t.enc_r3_plus_r4, t.enc_zero)
        t.enc_r4 = refresh(pk, t.enc_r4, t.enc_zero)
    return out


def draw_constants(t: TupleS0 | TupleS1, pk: PublicKey) -> tuple[Ciphertext, Ciphertext]:
    """Hand out ([0], [1]) and refresh both in the store."""
    with t._lock:
        zero, one = t.enc_zero, t.enc_one
        t.enc_one = refresh(pk, one, zero)
        t.enc_zero = refresh(pk, zero, zero)
    return zero, one


def draw_one(t: TupleS0, pk: PublicKey) -> Ciphertext:
    with t._lock:
        one = t.enc_one
        t.enc_one = refresh(pk, one, t.enc_zero)
    return one


# Table cache file:
#   magic "SPCT" | version u8 | block u8 | width u32 | sha256(N^2) 32 bytes
#   | rows*cols entries, row-major, each u32 length + big-endian magnitude
#   | sha256 of everything above
TABLE_MAGIC = b"SPCT"
TABLE_VERSION = 1
_TABLE_HEADER = struct.Struct("!4sBBI32s")


def _modulus_digest(modulus: int) -> bytes:
    return hashlib.sha256(int_to_bytes(modulus)).digest()


def save_table(t: PrecompTable, path: str | Path) -> None:
    parts = [_TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, t.block, t.width, _modulus_digest(t.modulus))]
    for row in t.entries:
        for value in row:
            raw = int_to_bytes(int(value))
            parts.append(struct.pack("!I", len(raw)) + raw)
    body = b"".join(parts)
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def load_table(path: str | Path, pk: PublicKey) -> PrecompTable:
    data = Path(path).read_bytes()
    if len(data) < _TABLE_HEADER.size + 32:
        raise InvalidArgument("table cache truncated")
    body, checksum = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise InvalidArgument("table cache checksum mismatch")
    magic, version, block, width, digest = _TABLE_HEADER.unpack_from(body)
    if magic != TABLE_MAGIC or version != TABLE_VERSION:
        raise InvalidArgument("not a version-1 table cache")
    if digest != _modulus_digest(pk.N_squared):
        raise InvalidArgument("table cache belongs to a different key")
    rows, cols = table_shape(width, block)
    pos = _TABLE_HEADER.size
    entries = []
    try:
        for _ in range(rows):
            row = []
            for _ in range(cols):
                (n,) = struct.unpack_from("!I", body, pos)
                pos += 4
                row.append(gmpy2.mpz(int.from_bytes(body[pos : pos + n], "big")))
                pos += n
            entries.append(tuple(row))
    except struct.error:
        raise InvalidArgument("table cache truncated") from None
    if pos != len(body):
        raise InvalidArgument("table cache has trailing bytes")
    if int(entries[0][1] if cols > 1 else pk.h_pow_N) != pk.h_pow_N:
        raise InvalidArgument("table cache base does not match the key")
    return PrecompTable(pk.h_pow_N, block, width, pk.N_squared, tuple(entries))

