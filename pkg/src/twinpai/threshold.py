"""(2,2)-threshold decryption for FastPai.

The doubled private key 2*alpha is split into two exponents whose sum delta
satisfies delta = 0 (mod 2*alpha) and delta = 1 (mod N). Raising a ciphertext
to delta strips the randomness and leaves (1+N)^m, so combining the two
partial decryptions recovers m without either party holding alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2

from .errors import InvalidArgument, ThresholdDecryptionFailure
from .fastpai import Ciphertext, PrivateKey, PublicKey
from .modmath import RandomSource, mod_inv

SPLIT_MAX_ATTEMPTS = 1000


@dataclass(frozen=True)
class SplitParams:
    sigma: int = 128
    eta: int = 0

    def __post_init__(self) -> None:
        if self.sigma < 1:
            raise InvalidArgument("sigma must be positive")
        if self.eta < 0:
            raise InvalidArgument("eta must be non-negative")


@dataclass(frozen=True)
class PartialKey:
    index: int
    share: int
    N: int

    def __post_init__(self) -> None:
        if self.index not in (1, 2):
            raise InvalidArgument("share index must be 1 or 2")
        if self.share < 0:
            raise InvalidArgument("share must be non-negative")


@dataclass(frozen=True)
class PartialDecryption:
    index: int
    value: int
    N: int


def combined_exponent(sk: PrivateKey) -> int:
    """delta = ((2*alpha)^-1 mod N) * 2*alpha, the CRT solution for the share sum."""
    double_alpha = 2 * sk.alpha
    return mod_inv(double_alpha, sk.N) * double_alpha


def split_key(
    sk: PrivateKey, pk: PublicKey, sp: SplitParams, rs: RandomSource
) -> tuple[PartialKey, PartialKey]:
    if sk.N != pk.N:
        raise InvalidArgument("private and public key moduli differ")
    double_alpha = 2 * sk.alpha
    delta = combined_exponent(sk)
    lift = sp.eta * double_alpha * sk.N
    if delta + lift < 1 << (sp.sigma - 1):
        raise InvalidArgument(f"sigma={sp.sigma} too large for this key")
    for _ in range(SPLIT_MAX_ATTEMPTS):
        sk1 = rs.getrandbits(sp.sigma - 1) | (1 << (sp.sigma - 1))
        sk2 = delta - sk1 + lift
        if sk2 >= 0:
            return PartialKey(1, sk1, sk.N), PartialKey(2, sk2, sk.N)
    raise InvalidArgument(f"could not draw a sigma={sp.sigma} share below delta")


def pdec(pki: PartialKey, c: Ciphertext) -> PartialDecryption:
    n2 = pki.N * pki.N
    return PartialDecryption(pki.index, int(gmpy2.powmod(c.value, pki.share, n2)), pki.N)


def tdec(m1: PartialDecryption, m2: PartialDecryption) -> int:
    if m1.index == m2.index:
        raise InvalidArgument("threshold decryption needs both distinct shares")
    if m1.N != m2.N:
        raise InvalidArgument("partial decryptions under different moduli")
    N = m1.N
    u = gmpy2.mpz(m1.value) * m2.value % (N * N) - 1
    if u % N:
        raise ThresholdDecryptionFailure("combined value is not 1 mod N")
    return int((u // N) % N)


def shares_consistent(sk: PrivateKey, k1: PartialKey, k2: PartialKey) -> bool:
    """Both defining congruences of a share pair."""
    total = k1.share + k2.share
    return total % (2 * sk.alpha) == 0 and total % sk.N == 1
