"""Modular arithmetic and prime generation primitives.

All public functions take and return plain Python ints; heavy lifting is
delegated to gmpy2.
"""

from __future__ import annotations

import random
import secrets

import gmpy2

from .errors import InvalidArgument, NotInvertibleError

MR_ROUNDS = 64

# Miller-Rabin with these bases is exact below 3.3 * 10**24.
_FIXED_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _small_primes(limit: int) -> list[int]:
    sieve = bytearray([1]) * limit
    sieve[0] = sieve[1] = 0
    for i in range(2, int(limit**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = bytearray(len(sieve[i * i :: i]))
    return [i for i, flag in enumerate(sieve) if flag]


_SMALL_PRIMES = _small_primes(2000)
_SMALL_PRIME_SET = frozenset(_SMALL_PRIMES)
_PRIMORIAL = gmpy2.mpz(1)
for _p in _SMALL_PRIMES:
    _PRIMORIAL *= _p
del _p


class RandomSource:
    """Random-bit generator handle.

    The default instance draws from the operating system CSPRNG. A seeded,
    deterministic instance exists for tests and must be requested explicitly
    via :meth:`seeded`. Instances are not safe to share between threads.
    """

    def __init__(self, generator: random.Random | None = None) -> None:
        self._gen = generator if generator is not None else secrets.SystemRandom()

    @classmethod
    def seeded(cls, seed: int | str | bytes) -> "RandomSource":
        return cls(random.Random(seed))

    @property
    def deterministic(self) -> bool:
        return not isinstance(self._gen, secrets.SystemRandom)

    def getrandbits(self, k: int) -> int:
        if k == 0:
            return 0
        return self._gen.getrandbits(k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise InvalidArgument("upper bound must be positive")
        return self._gen.randrange(n)

    def randrange(self, start: int, stop: int) -> int:
        return self._gen.randrange(start, stop)


def mod_pow(base: int, exp: int, modulus: int) -> int:
    if modulus < 2:
        raise InvalidArgument(f"modulus must be > 1, got {modulus}")
    if exp < 0:
        raise InvalidArgument("exponent must be non-negative")
    return int(gmpy2.powmod(base, exp, modulus))


def mod_inv(a: int, modulus: int) -> int:
    """Return t with a*t = 1 (mod modulus) and 0 < t < modulus."""
    if modulus < 2:
        raise InvalidArgument(f"modulus must be > 1, got {modulus}")
    g = int(gmpy2.gcd(a, modulus))
    if g != 1:
        raise NotInvertibleError(a, modulus, g)
    return int(gmpy2.invert(a, modulus))


def _miller_rabin_round(n: gmpy2.mpz, d: gmpy2.mpz, s: int, a: int) -> bool:
    x = gmpy2.powmod(a, d, n)
    if x == 1 or x == n - 1:
        return True
    for _ in range(s - 1):
        x = x * x % n
        if x == n - 1:
            return True
    return False


def is_probable_prime(n: int, rounds: int = MR_ROUNDS, rs: RandomSource | None = None) -> bool:
    """Miller-Rabin test after trial division by primes below 2000.

    The first twelve witnesses are the primes 2..37; any further rounds use
    random witnesses from ``rs``.
    """
    if n < 2:
        raise InvalidArgument(f"primality undefined for n={n}")
    if rounds < 1:
        raise InvalidArgument("rounds must be >= 1")
    if n in _SMALL_PRIME_SET:
        return True
    if gmpy2.gcd(n, _PRIMORIAL) != 1:
        return False
    if n < _SMALL_PRIMES[-1] ** 2:
        return True

    nm = gmpy2.mpz(n)
    d = nm - 1
    s = 0
    while not d & 1:
        d >>= 1
        s += 1
    for a in _FIXED_BASES[:rounds]:
        if not _miller_rabin_round(nm, d, s, a):
            return False
    extra = rounds - len(_FIXED_BASES)
    if extra > 0:
        rs = rs or RandomSource()
        for _ in range(extra):
            if not _miller_rabin_round(nm, d, s, rs.randrange(2, n - 1)):
                return False
    return True


def sample_bits(rs: RandomSource, k: int) -> int:
    """Uniform value in [0, 2**k)."""
    if k < 1:
        raise InvalidArgument("bit count must be >= 1")
    return rs.getrandbits(k)


def sample_odd(rs: RandomSource, k: int) -> int:
    """k-bit odd integer with its top bit set."""
    if k < 2:
        raise InvalidArgument("odd sampling needs k >= 2")
    return rs.getrandbits(k) | (1 << (k - 1)) | 1


def sample_prime(rs: RandomSource, k: int) -> int:
    """k-bit probable prime (top bit forced, 64 Miller-Rabin rounds)."""
    if k < 8:
        raise InvalidArgument("prime sampling needs k >= 8")
    while True:
        candidate = sample_odd(rs, k)
        if is_probable_prime(candidate, MR_ROUNDS, rs):
            return candidate
