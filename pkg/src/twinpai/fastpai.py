"""FastPai: Paillier with a short private key and structured primes.

The modulus is N = P*Q with P = 2*p*p' + 1 and Q = 2*q*q' + 1, where p and q
are small primes whose product alpha is the private key. Encryption uses a
public generator h whose order divides 2*alpha, so decryption only needs an
exponentiation by 2*alpha instead of by lambda(N).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import gmpy2

from .codec import encode_bigints
from .errors import (
    EncodeRangeError,
    GenerationFailure,
    InvalidArgument,
    MalformedCiphertext,
)
from .modmath import (
    RandomSource,
    is_probable_prime,
    mod_inv,
    mod_pow,
    sample_bits,
    sample_odd,
    sample_prime,
)

# n_len -> (kappa, l_len). 2048/448 is the evaluated configuration; the other
# rows follow the same short-key scaling.
PROFILES = {
    1024: (80, 320),
    2048: (112, 448),
    3072: (128, 512),
}

NGEN_MAX_ITERATIONS = 10**6


@dataclass(frozen=True)
class SecurityParams:
    kappa: int
    n_len: int
    l_len: int
    sigma: int = 128
    table_block: int = 5
    table_len: int | None = None

    def __post_init__(self) -> None:
        if self.table_len is None:
            object.__setattr__(self, "table_len", self.l_len)
        if self.n_len % 2:
            raise InvalidArgument("n_len must be even")
        if self.l_len % 2 or not 0 < self.l_len < self.n_len:
            raise InvalidArgument("l_len must be even and below n_len")
        if (self.n_len - self.l_len) // 2 - 1 < 2:
            raise InvalidArgument("n_len - l_len too small for the cofactors")
        if self.l_len // 2 < 8:
            raise InvalidArgument("l_len must be at least 16")
        if self.sigma < 128:
            raise InvalidArgument("sigma must be >= 128")
        if not 1 <= self.table_block <= 16:
            raise InvalidArgument("table_block must lie in [1, 16]")
        if self.table_len < 1:
            raise InvalidArgument("table_len must be positive")

    @classmethod
    def for_bits(cls, n_len: int = 2048, **overrides) -> "SecurityParams":
        try:
            kappa, l_len = PROFILES[n_len]
        except KeyError:
            raise InvalidArgument(
                f"no profile for n_len={n_len}; choose from {sorted(PROFILES)}"
            ) from None
        return cls(kappa=kappa, n_len=n_len, l_len=l_len, **overrides)

    @property
    def cofactor_bits(self) -> int:
        return (self.n_len - self.l_len) // 2 - 1


@dataclass(frozen=True)
class FactorWitness:
    P: int
    Q: int
    p: int
    q: int
    p_dash: int
    q_dash: int

    @property
    def N(self) -> int:
        return self.P * self.Q


def _pairwise_coprime(values: tuple[int, ...]) -> bool:
    return all(
        math.gcd(a, b) == 1
        for i, a in enumerate(values)
        for b in values[i + 1 :]
    )


def make_witness(p: int, q: int, p_dash: int, q_dash: int) -> FactorWitness:
    """Assemble a witness from chosen factors, rejecting invalid choices."""
    if not _pairwise_coprime((p, q, p_dash, q_dash)):
        raise InvalidArgument("p, q, p', q' are not pairwise coprime")
    P = 2 * p * p_dash + 1
    Q = 2 * q * q_dash + 1
    for name, value in (("p", p), ("q", q), ("P", P), ("Q", Q)):
        if not is_probable_prime(value):
            raise InvalidArgument(f"{name}={value} is not prime")
    return FactorWitness(P, Q, p, q, p_dash, q_dash)


def ngen(params: SecurityParams, rs: RandomSource, max_iterations: int = NGEN_MAX_ITERATIONS) -> FactorWitness:
    half = params.n_len // 2
    small_bits = params.l_len // 2
    cofactor_bits = params.cofactor_bits
    budget = [max_iterations]

    def spend() -> None:
        budget[0] -= 1
        if budget[0] < 0:
            raise GenerationFailure(f"no modulus found within {max_iterations} iterations")

    def structured_prime(small: int, avoid: tuple[int, ...]) -> tuple[int, int]:
        while True:
            spend()
            cofactor = sample_odd(rs, cofactor_bits)
            if math.gcd(cofactor, small) != 1 or any(math.gcd(cofactor, a) != 1 for a in avoid):
                continue
            big = 2 * small * cofactor + 1
            if big.bit_length() != half:
                continue
            if is_probable_prime(big, rs=rs):
                return big, cofactor

    while True:
        spend()
        p = sample_prime(rs, small_bits)
        q = sample_prime(rs, small_bits)
        if p == q or (p * q).bit_length() != params.l_len:
            continue
        P, p_dash = structured_prime(p, (q,))
        Q, q_dash = structured_prime(q, (p, p_dash))
        if P == Q or not _pairwise_coprime((p, q, p_dash, q_dash)):
            continue
        return FactorWitness(P, Q, p, q, p_dash, q_dash)


@dataclass(frozen=True)
class PublicKey:
    N: int
    h: int
    r_bits: int
    N_squared: int = field(init=False, repr=False)
    half_N: int = field(init=False, repr=False)
    h_pow_N: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.N < 3 or not self.N & 1:
            raise InvalidArgument("N must be an odd modulus")
        if not 1 < self.h < self.N:
            raise InvalidArgument("h must lie in (1, N)")
        if self.r_bits < 1:
            raise InvalidArgument("r_bits must be positive")
        n2 = self.N * self.N
        object.__setattr__(self, "N_squared", n2)
        object.__setattr__(self, "half_N", self.N // 2)
        object.__setattr__(self, "h_pow_N", mod_pow(self.h, self.N, n2))

    def serialize(self) -> bytes:
        return encode_bigints((self.N, self.h))

    def digest(self) -> bytes:
        return hashlib.sha256(self.serialize()).digest()


@dataclass(frozen=True)
class PrivateKey:
    alpha: int
    N: int
    double_alpha_inv: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if math.gcd(2 * self.alpha, self.N) != 1:
            raise InvalidArgument("gcd(2*alpha, N) must be 1")
        object.__setattr__(self, "double_alpha_inv", mod_inv(2 * self.alpha, self.N))


@dataclass(frozen=True)
class Ciphertext:
    value: int

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise InvalidArgument("ciphertext values are positive residues")


def keys_from_witness(w: FactorWitness, rs: RandomSource, r_bits: int) -> tuple[PublicKey, PrivateKey]:
    N = w.N
    alpha = w.p * w.q
    num = (w.P - 1) * (w.Q - 1)
    if num % (4 * alpha):
        raise GenerationFailure("beta is not integral")
    beta = num // (4 * alpha)
    while True:
        y = rs.randrange(1, N)
        if math.gcd(y, N) != 1:
            continue
        h = (N - mod_pow(y, 2 * beta, N)) % N
        if h > 1:
            break
    return PublicKey(N, h, r_bits), PrivateKey(alpha, N)


def keygen(params: SecurityParams, rs: RandomSource) -> tuple[PublicKey, PrivateKey]:
    return keys_from_witness(ngen(params, rs), rs, params.l_len)


def encode(x: int, N: int, bound_bits: int | None = None) -> int:
    """Map a signed integer into Z_N, negatives going to N - |x|."""
    if 4 * abs(x) >= N:
        raise EncodeRangeError(f"|{x}| must stay below N/4")
    if bound_bits is not None and abs(x) > 1 << bound_bits:
        raise EncodeRangeError(f"|{x}| exceeds 2^{bound_bits}")
    return x if x >= 0 else N + x


def decode(m: int, N: int) -> int:
    if not 0 <= m < N:
        raise InvalidArgument("encoded value outside [0, N)")
    return m if m <= N // 2 else m - N


def _check_plain(pk: PublicKey, m: int) -> None:
    if not 0 <= m < pk.N:
        raise InvalidArgument("plaintext must lie in [0, N)")


def enc_direct(pk: PublicKey, m: int, r: int) -> Ciphertext:
    """(1+N)^m * (h^r mod N)^N mod N^2, evaluated term by term."""
    _check_plain(pk, m)
    n2 = pk.N_squared
    g_m = mod_pow(1 + pk.N, m, n2)
    hr = mod_pow(pk.h, r, pk.N)
    return Ciphertext(int(gmpy2.mpz(g_m) * mod_pow(hr, pk.N, n2) % n2))


def enc(pk: PublicKey, m: int, rs: RandomSource) -> Ciphertext:
    return enc_direct(pk, m, sample_bits(rs, pk.r_bits))


def enc_with_r(pk: PublicKey, m: int, r: int) -> Ciphertext:
    """Deterministic encryption (1 + m*N) * (h^N mod N^2)^r mod N^2."""
    _check_plain(pk, m)
    if r < 0:
        raise InvalidArgument("r must be non-negative")
    n2 = pk.N_squared
    return Ciphertext(int((1 + m * pk.N) * gmpy2.powmod(pk.h_pow_N, r, n2) % n2))


def dec(sk: PrivateKey, c: Ciphertext) -> int:
    N = sk.N
    n2 = N * N
    if not 0 < c.value < n2:
        raise MalformedCiphertext("ciphertext outside Z_{N^2}")
    u = gmpy2.powmod(c.value, 2 * sk.alpha, n2) - 1
    if u % N:
        raise MalformedCiphertext("c^(2*alpha) is not 1 mod N")
    return int((u // N) * sk.double_alpha_inv % N)


def hom_add(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    return Ciphertext(int(gmpy2.mpz(c1.value) * c2.value % pk.N_squared))


def hom_scal(pk: PublicKey, c: Ciphertext, k: int) -> Ciphertext:
    if not 0 <= k < pk.N:
        raise InvalidArgument("scalar must lie in [0, N)")
    return Ciphertext(int(gmpy2.powmod(c.value, k, pk.N_squared)))


def hom_neg(pk: PublicKey, c: Ciphertext) -> Ciphertext:
    """Encryption of -m, computed as the inverse of c modulo N^2.

    Decrypts like c^(N-1) (the two differ by a factor c^N, an encryption of
    zero) at the cost of one inversion instead of a full-width power.
    """
    return Ciphertext(mod_inv(c.value, pk.N_squared))


def hom_sub(pk: PublicKey, c1: Ciphertext, c2: Ciphertext) -> Ciphertext:
    return hom_add(pk, c1, hom_neg(pk, c2))
