"""Additively homomorphic Paillier encryption (teaching-grade, not hardened).

Keys use ``g = n + 1`` and CRT decryption. Vectors travel packed: each
plaintext holds several 48-bit fixed-point slots plus a checksum slot, so a
corrupted ciphertext decrypts to a packing that fails verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np

from ..errors import ConfigError, IntegrityError, MissingKeyError, RingOverflowError

MR_ROUNDS = 64
SMALL_PRIMES = (3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73)


def _randbits(rng, bits):
    nbytes = (bits + 7) // 8
    x = int.from_bytes(rng.bytes(nbytes), "big")
    return x >> (8 * nbytes - bits)


def _randbelow(rng, n):
    bits = int(n).bit_length()
    while True:
        x = _randbits(rng, bits)
        if x < n:
            return x


def is_probable_prime(n, rng, rounds=MR_ROUNDS):
    """Miller-Rabin with ``rounds`` random bases."""
    if n < 2:
        return False
    for p in (2,) + SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = 2 + _randbelow(rng, n - 3)
        x = gmpy2.powmod(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = gmpy2.powmod(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime(bits, rng):
    while True:
        c = _randbits(rng, bits) | (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        if is_probable_prime(c, rng):
            return c


@dataclass(frozen=True)
class PublicKey:
    n: int

    @property
    def g(self):
        return self.n + 1

    @property
    def n_sq(self):
        return self.n * self.n

    @property
    def bits(self):
        return self.n.bit_length()

    @property
    def ciphertext_bytes(self):
        return (self.n_sq.bit_length() + 7) // 8


@dataclass(frozen=True, repr=False)
class SecretKey:
    p: int
    q: int
    lam: int
    mu: int

    def __repr__(self):
        return "SecretKey(<hidden>)"


@dataclass(frozen=True)
class PaillierKeypair:
    public: PublicKey
    secret: SecretKey | None

    @property
    def bits(self):
        return self.public.bits

    @classmethod
    def from_primes(cls, p, q):
        if p == q:
            raise ConfigError("Paillier primes must be distinct")
        n = p * q
        if math.gcd(n, (p - 1) * (q - 1)) != 1:
            raise ConfigError("gcd(pq, (p-1)(q-1)) must be 1")
        lam = math.lcm(p - 1, q - 1)
        # with g = n + 1, L(g^lam mod n^2) = lam mod n
        mu = int(gmpy2.invert(lam % n, n))
        return cls(PublicKey(n), SecretKey(p, q, lam, mu))

    def public_only(self):
        return PaillierKeypair(self.public, None)


def paillier_keygen(bits=512, rng=None) -> PaillierKeypair:
    if bits < 64:
        raise ConfigError("modulus must have at least 64 bits")
    if rng is None:
        rng = np.random.default_rng()
    half = bits // 2
    while True:
        p = random_prime(half, rng)
        q = random_prime(bits - half, rng)
        if p != q and (p * q).bit_length() == bits and math.gcd(p * q, (p - 1) * (q - 1)) == 1:
            return PaillierKeypair.from_primes(p, q)


def encrypt(pk: PublicKey, m, rng):
    """``g^m r^n mod n^2`` with fresh ``r``; here ``g^m = 1 + m n``."""
    if isinstance(pk, PaillierKeypair):
        pk = pk.public
    m = int(m)
    if not 0 <= m < pk.n:
        raise ConfigError("plaintext must lie in [0, n)")
    n, n2 = pk.n, pk.n_sq
    while True:
        r = 1 + _randbelow(rng, n - 1)
        if math.gcd(r, n) == 1:
            break
    return int((1 + m * n) % n2 * gmpy2.powmod(r, n, n2) % n2)


def decrypt(key, c):
    sk = key.secret if isinstance(key, PaillierKeypair) else key
    if sk is None:
        raise MissingKeyError("decryption requires the secret key")
    p, q = sk.p, sk.q
    n = p * q
    c = int(c)
    if not 0 < c < n * n or math.gcd(c, n) != 1:
        raise IntegrityError("ciphertext outside the multiplicative group")
    u = int(gmpy2.powmod(c, sk.lam, n * n))
    return (u - 1) // n * sk.mu % n


def add_ciphertexts(pk, c1, c2):
    if isinstance(pk, PaillierKeypair):
        pk = pk.public
    return int(c1) * int(c2) % pk.n_sq


# --- packed fixed-point vectors ---------------------------------------------

SLOT_BITS = 48
FRAC_BITS = 16
OFFSET = 1 << (SLOT_BITS - 1)
CHECK_MOD = (1 << SLOT_BITS) - 59  # largest prime below 2^48


def slots_per_ciphertext(pk: PublicKey):
    """Value slots per plaintext (one more slot is reserved for the checksum)."""
    return (pk.bits - 1) // SLOT_BITS - 1


def quantize(values):
    """Offset fixed-point slot values for ``values``; raises on overflow."""
    v = np.asarray(values, dtype=np.float64).ravel()
    q = np.rint(v * (1 << FRAC_BITS))
    if q.size and (not np.isfinite(q).all() or np.abs(q).max() >= OFFSET):
        raise RingOverflowError("message coordinate exceeds the packing range")
    return [int(x) + OFFSET for x in q.astype(np.int64)]


def dequantize(slots):
    return np.array([(s - OFFSET) / (1 << FRAC_BITS) for s in slots], dtype=np.float64)


def _checksum(slots):
    acc = 0
    for i, s in enumerate(slots):
        acc = (acc + (i + 1) * s) % CHECK_MOD
    return acc


def pack_plaintexts(slots, per):
    out = []
    for start in range(0, len(slots), per):
        chunk = slots[start:start + per]
        m = _checksum(chunk)
        for s in chunk:
            m = (m << SLOT_BITS) | s
        out.append((len(chunk), m))
    return out


def unpack_plaintext(m, count):
    mask = (1 << SLOT_BITS) - 1
    chunk = []
    for _ in range(count):
        chunk.append(m & mask)
        m >>= SLOT_BITS
    chunk.reverse()
    if m != _checksum(chunk):
        raise IntegrityError("packed plaintext failed its checksum")
    return chunk


def encrypt_vector(pk, values, rng):
    """Encrypt a float vector; returns ``[(slot_count, ciphertext), ...]``."""
    if isinstance(pk, PaillierKeypair):
        pk = pk.public
    per = slots_per_ciphertext(pk)
    if per < 1:
        raise ConfigError("key too small to pack vectors")
    return [(cnt, encrypt(pk, m, rng)) for cnt, m in pack_plaintexts(quantize(values), per)]


def decrypt_vector(key, blocks):
    slots = []
    for cnt, c in blocks:
        slots.extend(unpack_plaintext(decrypt(key, c), cnt))
    return dequantize(slots)


def quantization_roundtrip(values):
    """What :func:`decrypt_vector` returns for ``encrypt_vector(values)``, without the cipher."""
    return dequantize(quantize(values))
