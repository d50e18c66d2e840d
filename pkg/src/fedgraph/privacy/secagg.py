"""Additive secret sharing of fixed-point vectors over the ring Z_{2^64}."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, RingOverflowError

FRAC_BITS = 16
SCALE = float(1 << FRAC_BITS)
RANGE_BITS = 47
LIMIT = 1 << RANGE_BITS


def encode(v):
    """Fixed-point encode to ring elements; raises when ``|v| * 2^16 >= 2^47``."""
    v = np.asarray(v, dtype=np.float64)
    if not np.isfinite(v).all():
        raise RingOverflowError("cannot encode non-finite values")
    q = np.rint(v * SCALE)
    if q.size and np.abs(q).max() >= LIMIT:
        raise RingOverflowError(f"value magnitude {np.abs(v).max():.6g} exceeds the fixed-point range")
    return q.astype(np.int64).view(np.uint64)


def decode(r):
    r = np.asarray(r, dtype=np.uint64)
    signed = r.view(np.int64)
    if signed.size and np.abs(signed).max() >= LIMIT:
        raise RingOverflowError("aggregate left the fixed-point range")
    return signed.astype(np.float64) / SCALE


@dataclass(frozen=True, eq=False)
class SecretShares:
    shares: np.ndarray  # (K, d) uint64

    @property
    def n_shares(self):
        return self.shares.shape[0]

    @property
    def nbytes(self):
        return int(self.shares.nbytes)

    def share(self, j):
        return self.shares[j]


def share(vector, K, rng) -> SecretShares:
    """Split ``vector`` into ``K`` additive shares."""
    if K < 1:
        raise ConfigError("need at least one share")
    enc = encode(vector)
    rand = rng.integers(0, np.iinfo(np.uint64).max, size=(K - 1, enc.size), dtype=np.uint64, endpoint=True)
    last = enc - rand.sum(axis=0, dtype=np.uint64)
    return SecretShares(np.vstack([rand, last[None, :]]))


def ring_sum(parts):
    parts = [np.asarray(p, dtype=np.uint64) for p in parts]
    out = np.zeros_like(parts[0])
    for p in parts:
        out += p
    return out


def reconstruct(share_sets) -> np.ndarray:
    """Decode the ring sum of every share of every client (the sum of their vectors)."""
    if isinstance(share_sets, SecretShares):
        share_sets = [share_sets]
    if not share_sets:
        raise ConfigError("nothing to reconstruct")
    total = ring_sum([s.shares.sum(axis=0, dtype=np.uint64) for s in share_sets])
    return decode(total)


def secure_sum(vectors, rng):
    """Sum client vectors through pairwise share exchange.

    Client ``k`` splits its vector into ``K`` shares and sends share ``j`` to
    client ``j``. Each client forwards only the ring sum of the shares it
    holds; the server adds those partial sums. Returns ``(sum, bytes_sent)``.
    """
    K = len(vectors)
    sets = [share(v, K, rng) for v in vectors]
    partial = [ring_sum([s.share(j) for s in sets]) for j in range(K)]
    sent = sum(s.nbytes for s in sets) + sum(p.nbytes for p in partial)
    return decode(ring_sum(partial)), sent
