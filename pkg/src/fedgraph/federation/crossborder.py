"""Encrypted exchange of projected node messages across jurisdictions.

For a cross-border edge between ``v_i`` (receiver side) and ``v_j`` (sender
side) the sender computes ``m = W h_j`` for every head of a layer, encrypts it
under the receiver's public key and ships it in an :class:`Envelope`. The
receiver decrypts and uses ``m`` as a fixed ghost row in its attention sums.

Two transports share the same fixed-point packing:

``paillier``
    real encryption of every packed block.
``quantized``
    the packed plaintext blocks are shipped as-is. Decryption is exact, so
    the receiver ends up with bit-identical messages; bytes are still counted
    at ciphertext size. This is a simulation shortcut for long experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, MissingKeyError
from ..gnn.model import representations
from ..gnn.params import GATLayerParams
from ..privacy import paillier as pl

MODES = ("paillier", "quantized", "off")
HEADER_BYTES = 16


@dataclass(frozen=True)
class Envelope:
    """Inter-client message: routing header plus encrypted blocks only."""

    sender: int
    receiver: int
    layer: int
    shape: tuple
    blocks: tuple  # ((slot_count, ciphertext), ...)
    scheme: str
    ciphertext_bytes: int

    @property
    def nbytes(self):
        return HEADER_BYTES + len(self.blocks) * self.ciphertext_bytes


class KeyRing:
    """Per-jurisdiction Paillier keys. Clients hold their own secret key only."""

    def __init__(self, keys):
        self._keys = dict(keys)

    @classmethod
    def generate(cls, K, bits, seed):
        keys = {}
        for k in range(K):
            rng = np.random.default_rng(np.random.SeedSequence([seed, 2_000_000 + k]))
            keys[k] = pl.paillier_keygen(bits, rng)
        return cls(keys)

    def public(self, k):
        return self._keys[k].public

    def keypair(self, k):
        try:
            return self._keys[k]
        except KeyError:
            raise MissingKeyError(f"no key for jurisdiction {k}") from None


def seal(values, public_key, rng, *, sender=-1, receiver=-1, layer=-1, mode="paillier"):
    values = np.asarray(values, dtype=np.float64)
    if mode == "paillier":
        blocks = tuple(pl.encrypt_vector(public_key, values.ravel(), rng))
    elif mode == "quantized":
        per = pl.slots_per_ciphertext(public_key)
        blocks = tuple(pl.pack_plaintexts(pl.quantize(values.ravel()), per))
    else:
        raise ConfigError(f"unknown exchange mode {mode!r}")
    return Envelope(sender, receiver, layer, values.shape, blocks, mode, public_key.ciphertext_bytes)


def open_envelope(envelope: Envelope, keypair):
    if keypair is None or keypair.secret is None:
        raise MissingKeyError("receiver holds no decryption key")
    if envelope.scheme == "paillier":
        flat = pl.decrypt_vector(keypair, envelope.blocks)
    else:
        slots = []
        for cnt, m in envelope.blocks:
            slots.extend(pl.unpack_plaintext(m, cnt))
        flat = pl.dequantize(slots)
    return flat.reshape(envelope.shape)


def project(layer: GATLayerParams, h):
    """Per-head messages ``W_k h`` for rows of ``h``: shape ``(heads, rows, out)``."""
    h = np.atleast_2d(np.asarray(h, dtype=np.float64))
    return np.einsum("koi,ni->kno", layer.W, h)


def cross_border_exchange(sender, receiver, edge, layer_index, params, keypair, rng, *,
                          sender_reps=None, mode="paillier"):
    """Deliver ``W h_j`` for the sender-side endpoint of one cross-border edge.

    ``edge`` is ``(u, v)`` node ids with one endpoint owned by each client.
    Returns ``(message, envelope)`` where ``message`` has shape ``(heads, out)``.
    """
    u, v = (int(e) for e in edge)
    if sender.owns(u) and receiver.owns(v):
        j = u
    elif sender.owns(v) and receiver.owns(u):
        j = v
    else:
        raise ConfigError(f"edge {edge} does not join client {sender.client_id} to client {receiver.client_id}")
    if keypair is None:
        raise MissingKeyError("no key supplied for the receiver")
    if sender_reps is None:
        sender_reps = representations(params, sender.view)
    h_j = sender_reps[layer_index][sender.rows([j])[0]]
    msg = project(params.layer(layer_index), h_j)[:, 0, :]
    env = seal(msg, keypair.public, rng, sender=sender.client_id, receiver=receiver.client_id,
               layer=layer_index, mode=mode)
    return open_envelope(env, keypair), env


def exchange_round(clients, params, keyring: KeyRing, prev_ghosts, rng, mode="quantized"):
    """All cross-border messages for one round.

    Every sender evaluates the current global model on its own view using the
    ghost messages it received last round, then ships per-layer messages for
    each of its nodes that another client needs. Returns
    ``(ghosts per client, envelopes)`` with ghosts a list over layers of
    ``(heads, n_ghost, out)`` arrays.
    """
    spec = params.spec
    L, H, out = spec.n_layers, spec.heads, spec.hidden_dim
    ghosts = [[np.zeros((H, c.n_ghost, out)) for _ in range(L)] for c in clients]
    envelopes = []
    for j, sender in enumerate(clients):
        reps = representations(params, sender.view, ghosts=prev_ghosts[j] if prev_ghosts else None)
        for k, receiver in enumerate(clients):
            if k == j or receiver.n_ghost == 0:
                continue
            slots = np.flatnonzero(receiver.ghost_owner == j)
            if slots.size == 0:
                continue
            rows = sender.rows(receiver.ghost_ids[slots])
            kp = keyring.keypair(k)
            for l in range(L):
                msg = project(params.layer(l), reps[l][rows])
                env = seal(msg, kp.public, rng, sender=j, receiver=k, layer=l, mode=mode)
                envelopes.append(env)
                ghosts[k][l][:, slots, :] = open_envelope(env, kp)
    return ghosts, envelopes
