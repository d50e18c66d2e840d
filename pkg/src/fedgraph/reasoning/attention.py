"""Causal (prefix-masked) scaled dot-product attention over event sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DimensionError
from .types import TransactionHistory

EVENT_DIM = 5  # timestamp, counterparty, amount, type, off-hours


@dataclass(frozen=True)
class CausalAttentionParams:
    """Query and key projections ``(d_k, 5)`` over normalized event rows."""

    W_q: np.ndarray
    W_k: np.ndarray

    def __post_init__(self):
        wq = np.array(self.W_q, dtype=np.float64)
        wk = np.array(self.W_k, dtype=np.float64)
        if wq.ndim != 2 or wq.shape != wk.shape or wq.shape[1] != EVENT_DIM:
            raise DimensionError(f"projections must both be (d_k, {EVENT_DIM})")
        if wq.shape[0] < 1:
            raise ConfigError("d_k must be positive")
        if not (np.isfinite(wq).all() and np.isfinite(wk).all()):
            raise ConfigError("projections must be finite")
        wq.setflags(write=False)
        wk.setflags(write=False)
        object.__setattr__(self, "W_q", wq)
        object.__setattr__(self, "W_k", wk)

    @property
    def d_k(self):
        return self.W_q.shape[0]

    @classmethod
    def default(cls):
        """Fixed projections that relate events of the same type, timing and size.

        Query and key coincide, so the score is a weighted similarity: matching
        transaction types weigh most, then the off-hours flag, then amount.
        Timestamp and counterparty carry no weight.
        """
        w = np.diag([0.0, 0.0, 1.0, 3.0, 2.5])
        return cls(w, w.copy())

    @classmethod
    def random(cls, d_k, rng):
        return cls(rng.normal(0.0, 1.0, (d_k, EVENT_DIM)), rng.normal(0.0, 1.0, (d_k, EVENT_DIM)))


def event_embeddings(events):
    """Normalize raw ``(T, 5)`` event rows column by column.

    Timestamps map to ``[0, 1]`` over the span, counterparties to their
    first-appearance rank over the number of distinct ones, amounts to z-scores
    of ``log1p(amount)``, transaction type to ``type / 3``. The off-hours flag
    stays 0/1.
    """
    if isinstance(events, TransactionHistory):
        events = events.as_array()
    raw = np.asarray(events, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != EVENT_DIM:
        raise DimensionError(f"events must be a (T, {EVENT_DIM}) matrix")
    out = np.zeros_like(raw)
    if len(raw) == 0:
        return out
    ts = raw[:, 0]
    span = ts.max() - ts.min()
    out[:, 0] = (ts - ts.min()) / span if span > 0 else 0.0
    _, first, inv = np.unique(raw[:, 1], return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    out[:, 1] = (rank[inv] + 1) / len(first)
    amt = np.log1p(np.maximum(raw[:, 2], 0.0))
    sd = amt.std()
    out[:, 2] = (amt - amt.mean()) / sd if sd > 0 else 0.0
    out[:, 3] = raw[:, 3] / 3.0
    out[:, 4] = raw[:, 4]
    return out


def causal_attention(events, params: CausalAttentionParams | None = None, *, embedded=False):
    """Lower-triangular attention matrix ``A[j, k]`` for ``k <= j``.

    Row ``j`` is ``softmax_k(q_j . k_k / sqrt(d_k))`` over the prefix ``k <= j``;
    entries above the diagonal are exactly zero.
    """
    params = params or CausalAttentionParams.default()
    x = np.asarray(events, dtype=np.float64) if embedded else event_embeddings(events)
    if x.ndim != 2 or len(x) == 0:
        raise ConfigError("causal attention needs at least one event")
    q = x @ params.W_q.T
    k = x @ params.W_k.T
    s = q @ k.T / np.sqrt(params.d_k)
    T = len(x)
    mask = np.tril(np.ones((T, T), dtype=bool))
    s = np.where(mask, s, -np.inf)
    s -= s.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(s), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def precondition_concentration(attn, pre):
    """Average share of earlier attention that precondition events pay to each other.

    For each precondition event ``j`` with at least one earlier event, take the
    mass on earlier precondition events divided by the mass on all earlier
    events (the diagonal is excluded). Returns 0 when no such ``j`` exists.
    """
    pre = np.asarray(sorted(set(int(i) for i in pre)), dtype=np.int64)
    if pre.size < 2:
        return 0.0
    is_pre = np.zeros(len(attn), dtype=bool)
    is_pre[pre] = True
    shares = []
    for j in pre[1:]:
        row = attn[j, :j]
        total = row.sum()
        if total > 0:
            shares.append(row[is_pre[:j]].sum() / total)
    return float(np.mean(shares)) if shares else 0.0
