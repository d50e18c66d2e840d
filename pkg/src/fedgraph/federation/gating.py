"""Mixture-of-experts gate: a two-layer perceptron from node features to expert weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from ..errors import ConfigError, DimensionError
from ..gnn.model import PROB_CLAMP

ENTROPY_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GatingParams:
    W1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (K, hidden)
    b2: np.ndarray  # (K,)

    def __post_init__(self):
        h, d = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[1] != h or self.b2.shape != (self.W2.shape[0],):
            raise DimensionError("inconsistent gating parameter shapes")
        for a in (self.W1, self.b1, self.W2, self.b2):
            if not np.isfinite(a).all():
                raise DimensionError("gating parameters must be finite")

    @property
    def n_experts(self):
        return self.W2.shape[0]

    @property
    def in_dim(self):
        return self.W1.shape[1]

    @property
    def hidden(self):
        return self.W1.shape[0]

    def flatten(self):
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def unflatten(self, v):
        h, d = self.W1.shape
        K = self.n_experts
        v = np.asarray(v, dtype=np.float64)
        i = 0
        parts = []
        for shape in ((h, d), (h,), (K, h), (K,)):
            n = int(np.prod(shape))
            parts.append(v[i:i + n].reshape(shape).copy())
            i += n
        if i != v.size:
            raise DimensionError("wrong gating vector length")
        return GatingParams(*parts)

    @property
    def size(self):
        h, d = self.W1.shape
        return h * d + h + self.n_experts * h + self.n_experts

    @classmethod
    def init(cls, in_dim, n_experts, hidden=128, rng=None):
        """Glorot first layer; zero output layer so the initial gate is uniform."""
        rng = rng if rng is not None else np.random.default_rng(0)
        lim = np.sqrt(6.0 / (in_dim + hidden))
        return cls(rng.uniform(-lim, lim, (hidden, in_dim)), np.zeros(hidden),
                   np.zeros((n_experts, hidden)), np.zeros(n_experts))

    @classmethod
    def zeros(cls, in_dim, n_experts, hidden=128):
        return cls(np.zeros((hidden, in_dim)), np.zeros(hidden), np.zeros((n_experts, hidden)),
                   np.zeros(n_experts))


def _hidden(g, x):
    pre = x @ g.W1.T + g.b1
    return pre, np.maximum(pre, 0.0)


def gate_logits(g: GatingParams, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != g.in_dim:
        raise DimensionError(f"gate expects {g.in_dim} features, got {x.shape[-1]}")
    return _hidden(g, x)[1] @ g.W2.T + g.b2


def gate_weights(g: GatingParams, x):
    """Softmax over experts for each row of ``x`` (or for a single vector)."""
    return softmax(gate_logits(g, x), axis=-1)


def moe_predict(expert_outputs, w):
    """Mixture probability ``sum_k w_k p_k``; works row-wise on 2-D inputs."""
    p = np.asarray(expert_outputs, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if p.shape != w.shape:
        raise DimensionError("expert outputs and weights must have the same length")
    return np.sum(p * w, axis=-1)


def entropy(w):
    w = np.asarray(w, dtype=np.float64)
    return -np.sum(w * np.log(np.maximum(w, ENTROPY_FLOOR)), axis=-1)


def moe_loss(predictions, labels, gate_distributions, gamma, sign=-1.0):
    """Clamped BCE of the mixture plus ``sign * gamma * mean entropy``.

    ``predictions`` and ``gate_distributions`` are ``(n, K)``. The default
    ``sign=-1`` rewards spread-out gates; ``sign=+1`` is the literal form.
    """
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    p = np.asarray(predictions, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ConfigError("empty batch")
    y = np.asarray(labels, dtype=np.float64)
    mix = np.clip(moe_predict(p, gate_distributions), PROB_CLAMP, 1 - PROB_CLAMP)
    ce = -np.mean(y * np.log(mix) + (1 - y) * np.log1p(-mix))
    return float(ce + sign * gamma * np.mean(entropy(gate_distributions)))


def moe_loss_grad(g: GatingParams, x, predictions, labels, gamma, sign=-1.0):
    """``(loss, flat gradient)`` of :func:`moe_loss` with respect to the gate parameters."""
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = len(x)
    if n == 0:
        raise ConfigError("empty batch")
    pre, hid = _hidden(g, x)
    w = softmax(hid @ g.W2.T + g.b2, axis=-1)
    loss = moe_loss(p, y, w, gamma, sign)
    mix = moe_predict(p, w)
    inside = (mix > PROB_CLAMP) & (mix < 1 - PROB_CLAMP)
    dmix = np.where(inside, (mix - y) / np.clip(mix * (1 - mix), 1e-300, None), 0.0) / n
    logw = np.log(np.maximum(w, ENTROPY_FLOOR))
    dw = dmix[:, None] * p + sign * gamma * (-(logw + 1.0)) / n
    dz = w * (dw - np.sum(w * dw, axis=1, keepdims=True))
    dW2 = dz.T @ hid
    db2 = dz.sum(axis=0)
    dhid = dz @ g.W2 * (pre > 0)
    dW1 = dhid.T @ x
    db1 = dhid.sum(axis=0)
    return loss, np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])
