"""Convex combination of client models."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError
from ..gnn.params import ModelParams


def _stack(updates):
    if not updates:
        raise ConfigError("no updates to aggregate")
    spec = updates[0].spec
    for u in updates[1:]:
        if u.spec != spec:
            raise DimensionError("client updates have different parameter layouts")
    return spec, np.stack([u.vector for u in updates])


def combine(updates, weights):
    """``sum_k weights[k] * theta_k`` for a distribution ``weights``."""
    spec, mat = _stack(updates)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(updates),):
        raise DimensionError("one weight per update required")
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError("aggregation weights must form a distribution")
    return ModelParams(spec, w @ mat)


def fedavg_weights(sizes):
    n = np.asarray(sizes, dtype=np.float64)
    if (n <= 0).any():
        raise ConfigError("client sizes must be positive")
    return n / n.sum()


def fedavg_aggregate(updates, sizes) -> ModelParams:
    """Size-weighted mean of client parameters."""
    if len(sizes) != len(updates):
        raise DimensionError("one size per update required")
    return combine(updates, fedavg_weights(sizes))


def moe_aggregate(updates, mean_gate_weights) -> ModelParams:
    """Client parameters weighted by the mean gating distribution."""
    return combine(updates, mean_gate_weights)


def project_simplex(v):
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u * idx > css - 1.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)
