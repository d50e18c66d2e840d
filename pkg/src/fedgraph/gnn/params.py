"""Model parameter containers and their flat-vector layout.

Flat ordering (version 1), layer by layer::

    W[0] (heads, out, in) C-order, a[0] (heads, 2*out + d_e),
    W[1], a[1], ...,
    head_w (hidden,), head_b (1,)

where ``a`` splits as ``[a_self (out) | a_neigh (out) | a_edge (d_e)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DimensionError

LAYOUT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    n_layers: int = 3
    hidden_dim: int = 32
    heads: int = 2
    dropout: float = 0.1
    learning_rate: float = 0.001
    weight_decay: float = 5e-4
    proximal_lambda: float = 0.01
    local_epochs: int = 5
    batch_size: int = 64
    negative_slope: float = 0.2

    def __post_init__(self):
        if self.n_layers < 1 or self.hidden_dim < 1 or self.heads < 1 or self.batch_size < 1:
            raise ConfigError("n_layers, hidden_dim, heads and batch_size must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.learning_rate < 0 or self.weight_decay < 0 or self.proximal_lambda < 0:
            raise ConfigError("learning_rate, weight_decay and proximal_lambda must be >= 0")
        if self.local_epochs < 0:
            raise ConfigError("local_epochs must be >= 0")

    @classmethod
    def paper(cls, **kw):
        base = dict(hidden_dim=256, heads=8)
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class ModelSpec:
    in_dim: int
    edge_dim: int
    hidden_dim: int = 32
    heads: int = 2
    n_layers: int = 3
    negative_slope: float = 0.2

    @classmethod
    def from_hyper(cls, hyper: Hyperparams, in_dim, edge_dim):
        return cls(in_dim, edge_dim, hyper.hidden_dim, hyper.heads, hyper.n_layers, hyper.negative_slope)

    def layer_dims(self):
        """(in, out-per-head) for each layer."""
        dims = []
        d = self.in_dim
        for _ in range(self.n_layers):
            dims.append((d, self.hidden_dim))
            d = self.heads * self.hidden_dim
        return dims

    @property
    def rep_dim(self):
        return self.hidden_dim

    @property
    def layout(self):
        return _layout(self)

    @property
    def size(self):
        return _layout(self)[-1][1]

    def to_dict(self):
        return dict(self.__dict__, layout_version=LAYOUT_VERSION)


def _layout(spec):
    # list of (name, start, stop, shape)
    out = []
    pos = 0
    for l, (din, dout) in enumerate(spec.layer_dims()):
        for name, shape in ((f"W{l}", (spec.heads, dout, din)),
                            (f"a{l}", (spec.heads, 2 * dout + spec.edge_dim))):
            size = int(np.prod(shape))
            out.append((name, pos, pos + size, shape))
            pos += size
    out.append(("head_w", pos, pos + spec.hidden_dim, (spec.hidden_dim,)))
    pos += spec.hidden_dim
    out.append(("head_b", pos, pos + 1, (1,)))
    pos += 1
    return [(n, s, e, shp) for n, s, e, shp in out] + [("end", pos)]


@dataclass(frozen=True)
class GATLayerParams:
    """One attention layer: per-head weights ``W`` and attention vectors ``a``."""

    W: np.ndarray  # (heads, out, in)
    a: np.ndarray  # (heads, 2*out + d_e)
    negative_slope: float = 0.2

    def __post_init__(self):
        if self.W.ndim != 3 or self.a.ndim != 2 or self.a.shape[0] != self.W.shape[0]:
            raise DimensionError("W must be (heads, out, in) and a must be (heads, 2*out + d_e)")
        if self.a.shape[1] < 2 * self.W.shape[1]:
            raise DimensionError("attention vector too short for the layer width")
        if not (np.isfinite(self.W).all() and np.isfinite(self.a).all()):
            raise DimensionError("layer parameters must be finite")

    @property
    def heads(self):
        return self.W.shape[0]

    @property
    def out_dim(self):
        return self.W.shape[1]

    @property
    def in_dim(self):
        return self.W.shape[2]

    @property
    def edge_dim(self):
        return self.a.shape[1] - 2 * self.out_dim

    def split_attention(self, head):
        o = self.out_dim
        a = self.a[head]
        return a[:o], a[o:2 * o], a[2 * o:]


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Immutable model parameters backed by one flat float64 vector."""

    spec: ModelSpec
    vector: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vector, dtype=np.float64, copy=True).ravel()
        if v.shape != (self.spec.size,):
            raise DimensionError(f"expected {self.spec.size} parameters, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    def _block(self, name):
        for entry in self.spec.layout[:-1]:
            if entry[0] == name:
                _, s, e, shape = entry
                return self.vector[s:e].reshape(shape)
        raise KeyError(name)

    def layer(self, l) -> GATLayerParams:
        return GATLayerParams(self._block(f"W{l}"), self._block(f"a{l}"), self.spec.negative_slope)

    @property
    def layers(self):
        return [self.layer(l) for l in range(self.spec.n_layers)]

    @property
    def head_w(self):
        return self._block("head_w")

    @property
    def head_b(self):
        return float(self._block("head_b")[0])

    def flatten(self):
        return self.vector.copy()

    @classmethod
    def unflatten(cls, spec, vector):
        return cls(spec, vector)

    @classmethod
    def from_parts(cls, spec, layers, head_w, head_b):
        parts = []
        for layer in layers:
            parts.append(np.asarray(layer.W, dtype=np.float64).ravel())
            parts.append(np.asarray(layer.a, dtype=np.float64).ravel())
        parts.append(np.asarray(head_w, dtype=np.float64).ravel())
        parts.append(np.array([head_b], dtype=np.float64))
        return cls(spec, np.concatenate(parts))

    @classmethod
    def zeros(cls, spec):
        return cls(spec, np.zeros(spec.size))

    def replace(self, vector):
        return ModelParams(self.spec, vector)

    def distance_sq(self, other):
        d = self.vector - other.vector
        return float(d @ d)


def init_params(spec: ModelSpec, rng) -> ModelParams:
    """Glorot-uniform weights, zero output bias."""
    parts = []
    for (din, dout) in spec.layer_dims():
        lim_w = np.sqrt(6.0 / (din + dout))
        parts.append(rng.uniform(-lim_w, lim_w, (spec.heads, dout, din)).ravel())
        na = 2 * dout + spec.edge_dim
        lim_a = np.sqrt(6.0 / (na + 1))
        parts.append(rng.uniform(-lim_a, lim_a, (spec.heads, na)).ravel())
    lim_h = np.sqrt(6.0 / (spec.hidden_dim + 1))
    parts.append(rng.uniform(-lim_h, lim_h, spec.hidden_dim))
    parts.append(np.zeros(1))
    return ModelParams(spec, np.concatenate(parts))
