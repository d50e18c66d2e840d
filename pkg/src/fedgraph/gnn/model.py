"""Graph attention forward pass, proximal loss and its exact gradient.

Per layer and head, with ``P = H W^T`` (the projected node messages)::

    s_e   = a_self . P[dst] + a_neigh . P[src] + a_edge . z_e
    alpha = softmax of LeakyReLU(s) over the entries of each destination
    agg_i = sum_e alpha_e P[src_e]

Hidden layers apply LeakyReLU per head and concatenate; the last layer
averages its heads and then applies LeakyReLU. A linear head maps the final
representation to one logit per node. Gradients are accumulated in reverse
over these same operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .. import _kernels as K
from ..errors import ConfigError, DimensionError
from .params import GATLayerParams, ModelParams
from .view import GraphView

PROB_CLAMP = 1e-7


def leaky_relu(x, slope):
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x, slope):
    return np.where(x > 0, 1.0, slope)


def _check_input(h, view, layer):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != view.n_nodes:
        raise DimensionError(f"expected {view.n_nodes} feature rows, got shape {h.shape}")
    if h.shape[1] != layer.in_dim:
        raise DimensionError(f"layer expects {layer.in_dim} input columns, got {h.shape[1]}")
    if view.edge_dim != layer.edge_dim:
        raise DimensionError(f"layer expects edge dim {layer.edge_dim}, view has {view.edge_dim}")
    return h


def _resolve(view, ghost):
    """Drop ghost entries when no ghost messages are supplied."""
    if view.n_ghost and ghost is None:
        return view.local_only
    return view


def _ghost_rows(ghost, head, view, out_dim):
    if not view.n_ghost:
        return None
    g = np.asarray(ghost[head], dtype=np.float64)
    if g.shape != (view.n_ghost, out_dim):
        raise DimensionError(f"ghost messages must be ({view.n_ghost}, {out_dim}), got {g.shape}")
    return g


@dataclass
class _HeadCache:
    P: np.ndarray
    Pf: np.ndarray
    s: np.ndarray
    alpha: np.ndarray


def _head_forward(layer, k, hd, view, ghost, uniform):
    W = layer.W[k]
    a_self, a_neigh, a_edge = layer.split_attention(k)
    P = hd @ W.T
    g = _ghost_rows(ghost, k, view, layer.out_dim)
    Pf = P if g is None else np.vstack([P, g])
    s = (P @ a_self)[view.dst] + (Pf @ a_neigh)[view.src] + view.edge_attr @ a_edge
    if uniform:
        alpha = 1.0 / view.degree[view.dst]
    else:
        alpha = K.edge_softmax(leaky_relu(s, layer.negative_slope), view.indptr)
    agg = K.aggregate(alpha, view.src, view.indptr, Pf)
    return agg, _HeadCache(P, Pf, s, alpha)


def attention_coefficients(layer: GATLayerParams, h_prev, view: GraphView, ghost=None):
    """Per-entry attention weights, shape ``(heads, n_entries)``.

    Entries follow ``view.src``/``view.dst`` order (grouped by destination).
    """
    view = _resolve(view, ghost)
    h = _check_input(h_prev, view, layer)
    return np.stack([_head_forward(layer, k, h, view, ghost, False)[1].alpha for k in range(layer.heads)])


def _dropout(h, rate, rng):
    if rng is None or rate <= 0:
        return h, None
    mask = (rng.random(h.shape) >= rate) / (1.0 - rate)
    return h * mask, mask


def gat_layer_forward(layer: GATLayerParams, h_prev, view: GraphView, dropout_rng=None, *,
                      dropout=0.0, final=False, ghost=None, uniform_attention=False):
    """One attention layer. Dropout on the inputs only when ``dropout_rng`` is given."""
    return _layer(layer, h_prev, view, dropout_rng, dropout, final, ghost, uniform_attention)[0]


def _layer(layer, h_prev, view, rng, rate, final, ghost, uniform):
    view = _resolve(view, ghost)
    h = _check_input(h_prev, view, layer)
    hd, mask = _dropout(h, rate, rng)
    aggs, caches = [], []
    for k in range(layer.heads):
        agg, c = _head_forward(layer, k, hd, view, ghost, uniform)
        aggs.append(agg)
        caches.append(c)
    z = np.mean(aggs, axis=0) if final else np.concatenate(aggs, axis=1)
    return leaky_relu(z, layer.negative_slope), (hd, mask, z, caches, view)


def representations(params: ModelParams, view: GraphView, ghosts=None):
    """Eval-mode inputs to every layer plus the final representation.

    Returns a list of ``L + 1`` matrices: ``reps[l]`` is the input of layer ``l``.
    """
    reps = [np.asarray(view.x, dtype=np.float64)]
    L = params.spec.n_layers
    for l, layer in enumerate(params.layers):
        g = None if ghosts is None else ghosts[l]
        reps.append(gat_layer_forward(layer, reps[-1], view, final=l == L - 1, ghost=g))
    return reps


def _forward(params, view, rng, rate, ghosts, uniform):
    L = params.spec.n_layers
    h = np.asarray(view.x, dtype=np.float64)
    caches = []
    for l, layer in enumerate(params.layers):
        g = None if ghosts is None else ghosts[l]
        h, cache = _layer(layer, h, view, rng, rate, l == L - 1, g, uniform)
        caches.append(cache)
    logits = h @ params.head_w + params.head_b
    return logits, h, caches


def model_logits(params: ModelParams, view: GraphView, *, rng=None, dropout=0.0, ghosts=None,
                 uniform_attention=False):
    if view.x.shape[1] != params.spec.in_dim:
        raise DimensionError(f"model expects {params.spec.in_dim} features, view has {view.x.shape[1]}")
    return _forward(params, view, rng, dropout, ghosts, uniform_attention)[0]


def model_forward(params: ModelParams, view: GraphView, mode="eval", rng=None, *, dropout=0.0,
                  ghosts=None, uniform_attention=False):
    """Per-node threat probability.

    ``mode="train"`` applies input dropout drawn from ``rng``; ``"eval"`` is a
    pure function of ``(params, view, ghosts)``.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train" and rng is None and dropout > 0:
        raise ConfigError("train mode with dropout needs an rng")
    use_rng = rng if mode == "train" else None
    return expit(model_logits(params, view, rng=use_rng, dropout=dropout, ghosts=ghosts,
                              uniform_attention=uniform_attention))


def _labeled(labels, n):
    y = np.asarray(labels)
    if y.shape != (n,):
        raise DimensionError(f"labels must have one entry per node ({n}), got {y.shape}")
    idx = np.flatnonzero(y >= 0)
    if idx.size == 0:
        raise ConfigError("no labeled nodes")
    return idx, y[idx].astype(np.float64)


def bce_terms(logits, y):
    """Clamped BCE values and their derivative with respect to the logits."""
    p = expit(logits)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    return loss, np.where(inside, p - y, 0.0)


def local_loss(params: ModelParams, global_params: ModelParams | None, view: GraphView, labels, lam,
               *, ghosts=None, uniform_attention=False):
    """Mean clamped BCE over labeled nodes plus ``lam * ||theta - theta_global||^2``.

    ``labels`` holds one entry per view node; negative values mark unlabeled nodes.
    """
    if lam < 0:
        raise ConfigError("proximal weight must be >= 0")
    idx, y = _labeled(labels, view.n_nodes)
    logits = model_logits(params, view, ghosts=ghosts, uniform_attention=uniform_attention)
    ce = float(bce_terms(logits[idx], y)[0].mean())
    if global_params is None or lam == 0:
        return ce
    return ce + lam * params.distance_sq(global_params)


def _layer_backward(layer, cache, dh_out, final, uniform, grad_W, grad_a):
    hd, mask, z, caches, view = cache
    slope = layer.negative_slope
    n = view.n_nodes
    dz = dh_out * leaky_relu_grad(z, slope)
    o = layer.out_dim
    dhd = np.zeros_like(hd)
    for k, c in enumerate(caches):
        dagg = dz / layer.heads if final else dz[:, k * o:(k + 1) * o]
        dalpha, dPf = K.aggregate_backward(c.alpha, view.src, view.indptr, c.Pf, dagg)
        a_self, a_neigh, _ = layer.split_attention(k)
        if uniform:
            ds = np.zeros_like(c.s)
        else:
            du = K.edge_softmax_backward(c.alpha, dalpha, view.indptr)
            ds = du * leaky_relu_grad(c.s, slope)
        r = np.bincount(view.dst, weights=ds, minlength=n)
        q = np.bincount(view.src, weights=ds, minlength=c.Pf.shape[0])
        grad_a[k, :o] = c.P.T @ r
        grad_a[k, o:2 * o] = c.Pf.T @ q
        grad_a[k, 2 * o:] = view.edge_attr.T @ ds
        dP = dPf[:n] + np.outer(q[:n], a_neigh) + np.outer(r, a_self)
        grad_W[k] = dP.T @ hd
        dhd += dP @ layer.W[k]
    return dhd if mask is None else dhd * mask


def _backward(params, logits, h_last, caches, dlogits, uniform):
    spec = params.spec
    grad = np.zeros(spec.size)
    layout = {e[0]: e for e in spec.layout[:-1]}

    def block(name):
        _, s, e, shape = layout[name]
        return grad[s:e].reshape(shape)

    block("head_w")[:] = h_last.T @ dlogits
    block("head_b")[:] = dlogits.sum()
    dh = np.outer(dlogits, params.head_w)
    L = spec.n_layers
    for l in range(L - 1, -1, -1):
        dh = _layer_backward(params.layer(l), caches[l], dh, l == L - 1, uniform,
                             block(f"W{l}"), block(f"a{l}"))
    return grad


def loss_and_gradient(params: ModelParams, global_params: ModelParams | None, view: GraphView, labels,
                      lam, *, rng=None, dropout=0.0, ghosts=None, uniform_attention=False):
    """Loss and flat gradient in one pass (dropout applied when ``rng`` is given)."""
    if lam < 0:
        raise ConfigError("proximal weight must be >= 0")
    idx, y = _labeled(labels, view.n_nodes)
    if view.x.shape[1] != params.spec.in_dim:
        raise DimensionError(f"model expects {params.spec.in_dim} features, view has {view.x.shape[1]}")
    logits, h_last, caches = _forward(params, view, rng, dropout, ghosts, uniform_attention)
    terms, dl = bce_terms(logits[idx], y)
    dlogits = np.zeros(view.n_nodes)
    dlogits[idx] = dl / len(idx)
    grad = _backward(params, logits, h_last, caches, dlogits, uniform_attention)
    loss = float(terms.mean())
    if global_params is not None and lam > 0:
        diff = params.vector - global_params.vector
        loss += lam * float(diff @ diff)
        grad += 2.0 * lam * diff
    return loss, grad


def gradient(params: ModelParams, global_params: ModelParams | None, view: GraphView, labels, lam,
             **kw):
    """Analytic gradient of :func:`local_loss` as a flat vector."""
    return loss_and_gradient(params, global_params, view, labels, lam, **kw)[1]
