"""Message-passing layout of a (local) graph.

A :class:`GraphView` lists attention entries grouped by destination. Every
directed transaction edge ``u -> v`` contributes an entry in both directions
(``v`` attends to ``u`` and ``u`` attends to ``v``) carrying the same edge
features, and every node gets a self-loop with a zero edge-feature vector.
Ghost entries point at rows ``n .. n + n_ghost - 1`` of the projected feature
matrix; those rows hold messages received from other jurisdictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..errors import DimensionError


@dataclass(frozen=True, eq=False)
class GraphView:
    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    indptr: np.ndarray
    edge_attr: np.ndarray
    n_ghost: int = 0
    node_ids: np.ndarray | None = None
    ghost_ids: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return self.x.shape[0]

    @property
    def n_entries(self):
        return len(self.src)

    @property
    def edge_dim(self):
        return self.edge_attr.shape[1]

    @cached_property
    def degree(self):
        return np.diff(self.indptr)

    @cached_property
    def local_only(self):
        """The same view with ghost entries removed."""
        if self.n_ghost == 0:
            return self
        keep = self.src < self.n_nodes
        return _assemble(self.x, self.src[keep], self.dst[keep], self.edge_attr[keep],
                         0, self.node_ids, None)

    def with_features(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.x.shape:
            raise DimensionError("replacement features must keep the view's shape")
        return GraphView(x, self.src, self.dst, self.indptr, self.edge_attr,
                         self.n_ghost, self.node_ids, self.ghost_ids)


def _assemble(x, src, dst, attr, n_ghost, node_ids, ghost_ids):
    n = x.shape[0]
    order = np.lexsort((src, dst))
    src, dst, attr = src[order], dst[order], attr[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=indptr[1:])
    return GraphView(
        x=np.ascontiguousarray(x, dtype=np.float64),
        src=np.ascontiguousarray(src, dtype=np.int64),
        dst=np.ascontiguousarray(dst, dtype=np.int64),
        indptr=indptr,
        edge_attr=np.ascontiguousarray(attr, dtype=np.float64),
        n_ghost=int(n_ghost),
        node_ids=None if node_ids is None else np.asarray(node_ids),
        ghost_ids=None if ghost_ids is None else np.asarray(ghost_ids),
    )


def build_view(x, edge_src, edge_dst, edge_attr, *, ghost_dst=None, ghost_src=None,
               ghost_attr=None, n_ghost=0, node_ids=None, ghost_ids=None,
               self_loops=True, symmetric=True):
    """Build a :class:`GraphView` from local edge lists.

    ``edge_src``/``edge_dst`` are local row indices. Ghost edges give a local
    destination row and a ghost index in ``[0, n_ghost)``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    es = np.asarray(edge_src, dtype=np.int64)
    ed = np.asarray(edge_dst, dtype=np.int64)
    ea = np.asarray(edge_attr, dtype=np.float64)
    d_e = ea.shape[-1] if ea.ndim == 2 else 0
    ea = ea.reshape(len(es), d_e)
    if len(es) and (es.max() >= n or ed.max() >= n or es.min() < 0 or ed.min() < 0):
        raise DimensionError("edge endpoints out of range for the view")
    src_parts, dst_parts, attr_parts = [es], [ed], [ea]
    if symmetric:
        src_parts.append(ed)
        dst_parts.append(es)
        attr_parts.append(ea)
    if self_loops:
        r = np.arange(n, dtype=np.int64)
        src_parts.append(r)
        dst_parts.append(r)
        attr_parts.append(np.zeros((n, d_e)))
    if n_ghost:
        gd = np.asarray(ghost_dst, dtype=np.int64)
        gs = np.asarray(ghost_src, dtype=np.int64)
        if len(gs) and (gs.max() >= n_ghost or gd.max() >= n):
            raise DimensionError("ghost edge indices out of range")
        src_parts.append(n + gs)
        dst_parts.append(gd)
        attr_parts.append(np.asarray(ghost_attr, dtype=np.float64).reshape(len(gs), d_e))
    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    attr = np.concatenate([a.reshape(-1, d_e) for a in attr_parts])
    return _assemble(x, src, dst, attr, n_ghost, node_ids, ghost_ids)


def standardize(x, mean=None, std=None):
    """Column z-scores; constant columns map to zero."""
    x = np.asarray(x, dtype=np.float64)
    if mean is None:
        mean = x.mean(axis=0) if len(x) else np.zeros(x.shape[1])
    if std is None:
        std = x.std(axis=0) if len(x) else np.ones(x.shape[1])
    std = np.where(std > 1e-12, std, 1.0)
    return (x - mean) / std, mean, std
