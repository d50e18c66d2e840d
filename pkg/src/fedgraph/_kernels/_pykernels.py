"""NumPy/SciPy implementations of the edge kernels.

Edges are stored CSR-style, grouped by destination node: the entries of node
``i`` occupy ``indptr[i]:indptr[i + 1]``. ``src`` holds the source row of each
entry in the projected feature matrix, which may have more rows than there are
destinations (ghost rows for remote neighbours).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _segment_ids(indptr):
    return np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))


def _segment_reduce(ufunc, values, indptr, fill):
    n = len(indptr) - 1
    out = np.full(n, fill, dtype=np.float64)
    counts = np.diff(indptr)
    nonempty = counts > 0
    if values.size:
        out[nonempty] = ufunc.reduceat(values, indptr[:-1][nonempty])
    return out


def edge_softmax(scores, indptr):
    scores = np.asarray(scores, dtype=np.float64)
    seg = _segment_ids(indptr)
    peak = _segment_reduce(np.maximum, scores, indptr, -np.inf)
    ex = np.exp(scores - peak[seg])
    total = _segment_reduce(np.add, ex, indptr, 0.0)
    return ex / total[seg]


def edge_softmax_backward(alpha, dalpha, indptr):
    seg = _segment_ids(indptr)
    inner = _segment_reduce(np.add, alpha * dalpha, indptr, 0.0)
    return alpha * (dalpha - inner[seg])


def _adjacency(alpha, src, indptr, n_src):
    n = len(indptr) - 1
    return sp.csr_matrix((alpha, src, indptr), shape=(n, n_src))


def aggregate(alpha, src, indptr, proj):
    proj = np.asarray(proj, dtype=np.float64)
    return np.asarray(_adjacency(alpha, src, indptr, proj.shape[0]) @ proj)


def aggregate_backward(alpha, src, indptr, proj, dout):
    proj = np.asarray(proj, dtype=np.float64)
    seg = _segment_ids(indptr)
    dalpha = np.einsum("ec,ec->e", dout[seg], proj[src])
    dproj = np.asarray(_adjacency(alpha, src, indptr, proj.shape[0]).T @ dout)
    return dalpha, dproj
