"""Edge kernels for graph attention.

The compiled extension is used when it was built; otherwise the NumPy
fallback is selected. Set ``FEDGRAPH_KERNELS=python`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_backend = _pykernels
BACKEND = "python"

if os.environ.get("FEDGRAPH_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None
    else:
        _backend = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.append("cython")
    return names


def get_backend(name=None):
    """Return the kernel module called *name* (default: the active one)."""
    if name is None:
        return _backend
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def edge_softmax(scores, indptr):
    return _backend.edge_softmax(_f64(scores), _i64(indptr))


def edge_softmax_backward(alpha, dalpha, indptr):
    return _backend.edge_softmax_backward(_f64(alpha), _f64(dalpha), _i64(indptr))


def aggregate(alpha, src, indptr, proj):
    return _backend.aggregate(_f64(alpha), _i64(src), _i64(indptr), _f64(proj))


def aggregate_backward(alpha, src, indptr, proj, dout):
    return _backend.aggregate_backward(
        _f64(alpha), _i64(src), _i64(indptr), _f64(proj), _f64(dout)
    )
