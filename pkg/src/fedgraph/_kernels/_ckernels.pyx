# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled edge kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY

cnp.import_array()


def edge_softmax(double[::1] scores, const cnp.int64_t[::1] indptr):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, e
    cdef double peak, total
    out_arr = np.empty(scores.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            peak = -INFINITY
            for e in range(indptr[i], indptr[i + 1]):
                if scores[e] > peak:
                    peak = scores[e]
            total = 0.0
            for e in range(indptr[i], indptr[i + 1]):
                out[e] = exp(scores[e] - peak)
                total += out[e]
            for e in range(indptr[i], indptr[i + 1]):
                out[e] /= total
    return out_arr


def edge_softmax_backward(double[::1] alpha, double[::1] dalpha,
                          const cnp.int64_t[::1] indptr):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, e
    cdef double inner
    out_arr = np.empty(alpha.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            inner = 0.0
            for e in range(indptr[i], indptr[i + 1]):
                inner += alpha[e] * dalpha[e]
            for e in range(indptr[i], indptr[i + 1]):
                out[e] = alpha[e] * (dalpha[e] - inner)
    return out_arr


def aggregate(double[::1] alpha, const cnp.int64_t[::1] src,
              const cnp.int64_t[::1] indptr, double[:, ::1] proj):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t width = proj.shape[1]
    cdef Py_ssize_t i, e, c, j
    cdef double a
    out_arr = np.zeros((n, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for e in range(indptr[i], indptr[i + 1]):
                a = alpha[e]
                j = src[e]
                for c in range(width):
                    out[i, c] += a * proj[j, c]
    return out_arr


def aggregate_backward(double[::1] alpha, const cnp.int64_t[::1] src,
                       const cnp.int64_t[::1] indptr, double[:, ::1] proj,
                       double[:, ::1] dout):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t width = proj.shape[1]
    cdef Py_ssize_t i, e, c, j
    cdef double a, acc
    dalpha_arr = np.empty(alpha.shape[0], dtype=np.float64)
    dproj_arr = np.zeros((proj.shape[0], width), dtype=np.float64)
    cdef double[::1] dalpha = dalpha_arr
    cdef double[:, ::1] dproj = dproj_arr
    with nogil:
        for i in range(n):
            for e in range(indptr[i], indptr[i + 1]):
                a = alpha[e]
                j = src[e]
                acc = 0.0
                for c in range(width):
                    acc += dout[i, c] * proj[j, c]
                    dproj[j, c] += a * dout[i, c]
                dalpha[e] = acc
    return dalpha_arr, dproj_arr
