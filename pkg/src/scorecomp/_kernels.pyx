# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  Signatures mirror ``scorecomp._kernels_py``."""

import numpy as np
from libc.math cimport exp, sqrt, INFINITY


def gmm_posterior_mean(const double[:, ::1] x,
                       const double[:, ::1] means,
                       const double[:, :, ::1] precisions,
                       const double[:, :, ::1] gains,
                       const double[::1] log_norms):
    cdef Py_ssize_t nb = x.shape[0], n = x.shape[1], nk = means.shape[0]
    cdef Py_ssize_t b, k, r, c
    cdef double quad, acc, top, total, w
    out_arr = np.zeros((nb, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] lp = np.empty(nk, dtype=np.float64)
    cdef double[::1] diff = np.empty(n, dtype=np.float64)
    for b in range(nb):
        top = -INFINITY
        for k in range(nk):
            for r in range(n):
                diff[r] = x[b, r] - means[k, r]
            quad = 0.0
            for r in range(n):
                acc = 0.0
                for c in range(n):
                    acc = acc + precisions[k, r, c] * diff[c]
                quad = quad + diff[r] * acc
            lp[k] = log_norms[k] - 0.5 * quad
            if lp[k] > top:
                top = lp[k]
        total = 0.0
        for k in range(nk):
            lp[k] = exp(lp[k] - top)
            total = total + lp[k]
        for k in range(nk):
            w = lp[k] / total
            if w == 0.0:
                continue
            for r in range(n):
                diff[r] = x[b, r] - means[k, r]
            for r in range(n):
                acc = means[k, r]
                for c in range(n):
                    acc = acc + gains[k, r, c] * diff[c]
                out[b, r] = out[b, r] + w * acc
    return out_arr


def energy_sums(const double[:, ::1] points, const signed char[::1] labels):
    """Sums of pairwise distances within group 0, within group 1, and across.

    Each unordered pair is counted once.
    """
    cdef Py_ssize_t n = points.shape[0], p = points.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s00 = 0.0, s11 = 0.0, s01 = 0.0, acc, t
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(p):
                t = points[i, k] - points[j, k]
                acc = acc + t * t
            acc = sqrt(acc)
            if labels[i] != labels[j]:
                s01 = s01 + acc
            elif labels[i] == 0:
                s00 = s00 + acc
            else:
                s11 = s11 + acc
    return s00, s11, s01
