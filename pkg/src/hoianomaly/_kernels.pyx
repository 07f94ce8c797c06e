# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Same signatures as :mod:`hoianomaly._pykernels`."""
import numpy as np
from libc.math cimport exp, ceil


def sq_mahalanobis(const double[:, ::1] X, const double[::1] mean, const double[:, ::1] chol):
    """Squared Mahalanobis distance of each row of X, given the lower Cholesky factor."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, acc
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    z_arr = np.empty(d)
    cdef double[::1] z = z_arr
    if mean.shape[0] != d or chol.shape[0] != d or chol.shape[1] != d:
        raise ValueError("dimension mismatch")
    for i in range(n):
        acc = 0.0
        for j in range(d):
            s = X[i, j] - mean[j]
            for k in range(j):
                s -= chol[j, k] * z[k]
            s /= chol[j, j]
            z[j] = s
            acc += s * s
        out[i] = acc
    return out_arr


def gaussian_smooth(const double[::1] x, double sigma):
    """Truncated Gaussian filter (radius ceil(3 sigma)), renormalised at the edges."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t r, i, k, lo, hi
    cdef double num, den, w
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = <Py_ssize_t>ceil(3.0 * sigma)
    w_arr = np.empty(2 * r + 1)
    cdef double[::1] wts = w_arr
    for k in range(-r, r + 1):
        wts[k + r] = exp(-0.5 * (k * k) / (sigma * sigma))
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        lo = i - r if i >= r else 0
        hi = i + r if i + r < n else n - 1
        num = 0.0
        den = 0.0
        for k in range(lo, hi + 1):
            w = wts[k - i + r]
            num += w * x[k]
            den += w
        out[i] = num / den
    return out_arr


def saliency(const double[::1] diff, const double[:, ::1] A):
    """H[i, j] = diff[i] * A[i, j] * diff[j]."""
    cdef Py_ssize_t D = diff.shape[0]
    cdef Py_ssize_t i, j
    if A.shape[0] != D or A.shape[1] != D:
        raise ValueError("dimension mismatch")
    H_arr = np.empty((D, D))
    cdef double[:, ::1] H = H_arr
    for i in range(D):
        for j in range(D):
            H[i, j] = diff[i] * A[i, j] * diff[j]
    return H_arr


def tie_ranks(const double[::1] sorted_scores):
    """1-based ranks of an ascending array, ties sharing their average rank."""
    cdef Py_ssize_t n = sorted_scores.shape[0]
    cdef Py_ssize_t i = 0, j, k
    cdef double r
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        r = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            out[k] = r
        i = j + 1
    return out_arr
