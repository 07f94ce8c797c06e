"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np
from scipy.linalg import solve_triangular


def sq_mahalanobis(X, mean, chol):
    X = np.asarray(X, dtype=float)
    if mean.shape[0] != X.shape[1] or chol.shape != (X.shape[1], X.shape[1]):
        raise ValueError("dimension mismatch")
    z = solve_triangular(chol, (X - mean).T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", z, z)


def gaussian_smooth(x, sigma):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    r = int(math.ceil(3.0 * sigma))
    k = np.arange(-r, r + 1)
    w = np.exp(-0.5 * k * k / (sigma * sigma))
    num = np.convolve(x, w, mode="full")[r:r + x.size]
    den = np.convolve(np.ones_like(x), w, mode="full")[r:r + x.size]
    return num / den


def saliency(diff, A):
    diff = np.asarray(diff, dtype=float)
    if A.shape != (diff.size, diff.size):
        raise ValueError("dimension mismatch")
    return diff[:, None] * A * diff[None, :]


def tie_ranks(sorted_scores):
    s = np.asarray(sorted_scores, dtype=float)
    n = s.size
    if n == 0:
        return np.empty(0)
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], n] - 1
    return np.repeat(0.5 * (starts + ends) + 1.0, ends - starts + 1)
