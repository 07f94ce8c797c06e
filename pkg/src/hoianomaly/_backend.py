"""Kernel backend chosen at import: the compiled extension when it was built,
the numpy fallback otherwise. Set ``HOIANOMALY_PURE_PYTHON=1`` to force the
fallback."""
import os

import numpy as np

from . import _pykernels

if os.environ.get("HOIANOMALY_PURE_PYTHON", "") not in ("", "0"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"


def _c(a):
    return np.ascontiguousarray(a, dtype=float)


def sq_mahalanobis(X, mean, chol):
    return kernels.sq_mahalanobis(_c(X), _c(mean), _c(chol))


def gaussian_smooth(x, sigma):
    return kernels.gaussian_smooth(_c(x), float(sigma))


def saliency(diff, A):
    return kernels.saliency(_c(diff), _c(A))


def tie_ranks(sorted_scores):
    return kernels.tie_ranks(_c(sorted_scores))
