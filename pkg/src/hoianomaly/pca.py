"""Principal component analysis of HOI vectors.

Projection is ``x = W^T (v - mean)`` and back-projection ``y = W x + mean``;
the back-projection is the pseudo-inverse of the projection, which is what the
explainer needs to map a normal event from reduced space back to HOI space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray          # (D,)
    components: np.ndarray    # W, (D, d) orthonormal columns
    eigenvalues: np.ndarray   # (d,) nonincreasing
    variance_captured: float
    total_variance: float

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[1]


def n_components_for(eigenvalues, threshold: float) -> int:
    """Smallest count of leading eigenvalues whose cumulative share reaches ``threshold``.

    ``eigenvalues`` must be sorted nonincreasing. Zero eigenvalues are never counted.
    """
    ev = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = ev.sum()
    if total <= 0:
        raise ValueError("zero total variance")
    ratio = np.cumsum(ev) / total
    # A relative 1e-12 allowance keeps exact fractions like 0.99 from missing on rounding.
    d = int(np.searchsorted(ratio, threshold - 1e-12, side="left")) + 1
    positive = int(np.count_nonzero(ev > ev[0] * 1e-12))
    return max(1, min(d, positive, ev.size))


def _fix_signs(W: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(W), axis=0)  # argmax returns the lowest index on ties
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def fit_pca(data, variance_threshold: float = 0.99) -> PcaModel:
    X = np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("PCA needs at least 2 samples")
    if not 0 < variance_threshold <= 1:
        raise ValueError("variance_threshold must lie in (0, 1]")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in PCA input")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    total = float(evals.sum())
    if total <= 0:
        raise ValueError("zero total variance: all samples are identical")
    d = n_components_for(evals, variance_threshold)
    W = _fix_signs(evecs[:, :d])
    kept = evals[:d]
    return PcaModel(mean=mean, components=W, eigenvalues=kept,
                    variance_captured=float(kept.sum() / total), total_variance=total)


def project(model: PcaModel, v) -> np.ndarray:
    """Reduced coordinates; accepts a single vector (D,) or rows (n, D)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != model.input_dim:
        raise ValueError(f"expected length {model.input_dim}, got {v.shape[-1]}")
    return (v - model.mean) @ model.components


def back_project(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n_components:
        raise ValueError(f"expected length {model.n_components}, got {x.shape[-1]}")
    return x @ model.components.T + model.mean
