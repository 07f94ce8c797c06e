"""Full-covariance Gaussian mixture model fitted by EM.

Components are indexed from 0. All density work is done in log space; each
component caches its Cholesky factor and log normaliser so that scoring is a
triangular solve per sample.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import _backend

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 300
    tol: float = 1e-6          # relative change in total log-likelihood
    ridge: float = 1e-6        # times the average per-feature data variance
    restarts: int = 5
    seed: int = 0

    def to_dict(self) -> dict:
        return {"max_iters": self.max_iters, "tol": self.tol, "ridge": self.ridge,
                "restarts": self.restarts, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray       # (M,)
    means: np.ndarray         # (M, d)
    covariances: np.ndarray   # (M, d, d)
    history: tuple = ()       # total log-likelihood after each EM step, when fitted
    converged: bool = True
    chol: np.ndarray = field(init=False, repr=False)
    log_norm: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        cov = np.asarray(self.covariances, dtype=float).reshape(mu.shape[0], mu.shape[1], mu.shape[1])
        if w.shape != (mu.shape[0],):
            raise ValueError("weights and means disagree on the component count")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        d = mu.shape[1]
        logdet = 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)
        for name, val in (("weights", w), ("means", mu), ("covariances", cov),
                          ("chol", chol), ("log_norm", -0.5 * (d * LOG_2PI + logdet))):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "history", tuple(self.history))

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def log_likelihood(self) -> float:
        return self.history[-1] if self.history else float("nan")

    def precision(self, m: int) -> np.ndarray:
        self._check_index(m)
        inv_l = np.linalg.inv(self.chol[m])
        return inv_l.T @ inv_l

    def _check_index(self, m: int) -> None:
        if not 0 <= m < self.n_components:
            raise IndexError(f"component {m} outside [0, {self.n_components})")


def _rows(g: GmmModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != g.dim:
        raise ValueError(f"expected dimension {g.dim}, got {X.shape[1]}")
    return X, single


def log_component_density(g: GmmModel, m: int, x):
    g._check_index(m)
    X, single = _rows(g, x)
    out = g.log_norm[m] - 0.5 * _backend.sq_mahalanobis(X, g.means[m], g.chol[m])
    return float(out[0]) if single else out


def component_density(g: GmmModel, m: int, x):
    return np.exp(log_component_density(g, m, x))


def weighted_log_densities(g: GmmModel, x) -> np.ndarray:
    """log(pi_m) + log N(x; mu_m, Sigma_m) for every row and component, shape (n, M)."""
    X, _ = _rows(g, x)
    out = np.empty((X.shape[0], g.n_components))
    for m in range(g.n_components):
        out[:, m] = g.log_norm[m] - 0.5 * _backend.sq_mahalanobis(X, g.means[m], g.chol[m])
    return out + np.log(g.weights)


def log_mixture_density(g: GmmModel, x):
    X, single = _rows(g, x)
    out = logsumexp(weighted_log_densities(g, X), axis=1)
    return float(out[0]) if single else out


def n_parameters(M: int, d: int) -> int:
    return (M - 1) + M * d + M * d * (d + 1) // 2


def bic(g: GmmModel, data, log_likelihood: float | None = None) -> float:
    X, _ = _rows(g, data)
    if X.shape[0] == 0:
        raise ValueError("BIC needs data")
    if log_likelihood is None:
        log_likelihood = float(log_mixture_density(g, X).sum())
    return n_parameters(g.n_components, g.dim) * math.log(X.shape[0]) - 2.0 * log_likelihood


def _kmeans_pp(X: np.ndarray, M: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, M):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _m_step(X, resp, reg):
    n, d = X.shape
    nk = resp.sum(axis=0) + 10 * np.finfo(float).eps
    means = (resp.T @ X) / nk[:, None]
    covs = np.empty((resp.shape[1], d, d))
    eye = np.eye(d)
    for k in range(resp.shape[1]):
        diff = X - means[k]
        c = (resp[:, k, None] * diff).T @ diff / nk[k]
        covs[k] = 0.5 * (c + c.T) + reg * eye
    return nk / nk.sum(), means, covs


def _check_data(data) -> np.ndarray:
    X = np.asarray(data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty data")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite values in data")
    return X


def _run_em(X, M, config: EmConfig, rng, reg) -> GmmModel:
    n, d = X.shape
    global_cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True)) + reg * np.eye(d)
    g = GmmModel(np.full(M, 1.0 / M), _kmeans_pp(X, M, rng), np.repeat(global_cov[None], M, axis=0))
    history = []
    converged = False
    for _ in range(config.max_iters):
        logp = weighted_log_densities(g, X)
        lse = logsumexp(logp, axis=1)
        ll = float(lse.sum())
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) <= config.tol * abs(history[-2]):
            converged = True
            break
        resp = np.exp(logp - lse[:, None])
        g = GmmModel(*_m_step(X, resp, reg))
    else:
        history.append(float(log_mixture_density(g, X).sum()))
    return GmmModel(g.weights, g.means, g.covariances, history=history, converged=converged)


def fit_em(data, M: int, config: EmConfig = EmConfig()) -> GmmModel:
    """Fit an M-component mixture; the best of ``config.restarts`` runs is returned."""
    X = _check_data(data)
    if M < 1:
        raise ValueError("M must be at least 1")
    if X.shape[0] < M:
        raise ValueError(f"need at least M={M} samples, got {X.shape[0]}")
    avg_var = float(np.var(X, axis=0).mean())
    reg = config.ridge * (avg_var if avg_var > 0 else 1.0)
    best = None
    for r in range(max(1, config.restarts)):
        rng = np.random.default_rng([config.seed, M, r])
        g = _run_em(X, M, config, rng, reg)
        if not g.converged:
            log.warning("EM did not converge in %d iterations (M=%d, restart %d)", config.max_iters, M, r)
        if best is None or g.log_likelihood > best.log_likelihood:
            best = g
    return best


def bic_elbow(ms: Sequence[int], bics: Sequence[float]) -> int:
    """Component count at the elbow of a BIC curve.

    The elbow is the interior point of largest discrete second difference.
    A curve that only rises from its first point selects the first point; a
    curve with fewer than three points selects its minimum.
    """
    b = np.asarray(bics, dtype=float)
    if b.size == 0:
        raise ValueError("empty BIC curve")
    if b.size < 3:
        return int(ms[int(np.argmin(b))])
    if np.all(np.diff(b) > 0):
        return int(ms[0])
    curvature = b[:-2] - 2.0 * b[1:-1] + b[2:]
    return int(ms[1 + int(np.argmax(curvature))])


def select_components(data, m_range: tuple[int, int] = (1, 10),
                      config: EmConfig = EmConfig()) -> tuple[GmmModel, list[tuple[int, float]]]:
    X = _check_data(data)
    lo, hi = m_range
    ms = [m for m in range(lo, hi + 1) if m <= X.shape[0]]
    if not ms:
        raise ValueError(f"empty component range {m_range}")
    models, curve = {}, []
    for m in ms:
        g = fit_em(X, m, config)
        models[m] = g
        curve.append((m, bic(g, X, g.log_likelihood)))
        log.info("M=%d  logL=%.4f  BIC=%.4f", m, g.log_likelihood, curve[-1][1])
    best = bic_elbow([m for m, _ in curve], [b for _, b in curve])
    return models[best], curve
