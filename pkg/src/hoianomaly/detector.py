"""Frame-level anomaly scoring against a fitted PCA + GMM normality model.

Scores are negative log densities in the reduced space, so larger means more
anomalous and a threshold on probability becomes a threshold on this scale.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _backend
from .gmm import EmConfig, GmmModel, bic, fit_em, log_mixture_density, select_components
from .hoi_model import (DEFAULT_LAYOUT, BlockLayout, FrameRecord, HoiVector, ValidationError,
                        Vocabulary, check_stream_order, flatten, stack_detections)
from .pca import PcaModel, fit_pca, project

log = logging.getLogger(__name__)

DEFAULT_SIGMA = 3.0


@dataclass(frozen=True, eq=False)
class NormalityModel:
    layout: BlockLayout
    vocab: Vocabulary
    pca: PcaModel
    gmm: GmmModel
    bic_curve: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vocab.check_layout(self.layout)
        if self.pca.input_dim != self.layout.dim:
            raise ValidationError(f"PCA input dimension {self.pca.input_dim} != layout dimension {self.layout.dim}")
        if self.gmm.dim != self.pca.n_components:
            raise ValidationError(f"GMM dimension {self.gmm.dim} != PCA output dimension {self.pca.n_components}")
        object.__setattr__(self, "bic_curve", tuple((int(m), float(b)) for m, b in self.bic_curve))


@dataclass(frozen=True)
class FrameScore:
    video_id: str
    frame_idx: int
    raw_score: float
    smoothed_score: float = math.nan
    worst_hoi_index: int | None = None


def fit_normality_model(frames: Sequence[FrameRecord], vocab: Vocabulary,
                        layout: BlockLayout = DEFAULT_LAYOUT, variance_threshold: float = 0.99,
                        m_range: tuple[int, int] = (1, 10), m_override: int | None = None,
                        config: EmConfig = EmConfig()) -> NormalityModel:
    """Fit PCA and a GMM on every HOI vector of the (normal) training frames."""
    vocab.check_layout(layout)
    X = stack_detections(frames, layout)
    if X.shape[0] < 2:
        raise ValidationError("training data holds fewer than 2 HOI vectors")
    pca = fit_pca(X, variance_threshold)
    Z = project(pca, X)
    log.info("PCA kept %d of %d dimensions (%.4f of variance)", pca.n_components, layout.dim,
             pca.variance_captured)
    gmm, curve = select_components(Z, m_range, config)
    if m_override is not None and m_override != gmm.n_components:
        gmm = fit_em(Z, m_override, config)
        if all(m != m_override for m, _ in curve):
            curve = sorted(curve + [(m_override, bic(gmm, Z, gmm.log_likelihood))])
    metadata = {
        "n_frames": len(frames),
        "n_hoi_vectors": int(X.shape[0]),
        "variance_threshold": variance_threshold,
        "m_range": list(m_range),
        "m_override": m_override,
        "em": config.to_dict(),
        "selected_m": gmm.n_components,
    }
    return NormalityModel(layout, vocab, pca, gmm, tuple(curve), metadata)


def score_vectors(model: NormalityModel, V) -> np.ndarray:
    """Anomaly scores of flattened HOI vectors given as rows of ``V``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != model.layout.dim:
        raise ValidationError(f"expected HOI vectors of length {model.layout.dim}, got {V.shape[1]}")
    if V.shape[0] == 0:
        return np.empty(0)
    return -log_mixture_density(model.gmm, project(model.pca, V))


def hoi_anomaly_score(model: NormalityModel, h: HoiVector) -> float:
    return float(score_vectors(model, flatten(h, model.layout))[0])


def _frame_from_scores(f: FrameRecord, s: np.ndarray) -> FrameScore:
    if s.size == 0:
        return FrameScore(f.video_id, f.frame_idx, 0.0)
    worst = int(np.argmax(s))
    return FrameScore(f.video_id, f.frame_idx, float(s[worst]), worst_hoi_index=worst)


def frame_score(model: NormalityModel, f: FrameRecord) -> FrameScore:
    """Worst HOI decides; a frame without detections scores 0."""
    return _frame_from_scores(f, score_vectors(model, f.matrix(model.layout)))


def score_frames(model: NormalityModel, frames: Sequence[FrameRecord]) -> list[FrameScore]:
    """Batched :func:`frame_score` over a stream."""
    counts = [len(f.detections) for f in frames]
    s = score_vectors(model, stack_detections(frames, model.layout))
    bounds = np.cumsum([0] + counts)
    return [_frame_from_scores(f, s[bounds[i]:bounds[i + 1]]) for i, f in enumerate(frames)]


def smooth_scores(scores: Sequence[FrameScore], sigma: float = DEFAULT_SIGMA) -> list[FrameScore]:
    """Fill ``smoothed_score`` with a truncated Gaussian filter run separately per video.

    Within each video the scores must appear in increasing frame order; videos
    may be interleaved and the output keeps the input order.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    by_video: dict[str, list[int]] = {}
    for i, s in enumerate(scores):
        by_video.setdefault(s.video_id, []).append(i)
    out = list(scores)
    for vid, pos in by_video.items():
        idx = [scores[i].frame_idx for i in pos]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValidationError(f"frames of video {vid!r} are not sorted by frame index")
        sm = _backend.gaussian_smooth(np.array([scores[i].raw_score for i in pos]), sigma)
        for i, v in zip(pos, sm):
            out[i] = replace(scores[i], smoothed_score=float(v))
    return out


def detect(model: NormalityModel, frames: Sequence[FrameRecord], threshold: float,
           sigma: float = DEFAULT_SIGMA) -> tuple[list[bool], list[FrameScore]]:
    check_stream_order(frames)
    scores = smooth_scores(score_frames(model, frames), sigma)
    return [s.smoothed_score > threshold for s in scores], scores
