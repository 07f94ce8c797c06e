"""Explanations of HOI anomalies.

For a tested HOI vector ``v`` with reduced coordinates ``x``, the closest
normal event is the mixture component with the highest posterior, mapped back
to HOI space as ``y = W mu + mean``. The squared Mahalanobis deviation from
that component splits exactly over pairs of HOI elements:

    (x - mu)^T S^-1 (x - mu) = sum_ij (v - y)_i (W S^-1 W^T)_ij (v - y)_j

and the summand matrix is the saliency heatmap.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend
from .detector import NormalityModel
from .gmm import log_component_density, weighted_log_densities
from .hoi_model import Block, FrameRecord, HoiVector, ValidationError, flatten
from .pca import back_project, project


@dataclass(frozen=True, eq=False)
class Explanation:
    tested_event: HoiVector
    top_interaction: str
    top_object: str
    normal_mode: int
    normal_event: np.ndarray      # y, length D
    heatmap: np.ndarray           # H, (D, D)
    coarse: np.ndarray            # (3, 3) over (interaction, object, box)
    class_scores: dict            # diagonal of H per interaction/object class
    location_score: float         # sum of the two box diagonal entries

    @property
    def total(self) -> float:
        return float(self.heatmap.sum())

    def dominant_block(self) -> Block:
        return Block(int(np.argmax(np.diag(self.coarse))))

    def all_scores(self) -> dict:
        return {**self.class_scores, "location": self.location_score}


def closest_normal(model: NormalityModel, x) -> tuple[int, float]:
    """Component of highest posterior responsibility and its density p(x | m)."""
    x = np.asarray(x, dtype=float)
    m = int(np.argmax(weighted_log_densities(model.gmm, x)[0]))
    return m, float(np.exp(log_component_density(model.gmm, m, x)))


@functools.lru_cache(maxsize=8)
def _pair_weights(model: NormalityModel) -> tuple[np.ndarray, ...]:
    W = model.pca.components
    out = []
    for m in range(model.gmm.n_components):
        A = W @ model.gmm.precision(m) @ W.T
        out.append(0.5 * (A + A.T))
    return tuple(out)


@functools.lru_cache(maxsize=8)
def _block_indicator(model: NormalityModel) -> np.ndarray:
    ids = model.layout.block_ids()
    return (ids[None, :] == np.arange(3)[:, None]).astype(float)


def _class_keys(model: NormalityModel) -> list[str]:
    n = model.layout.k_int + model.layout.k_obj
    return [model.vocab.class_key(i, model.layout) for i in range(n)]


def saliency_heatmap(model: NormalityModel, h: HoiVector) -> Explanation:
    layout = model.layout
    v = flatten(h, layout)
    x = project(model.pca, v)
    m, _ = closest_normal(model, x)
    y = back_project(model.pca, model.gmm.means[m])
    H = _backend.saliency(v - y, _pair_weights(model)[m])
    B = _block_indicator(model)
    coarse = B @ H @ B.T
    diag = np.diag(H)
    n = layout.k_int + layout.k_obj
    scores = dict(zip(_class_keys(model), diag[:n].tolist()))
    return Explanation(
        tested_event=h,
        top_interaction=h.top_interaction(model.vocab) if layout.k_int else "",
        top_object=h.top_object(model.vocab) if layout.k_obj else "",
        normal_mode=m,
        normal_event=y,
        heatmap=H,
        coarse=coarse,
        class_scores=scores,
        location_score=float(diag[layout.slices[2]].sum()),
    )


def aggregate_frame_scores(explanations) -> tuple[dict, float]:
    """Per-class maximum over a frame's HOI explanations (not normalised across classes)."""
    explanations = list(explanations)
    if not explanations:
        raise ValidationError("cannot explain a frame without detections")
    keys = explanations[0].class_scores.keys()
    scores = {k: max(e.class_scores[k] for e in explanations) for k in keys}
    return scores, max(e.location_score for e in explanations)


def frame_explanation_scores(model: NormalityModel, f: FrameRecord) -> tuple[dict, float]:
    if not f.detections:
        raise ValidationError(f"frame {f.video_id}/{f.frame_idx} has no detections to explain")
    return aggregate_frame_scores(saliency_heatmap(model, h) for h in f.detections)


def write_heatmap_csv(path: str | Path, H: np.ndarray) -> None:
    np.savetxt(path, H, delimiter=",", fmt="%.17g")


def write_heatmap_pgm(path: str | Path, H: np.ndarray) -> Path:
    """8-bit binary PGM, min-max scaled; the scale goes to ``<path>.scale.txt``."""
    path = Path(path)
    lo, hi = float(H.min()), float(H.max())
    if hi > lo:
        img = np.rint((H - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros(H.shape, dtype=np.uint8)
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    sidecar = path.with_name(path.name + ".scale.txt")
    sidecar.write_text(f"min {lo!r}\nmax {hi!r}\n")
    return sidecar


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise ValidationError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise ValidationError(f"{path}: only 8-bit PGM supported")
    return np.frombuffer(data[m.end():m.end() + rows * cols], dtype=np.uint8).reshape(rows, cols)
