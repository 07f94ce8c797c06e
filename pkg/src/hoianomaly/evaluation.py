"""Detection AUC and explanation mAP."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import _backend
from .hoi_model import ValidationError, explanation_class_key

FrameKey = tuple[str, int]
COARSE_LABELS = ("object", "action", "location")


@dataclass(frozen=True)
class ExplanationLabel:
    coarse: str
    fine: str

    def __post_init__(self):
        if self.coarse not in COARSE_LABELS:
            raise ValidationError(f"coarse label must be one of {COARSE_LABELS}, got {self.coarse!r}")

    @property
    def class_key(self) -> str:
        return explanation_class_key(self.coarse, self.fine)


@dataclass
class LabelSet:
    frame_flags: dict[FrameKey, bool] = field(default_factory=dict)
    explanations: dict[FrameKey, list[ExplanationLabel]] = field(default_factory=dict)

    def validate(self) -> "LabelSet":
        for key, labels in self.explanations.items():
            if key in self.frame_flags and not self.frame_flags[key]:
                raise ValidationError(f"frame {key} carries explanations but is flagged normal")
            if not 1 <= len(labels) <= 5:
                raise ValidationError(f"frame {key} has {len(labels)} explanation labels, expected 1-5")
        return self

    def positives(self) -> dict[str, set[FrameKey]]:
        """Frames per explanation class."""
        out: dict[str, set[FrameKey]] = {}
        for key, labels in self.explanations.items():
            for lab in labels:
                out.setdefault(lab.class_key, set()).add(key)
        return out


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic (ties count one half)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size)
    ranks[order] = _backend.tie_ranks(s[order])
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def average_precision(scores, relevant) -> float:
    """All-points AP; ``scores`` must already be in tie-break order (stable sort)."""
    s = np.asarray(scores, dtype=float)
    rel = np.asarray(relevant, dtype=bool)
    if not rel.any():
        raise ValueError("AP undefined without positives")
    order = np.argsort(-s, kind="stable")
    hits = rel[order]
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].mean())


def explanation_map(pred: Mapping[FrameKey, Mapping[str, float]], truth: LabelSet,
                    class_filter: Iterable[str] | None = None) -> tuple[float, dict[str, float]]:
    """mAP over explanation classes that have at least one positive frame.

    Evaluated frames are those in ``pred`` plus the labelled frames; a class
    missing from a frame's predictions scores 0 there. Ties rank in
    (video_id, frame_idx) order.
    """
    positives = truth.positives()
    classes = set(positives)
    if class_filter is not None:
        classes &= set(class_filter)
    if not classes:
        raise ValueError("no explanation classes with positive frames to evaluate")
    frames = sorted(set(pred) | set(truth.explanations))
    per_class = {}
    for c in sorted(classes):
        s = [pred.get(k, {}).get(c, 0.0) for k in frames]
        rel = [k in positives[c] for k in frames]
        per_class[c] = average_precision(s, rel)
    return float(np.mean(list(per_class.values()))), per_class
