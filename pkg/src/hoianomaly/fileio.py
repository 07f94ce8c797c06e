"""File formats: HOI JSON-lines, score/flag CSVs, label JSON-lines and the model file.

Floats are written with ``repr``, the shortest decimal string that reads back
to the identical double, so every numeric field round-trips bit for bit.
"""
from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detector import FrameScore, NormalityModel
from .evaluation import ExplanationLabel, LabelSet
from .gmm import GmmModel
from .hoi_model import BlockLayout, FrameRecord, HoiVector, ValidationError, Vocabulary
from .pca import PcaModel

FORMAT_VERSION = 1


class DataError(ValidationError):
    """Malformed input file; the message names the file and line."""

    def __init__(self, path, line: int | None, message: str):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


@contextlib.contextmanager
def atomic_write(path: str | Path, mode: str = "w", **kwargs):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix="." + path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


# -- HOI streams ---------------------------------------------------------------

def _float_list(obj, name: str, n: int) -> np.ndarray:
    if not isinstance(obj, list):
        raise ValidationError(f"{name!r} must be a list")
    if len(obj) != n:
        raise ValidationError(f"{name!r} has {len(obj)} values, layout expects {n}")
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name!r} holds non-numeric values") from None
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name!r} holds non-finite values")
    return arr


def parse_frame(obj, layout: BlockLayout) -> FrameRecord:
    if not isinstance(obj, dict):
        raise ValidationError("expected a JSON object")
    for key in ("video_id", "frame_idx", "detections"):
        if key not in obj:
            raise ValidationError(f"missing field {key!r}")
    vid, idx, dets = obj["video_id"], obj["frame_idx"], obj["detections"]
    if not isinstance(vid, str):
        raise ValidationError("'video_id' must be a string")
    if isinstance(idx, bool) or not isinstance(idx, int) or idx < 0:
        raise ValidationError("'frame_idx' must be a nonnegative integer")
    if not isinstance(dets, list):
        raise ValidationError("'detections' must be a list")
    hois = []
    for j, d in enumerate(dets):
        if not isinstance(d, dict):
            raise ValidationError(f"detection {j} is not an object")
        try:
            for key in ("interactions", "objects", "box"):
                if key not in d:
                    raise ValidationError(f"missing field {key!r}")
            h = HoiVector(_float_list(d["interactions"], "interactions", layout.k_int),
                          _float_list(d["objects"], "objects", layout.k_obj),
                          _float_list(d["box"], "box", layout.k_box))
            hois.append(h.validate(layout))
        except ValidationError as exc:
            raise ValidationError(f"detection {j}: {exc}") from None
    return FrameRecord(vid, idx, tuple(hois))


def read_hoi_jsonl(path: str | Path, layout: BlockLayout = BlockLayout()) -> list[FrameRecord]:
    frames: list[FrameRecord] = []
    last: dict[str, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                f = parse_frame(json.loads(line), layout)
            except json.JSONDecodeError as exc:
                raise DataError(path, lineno, f"invalid JSON: {exc.msg}") from None
            except ValidationError as exc:
                raise DataError(path, lineno, str(exc)) from None
            prev = last.get(f.video_id)
            if prev is not None and f.frame_idx <= prev:
                raise DataError(path, lineno,
                                f"frame_idx {f.frame_idx} not after {prev} in video {f.video_id!r}")
            last[f.video_id] = f.frame_idx
            frames.append(f)
    return frames


def frame_to_json(f: FrameRecord) -> dict:
    return {
        "video_id": f.video_id,
        "frame_idx": f.frame_idx,
        "detections": [{"interactions": h.interactions.tolist(), "objects": h.objects.tolist(),
                        "box": h.box.tolist()} for h in f.detections],
    }


def write_hoi_jsonl(path: str | Path, frames: Iterable[FrameRecord]) -> None:
    with atomic_write(path) as fh:
        for f in frames:
            fh.write(json.dumps(frame_to_json(f)) + "\n")


# -- scores, flags and labels ------------------------------------------------------

def write_scores_csv(path: str | Path, scores: Sequence[FrameScore],
                     decisions: Sequence[bool] | None = None) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "frame_idx", "raw_score", "smoothed_score", "decision"])
        for i, s in enumerate(scores):
            dec = "" if decisions is None else int(bool(decisions[i]))
            w.writerow([s.video_id, s.frame_idx, repr(s.raw_score), repr(s.smoothed_score), dec])


def read_scores_csv(path: str | Path) -> list[FrameScore]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, 2):
            try:
                out.append(FrameScore(row["video_id"], int(row["frame_idx"]), float(row["raw_score"]),
                                      float(row["smoothed_score"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(path, lineno, f"bad score row: {exc}") from None
    return out


_TRUE = {"1", "true", "True", "yes"}
_FALSE = {"0", "false", "False", "no"}


def read_flags_csv(path: str | Path) -> dict[tuple[str, int], bool]:
    flags = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (lineno == 1 and row[:3] == ["video_id", "frame_idx", "flag"]):
                continue
            if len(row) != 3:
                raise DataError(path, lineno, "expected video_id,frame_idx,flag")
            vid, idx, flag = (c.strip() for c in row)
            if flag not in _TRUE | _FALSE:
                raise DataError(path, lineno, f"flag must be 0/1, got {flag!r}")
            try:
                key = (vid, int(idx))
            except ValueError:
                raise DataError(path, lineno, f"bad frame_idx {idx!r}") from None
            flags[key] = flag in _TRUE
    return flags


def write_flags_csv(path: str | Path, flags: Mapping[tuple[str, int], bool]) -> None:
    with atomic_write(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "frame_idx", "flag"])
        for (vid, idx), flag in flags.items():
            w.writerow([vid, idx, int(flag)])


def read_labels_jsonl(path: str | Path, frame_flags: Mapping | None = None) -> LabelSet:
    explanations = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                key = (obj["video_id"], int(obj["frame_idx"]))
                labels = [ExplanationLabel(lab["coarse"], lab["fine"]) for lab in obj["labels"]]
            except json.JSONDecodeError as exc:
                raise DataError(path, lineno, f"invalid JSON: {exc.msg}") from None
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(path, lineno, f"bad label record: {exc}") from None
            explanations[key] = labels
    flags = dict(frame_flags) if frame_flags is not None else {k: True for k in explanations}
    try:
        return LabelSet(flags, explanations).validate()
    except ValidationError as exc:
        raise DataError(path, None, str(exc)) from None


def write_labels_jsonl(path: str | Path, truth: LabelSet) -> None:
    with atomic_write(path) as fh:
        for (vid, idx), labels in truth.explanations.items():
            fh.write(json.dumps({"video_id": vid, "frame_idx": idx,
                                 "labels": [{"coarse": l.coarse, "fine": l.fine} for l in labels]}) + "\n")


def write_frame_scores_jsonl(path: str | Path, rows: Iterable[tuple[tuple[str, int], Mapping[str, float]]]) -> None:
    with atomic_write(path) as fh:
        for (vid, idx), scores in rows:
            fh.write(json.dumps({"video_id": vid, "frame_idx": idx, "scores": dict(scores)}) + "\n")


def read_frame_scores_jsonl(path: str | Path) -> dict[tuple[str, int], dict[str, float]]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[(obj["video_id"], int(obj["frame_idx"]))] = {str(k): float(v) for k, v in obj["scores"].items()}
            except json.JSONDecodeError as exc:
                raise DataError(path, lineno, f"invalid JSON: {exc.msg}") from None
            except (KeyError, TypeError, ValueError, AttributeError) as exc:
                raise DataError(path, lineno, f"bad prediction record: {exc}") from None
    return out


def write_json(path: str | Path, obj) -> None:
    with atomic_write(path) as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


# -- model file -----------------------------------------------------------------

def model_to_dict(model: NormalityModel) -> dict:
    pca, gmm = model.pca, model.gmm
    return {
        "format_version": FORMAT_VERSION,
        "layout": model.layout.to_dict(),
        "vocab": {
            "interactions": list(model.vocab.interaction_names),
            "objects": list(model.vocab.object_names),
            "digests": model.vocab.digests(),
        },
        "pca": {
            "mean": pca.mean.tolist(),
            "shape": list(pca.components.shape),
            "W": pca.components.flatten(order="F").tolist(),
            "eigenvalues": pca.eigenvalues.tolist(),
            "variance_captured": pca.variance_captured,
            "total_variance": pca.total_variance,
        },
        "gmm": {
            "M": gmm.n_components,
            "weights": gmm.weights.tolist(),
            "means": gmm.means.tolist(),
            "covariances": gmm.covariances.tolist(),
            "log_likelihood_history": list(gmm.history),
            "converged": gmm.converged,
        },
        "bic_curve": [[m, b] for m, b in model.bic_curve],
        "config": model.metadata,
    }


def model_from_dict(obj: Mapping, source="<model>") -> NormalityModel:
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(source, None, f"model format_version {version!r}, expected {FORMAT_VERSION}")
    try:
        layout = BlockLayout(**obj["layout"])
        v = obj["vocab"]
        vocab = Vocabulary(tuple(v["interactions"]), tuple(v["objects"]))
        if v.get("digests", vocab.digests()) != vocab.digests():
            raise ValidationError("vocabulary digests do not match the stored class names")
        p = obj["pca"]
        D, d = p["shape"]
        pca = PcaModel(mean=np.array(p["mean"], dtype=float),
                       components=np.array(p["W"], dtype=float).reshape((D, d), order="F"),
                       eigenvalues=np.array(p["eigenvalues"], dtype=float),
                       variance_captured=float(p["variance_captured"]),
                       total_variance=float(p["total_variance"]))
        g = obj["gmm"]
        gmm = GmmModel(np.array(g["weights"], dtype=float), np.array(g["means"], dtype=float),
                       np.array(g["covariances"], dtype=float),
                       history=tuple(g.get("log_likelihood_history", ())),
                       converged=bool(g.get("converged", True)))
        if gmm.n_components != int(g["M"]):
            raise ValidationError("stored M disagrees with the parameter arrays")
        return NormalityModel(layout, vocab, pca, gmm, tuple(tuple(x) for x in obj.get("bic_curve", ())),
                              dict(obj.get("config", {})))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(source, None, f"invalid model file: {exc}") from None


def save_model(path: str | Path, model: NormalityModel) -> None:
    write_json(path, model_to_dict(model))


def load_model(path: str | Path) -> NormalityModel:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    return model_from_dict(obj, path)


def check_vocab(model: NormalityModel, vocab: Vocabulary, source="vocabulary") -> None:
    if vocab.digests() != model.vocab.digests():
        raise DataError(source, None, "class lists do not match the model's vocabulary")
