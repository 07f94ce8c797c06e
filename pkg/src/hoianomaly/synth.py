"""Synthetic HOI streams with injected anomalies of known cause.

Normal HOI vectors come from a mixture of "normal modes" (interaction
template, usual object, box size) plus detector noise: small Gaussian noise on
every interaction probability and occasional low-confidence misfires of rare
object or interaction classes. Misfires give rare classes some variance in
normal data, so they stay visible after PCA.

Injections replace one HOI per frame over a frame interval:

* ``NovelObject``: the object block becomes one-hot on the named class, with
  confidence ``magnitude``.
* ``NovelInteraction``: the named interaction probability is set to ``magnitude``.
* ``BoxOutlier``: both box sides are multiplied by ``magnitude``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .evaluation import ExplanationLabel, LabelSet
from .hoi_model import DEFAULT_LAYOUT, BlockLayout, FrameRecord, HoiVector, Vocabulary

KINDS = {"NovelObject": "object", "NovelInteraction": "action", "BoxOutlier": "location"}


@dataclass(frozen=True)
class NormalMode:
    weight: float
    interactions: dict            # interaction name -> template probability
    object: str
    confidence: tuple = (0.7, 1.0)
    box_mean: tuple = (22.0, 60.0)
    box_sd: tuple = (0.3, 0.5)


@dataclass(frozen=True)
class Misfire:
    kind: str                     # "object" or "interaction"
    name: str
    rate: float
    level: tuple = (0.2, 0.5)


@dataclass(frozen=True)
class Injection:
    video: int
    start: int
    end: int                      # inclusive
    kind: str
    magnitude: float
    fine: str = ""                # class name; unused for BoxOutlier


@dataclass(frozen=True)
class ScenarioSpec:
    seed: int = 0
    n_videos: int = 5
    frames_per_video: int = 2000
    train_videos: int = 5
    hois_per_frame: tuple = (1, 3)
    empty_frame_rate: float = 0.01
    interaction_noise: float = 0.02
    normal_modes: tuple = ()
    misfires: tuple = ()
    injections: tuple = ()
    layout: BlockLayout = DEFAULT_LAYOUT
    vocab: Vocabulary | None = None

    def vocabulary(self) -> Vocabulary:
        return self.vocab if self.vocab is not None else Vocabulary.default()

    def validate(self) -> "ScenarioSpec":
        vocab = self.vocabulary()
        vocab.check_layout(self.layout)
        if self.n_videos < 1 or self.frames_per_video < 1:
            raise ValueError("need at least one video with one frame")
        lo, hi = self.hois_per_frame
        if not 1 <= lo <= hi:
            raise ValueError("hois_per_frame must satisfy 1 <= min <= max")
        if not self.normal_modes:
            raise ValueError("no normal modes")
        if abs(sum(m.weight for m in self.normal_modes) - 1.0) > 1e-9:
            raise ValueError("normal mode weights must sum to 1")
        for m in self.normal_modes:
            _index(vocab.object_names, m.object, "object")
            for name in m.interactions:
                _index(vocab.interaction_names, name, "interaction")
            if min(m.box_mean) <= 0:
                raise ValueError("box means must be positive")
        for f in self.misfires:
            names = vocab.object_names if f.kind == "object" else vocab.interaction_names
            _index(names, f.name, f.kind)
        for inj in self.injections:
            if inj.kind not in KINDS:
                raise ValueError(f"unknown injection kind {inj.kind!r}")
            if not 0 <= inj.video < self.n_videos:
                raise ValueError(f"injection video {inj.video} outside [0, {self.n_videos})")
            if not 0 <= inj.start <= inj.end < self.frames_per_video:
                raise ValueError(f"injection interval [{inj.start}, {inj.end}] outside the video")
            if inj.kind == "NovelObject":
                _index(vocab.object_names, inj.fine, "object")
                if not 0 < inj.magnitude <= 1:
                    raise ValueError("NovelObject magnitude is a confidence in (0, 1]")
            elif inj.kind == "NovelInteraction":
                _index(vocab.interaction_names, inj.fine, "interaction")
                if not 0 <= inj.magnitude <= 1:
                    raise ValueError("NovelInteraction magnitude is a probability in [0, 1]")
            elif inj.magnitude <= 0:
                raise ValueError("BoxOutlier magnitude must be positive")
        return self

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("layout", "vocab")}
        out["layout"] = self.layout.to_dict()
        if self.vocab is not None:
            out["vocab"] = {"interactions": list(self.vocab.interaction_names),
                            "objects": list(self.vocab.object_names)}
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioSpec":
        obj = dict(obj)
        # default injections are planned for the requested video count and length
        base = default_scenario(obj.get("seed", 0), obj.get("n_videos", 5), obj.get("frames_per_video", 2000))
        kw = {}
        for key in ("seed", "n_videos", "frames_per_video", "train_videos", "empty_frame_rate",
                    "interaction_noise"):
            if key in obj:
                kw[key] = obj[key]
        if "hois_per_frame" in obj:
            kw["hois_per_frame"] = tuple(obj["hois_per_frame"])
        if "normal_modes" in obj:
            kw["normal_modes"] = tuple(
                NormalMode(**{k: tuple(v) if isinstance(v, list) else v for k, v in m.items()})
                for m in obj["normal_modes"])
        if "misfires" in obj:
            kw["misfires"] = tuple(Misfire(**{k: tuple(v) if isinstance(v, list) else v for k, v in m.items()})
                                   for m in obj["misfires"])
        if "injections" in obj:
            kw["injections"] = tuple(Injection(**i) for i in obj["injections"])
        if "layout" in obj:
            kw["layout"] = BlockLayout(**obj["layout"])
        if "vocab" in obj:
            kw["vocab"] = Vocabulary(tuple(obj["vocab"]["interactions"]), tuple(obj["vocab"]["objects"]))
        return ScenarioSpec(**{**base.__dict__, **kw}).validate()

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _index(names: Sequence[str], name: str, kind: str) -> int:
    try:
        return names.index(name)
    except ValueError:
        raise ValueError(f"unknown {kind} class {name!r}") from None


DEFAULT_MODES = (
    NormalMode(0.4, {"walk": 0.85, "look": 0.3, "stand": 0.1}, "person", (0.8, 1.0), (21.25, 59.25), (0.3, 0.5)),
    NormalMode(0.3, {"walk": 0.7, "carry": 0.8, "hold": 0.3}, "backpack", (0.6, 0.95), (21.75, 59.75), (0.3, 0.5)),
    NormalMode(0.2, {"stand": 0.7, "hold": 0.75, "carry": 0.4}, "handbag", (0.5, 0.9), (22.25, 60.25), (0.3, 0.5)),
    NormalMode(0.1, {"talk_on_phone": 0.8, "stand": 0.6, "hold": 0.5}, "cell phone", (0.5, 0.9),
               (22.75, 60.75), (0.3, 0.5)),
)

# Detector misfires: each HOI independently shows each of these rare classes
# with probability ``rate`` at a low level.
DEFAULT_MISFIRES = tuple(
    Misfire(kind, name, 0.1, (0.2, 0.5))
    for kind, name in (("object", "bicycle"), ("object", "skateboard"), ("object", "car"),
                       ("interaction", "ride"), ("interaction", "run"), ("interaction", "throw"))
)

# Magnitudes used by the end-to-end checks: confident detections of rare
# classes and boxes 1.5x the usual size.
NOVEL_OBJECT_CONFIDENCE = 0.9
NOVEL_INTERACTION_PROBABILITY = 0.9
BOX_SCALE = 1.5


def default_injections(n_videos: int = 5, frames_per_video: int = 2000, length: int = 40) -> tuple:
    plan = [("NovelObject", NOVEL_OBJECT_CONFIDENCE, f) for f in ("bicycle", "skateboard", "car")]
    plan += [("NovelInteraction", NOVEL_INTERACTION_PROBABILITY, f) for f in ("ride", "run", "throw")]
    plan += [("BoxOutlier", BOX_SCALE, "")] * 3
    out = []
    slots_per_video = -(-len(plan) // n_videos)
    gap = frames_per_video // (slots_per_video + 1)
    for i, (kind, mag, fine) in enumerate(plan):
        video = i % n_videos
        start = gap * (i // n_videos + 1) - length // 2
        out.append(Injection(video, start, start + length - 1, kind, mag, fine))
    return tuple(out)


def default_scenario(seed: int = 0, n_videos: int = 5, frames_per_video: int = 2000,
                     injections: tuple | None = None) -> ScenarioSpec:
    if injections is None:
        injections = default_injections(n_videos, frames_per_video)
    return ScenarioSpec(seed=seed, n_videos=n_videos, frames_per_video=frames_per_video,
                        train_videos=n_videos, normal_modes=DEFAULT_MODES, misfires=DEFAULT_MISFIRES,
                        injections=tuple(injections))


class _Sampler:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        vocab = spec.vocabulary()
        self.layout = spec.layout
        k_int = spec.layout.k_int
        self.mode_w = np.array([m.weight for m in spec.normal_modes])
        self.templates = np.zeros((len(spec.normal_modes), k_int))
        for i, m in enumerate(spec.normal_modes):
            for name, p in m.interactions.items():
                self.templates[i, vocab.interaction_names.index(name)] = p
        self.mode_obj = [vocab.object_names.index(m.object) for m in spec.normal_modes]
        self.misfires = [(f, (vocab.object_names if f.kind == "object" else vocab.interaction_names).index(f.name))
                         for f in spec.misfires]
        self.obj_index = {n: i for i, n in enumerate(vocab.object_names)}
        self.int_index = {n: i for i, n in enumerate(vocab.interaction_names)}

    def normal_hoi(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        spec = self.spec
        k = int(rng.choice(len(self.mode_w), p=self.mode_w))
        mode = spec.normal_modes[k]
        inter = np.clip(self.templates[k] + rng.normal(0.0, spec.interaction_noise, self.layout.k_int), 0.0, 1.0)
        objs = np.zeros(self.layout.k_obj)
        objs[self.mode_obj[k]] = rng.uniform(*mode.confidence)
        box = np.maximum(rng.normal(mode.box_mean, mode.box_sd), 1.0)
        for f, idx in self.misfires:
            if rng.random() < f.rate:
                level = rng.uniform(*f.level)
                if f.kind == "object":
                    objs[:] = 0.0
                    objs[idx] = level
                else:
                    inter[idx] = level
        return inter, objs, box

    def video(self, rng: np.random.Generator, video_id: str, n_frames: int,
              injections: Sequence[Injection]) -> tuple[list[FrameRecord], dict, dict]:
        lo, hi = self.spec.hois_per_frame
        frames, flags, labels = [], {}, {}
        for t in range(n_frames):
            if rng.random() < self.spec.empty_frame_rate:
                hois = []
            else:
                hois = [list(self.normal_hoi(rng)) for _ in range(int(rng.integers(lo, hi + 1)))]
            active = [inj for inj in injections if inj.start <= t <= inj.end]
            frame_labels = []
            for j, inj in enumerate(active):
                while len(hois) <= j:
                    hois.append(list(self.normal_hoi(rng)))
                inter, objs, box = hois[j]
                if inj.kind == "NovelObject":
                    objs[:] = 0.0
                    objs[self.obj_index[inj.fine]] = inj.magnitude
                    frame_labels.append(ExplanationLabel("object", inj.fine))
                elif inj.kind == "NovelInteraction":
                    inter[self.int_index[inj.fine]] = inj.magnitude
                    frame_labels.append(ExplanationLabel("action", inj.fine))
                else:
                    hois[j][2] = box * inj.magnitude
                    frame_labels.append(ExplanationLabel("location", "person"))
            frames.append(FrameRecord(video_id, t, tuple(HoiVector(*h) for h in hois)))
            flags[(video_id, t)] = bool(active)
            if frame_labels:
                labels[(video_id, t)] = frame_labels[:5]
        return frames, flags, labels


def _video_rng(seed: int, stream: int, video: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, video])


def generate(spec: ScenarioSpec) -> tuple[list[FrameRecord], LabelSet]:
    """Test stream with injected anomalies, and its ground truth."""
    spec.validate()
    sampler = _Sampler(spec)
    frames, truth = [], LabelSet()
    for v in range(spec.n_videos):
        injections = [i for i in spec.injections if i.video == v]
        f, flags, labels = sampler.video(_video_rng(spec.seed, 0, v), f"video_{v:03d}",
                                         spec.frames_per_video, injections)
        frames.extend(f)
        truth.frame_flags.update(flags)
        truth.explanations.update(labels)
    return frames, truth


def generate_training(spec: ScenarioSpec) -> list[FrameRecord]:
    """Anomaly-free stream from the same normal generator, on independent seeds."""
    spec.validate()
    sampler = _Sampler(spec)
    frames = []
    for v in range(spec.train_videos):
        f, _, _ = sampler.video(_video_rng(spec.seed, 1, v), f"train_{v:03d}", spec.frames_per_video, [])
        frames.extend(f)
    return frames
