"""Human-object interaction (HOI) vectors, their block layout and vocabularies.

A HOI vector is the concatenation ``[interactions | objects | box]``:
per-class interaction probabilities, a one-hot object score carrying the
detector confidence in the hot slot, and the human box (width, height) in
pixels.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np


class ValidationError(ValueError):
    """Input data does not satisfy a layout or format contract."""


class Block(enum.IntEnum):
    INTERACTION = 0
    OBJECT = 1
    BOX = 2

    @property
    def coarse_label(self) -> str:
        return ("action", "object", "location")[self.value]


@dataclass(frozen=True)
class BlockLayout:
    k_int: int = 29
    k_obj: int = 81
    k_box: int = 2

    def __post_init__(self):
        if self.k_int < 0 or self.k_obj < 0:
            raise ValueError("block sizes must be nonnegative")
        if self.k_box != 2:
            raise ValueError("the box block always holds (width, height)")

    @property
    def dim(self) -> int:
        return self.k_int + self.k_obj + self.k_box

    @property
    def slices(self) -> tuple[slice, slice, slice]:
        a = self.k_int
        b = a + self.k_obj
        return slice(0, a), slice(a, b), slice(b, b + self.k_box)

    def block_ids(self) -> np.ndarray:
        """Block id of every index in ``[0, dim)``."""
        return np.repeat(np.arange(3), [self.k_int, self.k_obj, self.k_box])

    def to_dict(self) -> dict:
        return {"k_int": self.k_int, "k_obj": self.k_obj, "k_box": self.k_box}


DEFAULT_LAYOUT = BlockLayout()


def block_of(index: int, layout: BlockLayout = DEFAULT_LAYOUT) -> Block:
    if not 0 <= index < layout.dim:
        raise IndexError(f"index {index} outside [0, {layout.dim})")
    if index < layout.k_int:
        return Block.INTERACTION
    if index < layout.k_int + layout.k_obj:
        return Block.OBJECT
    return Block.BOX


@dataclass(frozen=True)
class Vocabulary:
    interaction_names: tuple[str, ...]
    object_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "interaction_names", tuple(self.interaction_names))
        object.__setattr__(self, "object_names", tuple(self.object_names))
        for kind, names in (("interaction", self.interaction_names),
                            ("object", self.object_names)):
            if len(set(names)) != len(names):
                raise ValidationError(f"duplicate {kind} class names")

    def check_layout(self, layout: BlockLayout) -> None:
        if (len(self.interaction_names), len(self.object_names)) != (layout.k_int, layout.k_obj):
            raise ValidationError(
                f"vocabulary sizes ({len(self.interaction_names)}, {len(self.object_names)}) "
                f"do not match layout ({layout.k_int}, {layout.k_obj})")

    @classmethod
    def generic(cls, layout: BlockLayout) -> "Vocabulary":
        return cls(tuple(f"interaction_{i}" for i in range(layout.k_int)),
                   tuple(f"object_{i}" for i in range(layout.k_obj)))

    @classmethod
    def default(cls) -> "Vocabulary":
        """V-COCO interactions (29, with role splits) and COCO objects plus background (81)."""
        pkg = resources.files("hoianomaly") / "data"
        return cls(_parse_names((pkg / "vcoco_interactions.txt").read_text()),
                   _parse_names((pkg / "coco_objects.txt").read_text()))

    @classmethod
    def from_files(cls, interactions: str | Path, objects: str | Path) -> "Vocabulary":
        return cls(read_vocab_file(interactions), read_vocab_file(objects))

    def write(self, interactions: str | Path, objects: str | Path) -> None:
        Path(interactions).write_text("".join(n + "\n" for n in self.interaction_names))
        Path(objects).write_text("".join(n + "\n" for n in self.object_names))

    def digests(self) -> dict[str, str]:
        return {"interactions": _digest(self.interaction_names),
                "objects": _digest(self.object_names)}

    def class_key(self, index: int, layout: BlockLayout) -> str:
        """Explanation class a vector index contributes to.

        Interaction and object names are qualified by their coarse label
        (``action:ride``, ``object:bicycle``) since the two vocabularies can
        share names; both box entries map to ``location``.
        """
        blk = block_of(index, layout)
        if blk is Block.INTERACTION:
            return "action:" + self.interaction_names[index]
        if blk is Block.OBJECT:
            return "object:" + self.object_names[index - layout.k_int]
        return "location"


def explanation_class_key(coarse: str, fine: str) -> str:
    """Class key for a ground-truth label, matching :meth:`Vocabulary.class_key`."""
    if coarse == "location":
        return "location"
    if coarse not in ("action", "object"):
        raise ValidationError(f"unknown coarse label {coarse!r}")
    return f"{coarse}:{fine}"


def _parse_names(text: str) -> tuple[str, ...]:
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def _digest(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode()).hexdigest()


def read_vocab_file(path: str | Path) -> tuple[str, ...]:
    return _parse_names(Path(path).read_text())


@dataclass(frozen=True)
class HoiVector:
    interactions: np.ndarray
    objects: np.ndarray
    box: np.ndarray

    def __post_init__(self):
        for name in ("interactions", "objects", "box"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def validate(self, layout: BlockLayout = DEFAULT_LAYOUT) -> "HoiVector":
        sizes = (self.interactions.size, self.objects.size, self.box.size)
        if sizes != (layout.k_int, layout.k_obj, layout.k_box):
            raise ValidationError(
                f"block lengths {sizes} do not match layout "
                f"({layout.k_int}, {layout.k_obj}, {layout.k_box})")
        flat = np.concatenate([self.interactions, self.objects, self.box])
        if not np.all(np.isfinite(flat)):
            raise ValidationError("non-finite value in HOI vector")
        if np.any((self.interactions < 0) | (self.interactions > 1)):
            raise ValidationError("interaction probabilities must lie in [0, 1]")
        if np.any((self.objects < 0) | (self.objects > 1)):
            raise ValidationError("object scores must lie in [0, 1]")
        if np.count_nonzero(self.objects > 0) > 1:
            raise ValidationError("object block must be one-hot (at most one positive score)")
        if np.any(self.box <= 0):
            raise ValidationError("box width and height must be positive")
        return self

    def top_interaction(self, vocab: Vocabulary) -> str:
        return vocab.interaction_names[int(np.argmax(self.interactions))]

    def top_object(self, vocab: Vocabulary) -> str:
        return vocab.object_names[int(np.argmax(self.objects))]


def flatten(h: HoiVector, layout: BlockLayout = DEFAULT_LAYOUT) -> np.ndarray:
    if (h.interactions.size, h.objects.size, h.box.size) != (layout.k_int, layout.k_obj, layout.k_box):
        raise ValidationError("HOI vector does not conform to layout")
    return np.concatenate([h.interactions, h.objects, h.box])


def unflatten(v, layout: BlockLayout = DEFAULT_LAYOUT) -> HoiVector:
    v = np.asarray(v, dtype=float)
    if v.shape != (layout.dim,):
        raise ValidationError(f"expected vector of length {layout.dim}, got shape {v.shape}")
    si, so, sb = layout.slices
    return HoiVector(v[si], v[so], v[sb])


@dataclass(frozen=True)
class FrameRecord:
    video_id: str
    frame_idx: int
    detections: tuple[HoiVector, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.frame_idx < 0:
            raise ValidationError("frame_idx must be nonnegative")

    @property
    def key(self) -> tuple[str, int]:
        return (self.video_id, self.frame_idx)

    def matrix(self, layout: BlockLayout = DEFAULT_LAYOUT) -> np.ndarray:
        """Detections stacked as rows of flattened vectors, shape (n, D)."""
        if not self.detections:
            return np.empty((0, layout.dim))
        return np.stack([flatten(h, layout) for h in self.detections])


def check_stream_order(frames: Sequence[FrameRecord]) -> None:
    """Frame indices must strictly increase within each video."""
    last: dict[str, int] = {}
    for f in frames:
        prev = last.get(f.video_id)
        if prev is not None and f.frame_idx <= prev:
            raise ValidationError(
                f"frame_idx not strictly increasing in video {f.video_id!r}: {prev} then {f.frame_idx}")
        last[f.video_id] = f.frame_idx


def stack_detections(frames: Sequence[FrameRecord], layout: BlockLayout = DEFAULT_LAYOUT) -> np.ndarray:
    rows = [f.matrix(layout) for f in frames if f.detections]
    if not rows:
        return np.empty((0, layout.dim))
    return np.concatenate(rows)
