"""Scene domain model: axis-aligned boxes, object instances, scene graphs.

All types are immutable after construction and safe to share across
threads.  Categories are canonicalized (lowercased, trimmed, internal
whitespace collapsed) before they are indexed, so spelling variants in
the corpora unify deterministically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

DEFAULT_MAX_OBJECTS = 150

_WS_RE = re.compile(r"\s+")


def canonicalize_category(raw: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return _WS_RE.sub(" ", raw.strip().lower())


@dataclass(frozen=True)
class Aabb3:
    """Axis-aligned 3D box, min/max corners in scene coordinates (meters)."""

    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if len(self.min) != 3 or len(self.max) != 3:
            raise ValueError("box corners must be 3-vectors")
        object.__setattr__(self, "min", tuple(float(v) for v in self.min))
        object.__setattr__(self, "max", tuple(float(v) for v in self.max))
        for k in range(3):
            if self.min[k] > self.max[k]:
                raise ValueError(
                    f"box min[{k}]={self.min[k]} exceeds max[{k}]={self.max[k]}")

    def volume(self) -> float:
        v = 1.0
        for k in range(3):
            v *= self.max[k] - self.min[k]
        return v

    def translated(self, offset) -> "Aabb3":
        return Aabb3(
            tuple(self.min[k] + offset[k] for k in range(3)),
            tuple(self.max[k] + offset[k] for k in range(3)),
        )


def iou(a: Aabb3, b: Aabb3) -> float:
    """Intersection-over-union of two boxes.

    Disjoint boxes score 0.  Two degenerate (zero-volume) boxes also
    score 0 by convention, avoiding 0/0; metrics never reward degenerate
    predictions.
    """
    inter = 1.0
    for k in range(3):
        lo = max(a.min[k], b.min[k])
        hi = min(a.max[k], b.max[k])
        if hi <= lo:
            return 0.0
        inter *= hi - lo
    union = a.volume() + b.volume() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class ObjectInstance:
    """One annotated object: id (index of its ``<OBJi>`` token), category, box."""

    object_id: int
    category: str
    box: Aabb3

    def __post_init__(self):
        if self.object_id < 0:
            raise ValueError(f"object id must be non-negative, got {self.object_id}")
        canon = canonicalize_category(self.category)
        if not canon:
            raise ValueError(f"object {self.object_id} has an empty category")
        object.__setattr__(self, "category", canon)


@dataclass(frozen=True)
class SceneGraph:
    """A 3D scene: ordered object instances plus a category index."""

    scene_id: str
    objects: tuple[ObjectInstance, ...]
    max_objects: int = DEFAULT_MAX_OBJECTS
    category_index: dict = field(init=False, repr=False, compare=False)
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        by_id = {}
        index: dict[str, list[int]] = {}
        for obj in self.objects:
            if obj.object_id in by_id:
                raise ValueError(
                    f"scene {self.scene_id!r}: duplicate object id {obj.object_id}")
            if obj.object_id >= self.max_objects:
                raise ValueError(
                    f"scene {self.scene_id!r}: object id {obj.object_id} "
                    f"exceeds max_objects={self.max_objects}")
            by_id[obj.object_id] = obj
            index.setdefault(obj.category, []).append(obj.object_id)
        for ids in index.values():
            ids.sort()
        object.__setattr__(self, "category_index", index)
        object.__setattr__(self, "_by_id", by_id)

    def __len__(self) -> int:
        return len(self.objects)

    def object(self, object_id: int) -> ObjectInstance:
        try:
            return self._by_id[object_id]
        except KeyError:
            raise KeyError(
                f"scene {self.scene_id!r} has no object id {object_id}") from None

    def has_object(self, object_id: int) -> bool:
        return object_id in self._by_id

    def categories(self) -> list[str]:
        """Distinct categories present, sorted."""
        return sorted(self.category_index)


def instances_of(scene: SceneGraph, category: str) -> list[int]:
    """Ids of every instance of *category* in ascending order; [] if absent."""
    return list(scene.category_index.get(canonicalize_category(category), ()))


def has_distractors(scene: SceneGraph, target_id: int) -> bool:
    """True iff another object in the scene shares the target's category."""
    target = scene.object(target_id)
    return len(scene.category_index[target.category]) > 1
