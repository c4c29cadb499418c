"""Synthetic corpus builder for tests, demos, and benchmarks.

Builds scenes, references, QA pairs, and captions that exercise every
generator branch: each scene keeps several categories absent (presence
negatives), holds at least two categories (classification negatives),
and carries at least one single-instance reference target (relation
swaps need a distractor-free target). Everything derives from the seed,
so two builds with the same arguments are identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import (
    CaptionRecord,
    Corpus,
    QaRecord,
    RelationLexicon,
    Sr3dReference,
    build_corpus,
    load_relation_lexicon,
)
from .rngs import derive_rng
from .scenes import Aabb3, ObjectInstance, SceneGraph
from .tokens import indefinite

CATEGORY_NAMES = (
    "chair", "table", "sofa", "bed", "desk", "lamp", "pillow", "monitor",
    "keyboard", "couch", "cabinet", "shelf", "sink", "toilet", "mirror",
    "curtain", "window", "door", "refrigerator", "microwave", "plant",
    "whiteboard", "backpack", "towel", "nightstand", "dresser", "bookshelf",
    "armchair", "ottoman", "stool",
)

COLORS = ("red", "blue", "green", "gray", "white", "black", "brown", "beige")

SCENE_SPAN = 10.0


def _make_scene(
    scene_id: str,
    rng: np.random.Generator,
    categories: tuple[str, ...],
    min_objects: int,
    max_objects: int,
) -> SceneGraph:
    n_objects = int(rng.integers(min_objects, max_objects + 1))
    # palette of 4..10 categories: small enough that plenty stay absent,
    # rich enough that classification and presence mixes stay balanced
    max_cats = min(10, len(categories) - 2, n_objects)
    n_cats = int(rng.integers(4, max(5, max_cats + 1)))
    n_cats = max(2, min(n_cats, max_cats))
    palette = [categories[int(i)] for i in rng.choice(len(categories), size=n_cats, replace=False)]

    # first objects cover the palette once; the first category stays a
    # singleton so every scene has a distractor-free reference target
    assignments = list(palette)
    while len(assignments) < n_objects:
        assignments.append(palette[int(rng.integers(1, len(palette)))] if len(palette) > 1 else palette[0])

    objects = []
    for oid, category in enumerate(assignments):
        extent = rng.uniform(0.3, 2.0, size=3)
        center = rng.uniform(1.5, SCENE_SPAN - 1.5, size=3)
        lo = center - extent / 2
        hi = center + extent / 2
        objects.append(
            ObjectInstance(oid, category, Aabb3(tuple(lo.tolist()), tuple(hi.tolist())))
        )
    return SceneGraph(scene_id, tuple(objects))


def _scene_references(
    scene: SceneGraph, rng: np.random.Generator, lexicon: RelationLexicon,
    per_scene: int,
) -> list[Sr3dReference]:
    singles = [
        c for c in sorted(scene.categories())
        if len(scene.category_index[c]) == 1
    ]
    relations = lexicon.relations
    refs = []
    for i in range(per_scene):
        # the first reference always targets a singleton category
        if i == 0 and singles:
            target_cat = singles[int(rng.integers(len(singles)))]
        else:
            cats = sorted(scene.categories())
            target_cat = cats[int(rng.integers(len(cats)))]
        target_id = scene.category_index[target_cat][0]
        anchor_pool = [o.object_id for o in scene.objects if o.object_id != target_id]
        if not anchor_pool:
            continue
        anchor_id = anchor_pool[int(rng.integers(len(anchor_pool)))]
        anchor_cat = scene.object(anchor_id).category
        relation = relations[int(rng.integers(len(relations)))]
        text = lexicon.render(relation, target_cat, [anchor_cat])
        refs.append(
            Sr3dReference(
                scene_id=scene.scene_id,
                target_id=target_id,
                target_category=target_cat,
                anchor_ids=(anchor_id,),
                relation=relation,
                surface_text=text,
            )
        )
    return refs


_NUM_WORDS = ("zero", "one", "two", "three", "four", "five", "six", "seven",
              "eight", "nine", "ten")


def _count_word(n: int) -> str:
    return _NUM_WORDS[n] if n < len(_NUM_WORDS) else str(n)


def _scene_qa(scene: SceneGraph, rng: np.random.Generator, per_scene: int) -> list[QaRecord]:
    cats = sorted(scene.categories())
    out = []
    for i in range(per_scene):
        cat = cats[int(rng.integers(len(cats)))]
        ids = scene.category_index[cat]
        if i % 2 == 0:
            question = f"How many instances of the {cat} does the room contain?"
            answer = _count_word(len(ids))
        else:
            question = f"Where is the {cat} placed in this room?"
            wall = ("north", "south", "east", "west")[int(rng.integers(4))]
            answer = f"by the {wall} wall"
        out.append(
            QaRecord(
                scene_id=scene.scene_id,
                question=question,
                answer=answer,
                related_object_ids=tuple(ids),
                related_categories=(cat,),
            )
        )
    return out


def _scene_captions(scene: SceneGraph, rng: np.random.Generator) -> list[CaptionRecord]:
    objs = scene.objects
    out = []
    for kind in ("category_qa", "nr3d_caption", "appearance", "region"):
        for _ in range(2):
            obj = objs[int(rng.integers(len(objs)))]
            other = objs[int(rng.integers(len(objs)))]
            color = COLORS[int(rng.integers(len(COLORS)))]
            if kind == "appearance":
                text = f"{indefinite(color)} {obj.category} with a smooth finish"
            elif kind == "region":
                text = (
                    f"the area around the {obj.category} also holds"
                    f" {indefinite(other.category)}"
                )
            elif kind == "nr3d_caption":
                text = f"the {obj.category} sits close to the {other.category}"
            else:
                text = f"this object is {indefinite(obj.category)}"
            out.append(CaptionRecord(scene.scene_id, obj.object_id, kind, text))
    return out


def make_corpus(
    seed: int = 0,
    n_scenes: int = 60,
    n_categories: int = 24,
    min_objects: int = 8,
    max_objects: int = 20,
    refs_per_scene: int = 3,
    qa_per_scene: int = 2,
    lexicon: RelationLexicon | None = None,
) -> Corpus:
    """Deterministic synthetic corpus exercising every generator branch."""
    if not 2 <= n_categories <= len(CATEGORY_NAMES):
        raise ValueError(
            f"n_categories must be in [2, {len(CATEGORY_NAMES)}], got {n_categories}"
        )
    if min_objects < 2 or max_objects < min_objects:
        raise ValueError("need max_objects >= min_objects >= 2")
    if lexicon is None:
        lexicon = load_relation_lexicon()
    categories = CATEGORY_NAMES[:n_categories]

    scenes, refs, qa, captions = [], [], [], []
    for idx in range(n_scenes):
        scene_id = f"scene{idx:04d}"
        rng = derive_rng(seed, "synth", scene_id)
        scene = _make_scene(scene_id, rng, categories, min_objects, max_objects)
        scenes.append(scene)
        refs.extend(_scene_references(scene, rng, lexicon, refs_per_scene))
        qa.extend(_scene_qa(scene, rng, qa_per_scene))
        captions.extend(_scene_captions(scene, rng))

    return build_corpus(scenes, refs, qa, captions, lexicon=lexicon)


def write_corpus(corpus: Corpus, out_dir: str | Path) -> dict[str, list[str]]:
    """Write a corpus to disk in the external file formats.

    Returns the written paths grouped by kind, suitable for feeding back
    into load_corpus or the CLI.
    """
    out_dir = Path(out_dir)
    scene_dir = out_dir / "scenes"
    scene_dir.mkdir(parents=True, exist_ok=True)

    paths: dict[str, list[str]] = {"scenes": [], "references": [], "qa": [], "captions": []}
    for scene_id in sorted(corpus.scenes):
        scene = corpus.scenes[scene_id]
        payload = {
            "scene_id": scene.scene_id,
            "objects": [
                {
                    "id": obj.object_id,
                    "category": obj.category,
                    "box": {"min": list(obj.box.min), "max": list(obj.box.max)},
                }
                for obj in scene.objects
            ],
        }
        path = scene_dir / f"{scene_id}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        paths["scenes"].append(str(path))

    for name, records in (
        ("references", corpus.references),
        ("qa", corpus.qa),
        ("captions", corpus.captions),
    ):
        path = out_dir / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
        paths[name].append(str(path))
    return paths
