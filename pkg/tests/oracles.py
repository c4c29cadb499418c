"""Independent reference computations used to check the engine.

These deliberately avoid the library's own code paths: the IoU oracle
counts voxel centers on a fixed grid instead of using the analytic
volume formulas.
"""

from __future__ import annotations

import numpy as np

VOXEL_DOMAIN = 10.0  # oracle grid spans [0, 10]^3
VOXEL_CELLS = 200    # so each cell is 0.05 m; boxes on that lattice count exactly


def voxel_iou(amin, amax, bmin, bmax, cells: int = VOXEL_CELLS,
              domain: float = VOXEL_DOMAIN) -> float:
    """IoU estimated by counting cell centers of a ``cells``^3 grid.

    The grid spans the fixed cube [0, domain]^3.  For axis-aligned boxes
    the 3D center counts factor into per-axis counts, which keeps the
    counting cheap without changing what is counted.  Boxes whose faces
    lie on cell boundaries are counted exactly; others are counted to
    within one cell per face.
    """
    amin = np.asarray(amin, dtype=float)
    amax = np.asarray(amax, dtype=float)
    bmin = np.asarray(bmin, dtype=float)
    bmax = np.asarray(bmax, dtype=float)

    count_a = count_b = count_inter = 1
    for k in range(3):
        centers = (np.arange(cells) + 0.5) * (domain / cells)
        in_a = (centers >= amin[k]) & (centers <= amax[k])
        in_b = (centers >= bmin[k]) & (centers <= bmax[k])
        count_a *= int(in_a.sum())
        count_b *= int(in_b.sum())
        count_inter *= int((in_a & in_b).sum())
    union = count_a + count_b - count_inter
    if union == 0:
        return 0.0
    return count_inter / union


def random_lattice_box_pair(rng: np.random.Generator):
    """Random positive-volume boxes with corners on the oracle's cell lattice."""
    step = VOXEL_DOMAIN / VOXEL_CELLS

    def one():
        lo = rng.integers(0, VOXEL_CELLS - 20, size=3)
        ext = rng.integers(2, 80, size=3)
        hi = np.minimum(lo + ext, VOXEL_CELLS)
        return lo * step, hi * step

    return one(), one()


def random_box_pair(rng: np.random.Generator, span: float = 6.0):
    """A pair of random positive-volume continuous-coordinate boxes."""
    def one():
        lo = rng.uniform(0.0, span - 0.5, size=3)
        ext = rng.uniform(0.1, span / 2, size=3)
        return lo, lo + ext
    return one(), one()


# ---------------------------------------------------------------------------
# Polarity-soundness oracles for the adversarial generators.
#
# Each checker re-derives the ground truth from the scene by brute force
# (no engine helpers beyond token parsing) and raises AssertionError on
# the first violation.

import re as _re

_TOKEN = _re.compile(r"<OBJ(\d{3,})>")

HOPE_PREFIX = "Determine the presence of the following objects in the scene: "
HROC_PREFIX = "Classify the following ID-category pairs: "
FQA_SUFFIX = ("If you can, answer the question based on the objects in the"
              " current scene and provide all the IDs")


def _article(noun: str) -> str:
    return "an" if noun[0].lower() in "aeiou" else "a"


def _ids_in(text: str) -> list[int]:
    return [int(m.group(1)) for m in _TOKEN.finditer(text)]


def _category_ids(scene, category: str) -> list[int]:
    return sorted(o.object_id for o in scene.objects if o.category == category)


def check_hope(sample, scene) -> tuple[int, int]:
    """Verify every segment against brute-force presence; return (pos, neg)."""
    q, a = sample.question, sample.answer
    assert q.startswith(HOPE_PREFIX) and q.endswith("."), q
    cats = q[len(HOPE_PREFIX):-1].split("; ")
    segs = a.split("; ")
    assert len(segs) == len(cats), (cats, segs)
    n_pos = n_neg = 0
    answer_ids = []
    for cat, seg in zip(cats, segs):
        truth = _category_ids(scene, cat)
        if seg == "No":
            assert truth == [], f"'No' for present category {cat!r}: {truth}"
            n_neg += 1
        else:
            expect = "Yes, " + " ".join(f"<OBJ{i:03d}>" for i in truth)
            assert seg == expect, f"{cat!r}: {seg!r} != {expect!r}"
            answer_ids.extend(truth)
            n_pos += 1
    assert list(sample.answer_object_ids) == answer_ids
    assert n_pos >= 1 and n_neg >= 1, "hybrid sample must mix polarities"
    return n_pos, n_neg


def check_hroc(sample, scene) -> tuple[int, int]:
    """Verify pair classifications against the scene; return (pos, neg)."""
    q, a = sample.question, sample.answer
    assert q.startswith(HROC_PREFIX) and q.endswith("."), q
    pairs = q[len(HROC_PREFIX):-1].split("; ")
    segs = a.split("; ")
    assert len(segs) == len(pairs), (pairs, segs)
    scene_cats = {o.category for o in scene.objects}
    n_pos = n_neg = 0
    for pair, seg in zip(pairs, segs):
        token, shown = pair.split(": ", 1)
        (oid,) = _ids_in(token)
        true_cat = next(o.category for o in scene.objects if o.object_id == oid)
        if seg == "Yes":
            assert shown == true_cat, f"positive pair lies: {pair!r}"
            n_pos += 1
        else:
            assert seg == f"No, it is {_article(true_cat)} {true_cat}", seg
            assert shown != true_cat, f"negative shows the true category: {pair!r}"
            assert shown in scene_cats, f"negative category not in scene: {shown!r}"
            n_neg += 1
    assert list(sample.question_object_ids) == [
        _ids_in(p)[0] for p in pairs
    ]
    return n_pos, n_neg


def check_pf3dvg(sample, scene) -> str:
    """Verify the branch contract; return the branch name."""
    q, a = sample.question, sample.answer
    assert q.startswith("Find ") and q.endswith("."), q
    branch = sample.meta["branch"]
    if branch == "unfactual":
        assert a == "No" and sample.answer_object_ids == ()
        target_cat = sample.meta["target_category"]
        assert all(o.category != target_cat for o in scene.objects), (
            f"unfactual target {target_cat!r} present in scene"
        )
    elif branch == "partial_factual":
        m = _re.fullmatch(r"It is '(.+)', <OBJ(\d{3,})>", a)
        assert m, a
        oid = int(m.group(2))
        assert sample.answer_object_ids == (oid,)
        target_cat = next(
            o.category for o in scene.objects if o.object_id == oid
        )
        same = [o for o in scene.objects if o.category == target_cat]
        assert len(same) == 1, f"partial-factual target has distractors: {same}"
        assert m.group(1) == sample.meta["relation"]
    else:
        assert branch == "factual", branch
        (oid,) = _ids_in(a)
        assert a == f"<OBJ{oid:03d}>"
        assert sample.answer_object_ids == (oid,)
        assert sample.meta["synonym"] in q
    return branch


def check_3dfqa(sample, scenes_by_id) -> str:
    """Verify refusal/grounding contract; return the polarity."""
    q, a = sample.question, sample.answer
    assert q.endswith(FQA_SUFFIX), q
    scene = scenes_by_id[sample.scene_id]
    polarity = sample.meta["polarity"]
    if polarity == "negative":
        assert a == "No" and sample.answer_object_ids == ()
        scene_cats = {o.category for o in scene.objects}
        for cat in sample.meta["related_categories"]:
            assert cat not in scene_cats, (
                f"negative scene {scene.scene_id!r} contains {cat!r}"
            )
    else:
        assert polarity == "positive", polarity
        ids = sorted(sample.answer_object_ids)
        assert ids, "positive sample must ground at least one id"
        assert a.endswith(", " + " ".join(f"<OBJ{i:03d}>" for i in ids)), a
        present = {o.object_id for o in scene.objects}
        assert all(i in present for i in ids)
    return polarity
