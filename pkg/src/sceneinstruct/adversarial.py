"""The four adversarial instruction generators.

Each generator draws from its own random stream and emits one
InstructionSample whose polarity facts (which categories are present,
which id-category pairs are true, which relations hold) can be re-derived
from the scene by brute force. The answer surface grammar is fixed:
segments joined by "; ", ids space-separated in ascending order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import RelationLexicon, QaRecord, Sr3dReference
from .errors import GenerationError
from .samples import InstructionSample, validate_sample
from .scenes import SceneGraph, has_distractors, instances_of, iou
from .tokens import id_token, indefinite, join_id_tokens

HOPE_QUESTION_PREFIX = "Determine the presence of the following objects in the scene:"
HROC_QUESTION_PREFIX = "Classify the following ID-category pairs:"
FQA_SUFFIX = (
    "If you can, answer the question based on the objects in the current"
    " scene and provide all the IDs"
)

PF_BRANCHES = ("unfactual", "partial_factual", "factual")


@dataclass(frozen=True)
class GenConfig:
    """Knobs for the adversarial generators.

    Fractions are targets realized stochastically per sample; over a large
    batch the observed mix converges to the configured value.
    """

    hope_queries: tuple[int, int] = (3, 6)
    hope_negative_fraction: float = 0.5
    hroc_pairs: tuple[int, int] = (3, 6)
    hroc_negative_fraction: float = 0.5
    hroc_positive_iou: float = 0.5
    pf_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    fqa_negative_fraction: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "hope_queries", tuple(self.hope_queries))
        object.__setattr__(self, "hroc_pairs", tuple(self.hroc_pairs))
        object.__setattr__(self, "pf_weights", tuple(self.pf_weights))
        for name in ("hope_queries", "hroc_pairs"):
            lo, hi = getattr(self, name)
            if not (isinstance(lo, int) and isinstance(hi, int) and 1 <= lo <= hi):
                raise GenerationError(f"{name} must be an integer range 1 <= lo <= hi")
        for name in (
            "hope_negative_fraction",
            "hroc_negative_fraction",
            "fqa_negative_fraction",
            "hroc_positive_iou",
        ):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise GenerationError(f"{name} must be in [0, 1], got {val}")
        if len(self.pf_weights) != 3 or any(w < 0 for w in self.pf_weights):
            raise GenerationError("pf_weights must be 3 non-negative ratios")
        if abs(sum(self.pf_weights) - 1.0) > 1e-9:
            raise GenerationError(
                f"pf_weights must sum to 1, got {sum(self.pf_weights)!r}"
            )


def _stochastic_round(x: float, rng: np.random.Generator) -> int:
    base = int(np.floor(x))
    return base + (1 if rng.random() < x - base else 0)


def _split_counts(
    k: int,
    fraction: float,
    rng: np.random.Generator,
    max_negative: int,
    max_positive: int,
) -> tuple[int, int]:
    """(n_negative, n_positive) summing to k, honoring the target fraction.

    Expected n_negative is k*fraction; clamps keep at least one of each
    polarity whenever both pools permit and the fraction is not pinned to
    an endpoint.
    """
    lo = max(0, k - max_positive)
    hi = min(k, max_negative)
    if k >= 2 and fraction > 0.0 and max_negative > 0:
        lo = max(lo, 1)
    if k >= 2 and fraction < 1.0 and max_positive > 0:
        hi = min(hi, k - 1)
    if lo > hi:
        raise GenerationError(
            f"cannot split {k} queries into the configured polarity mix"
        )
    n_neg = min(max(_stochastic_round(k * fraction, rng), lo), hi)
    return n_neg, k - n_neg


def _pick(pool: Sequence, n: int, rng: np.random.Generator) -> list:
    if n == 0:
        return []
    idx = rng.choice(len(pool), size=n, replace=False)
    return [pool[int(i)] for i in idx]


def gen_hope(
    scene: SceneGraph,
    category_pool: Sequence[str],
    cfg: GenConfig,
    rng: np.random.Generator,
    sample_index: int = 0,
) -> InstructionSample:
    """Presence probing: mixed present/absent categories, ids on the yes side."""
    if not scene.objects:
        raise GenerationError(f"scene {scene.scene_id!r} is empty")
    present = sorted(scene.categories())
    absent = sorted(set(category_pool) - set(present))
    if not absent and cfg.hope_negative_fraction > 0:
        raise GenerationError(
            f"category pool leaves no absent category for scene"
            f" {scene.scene_id!r}; cannot honor hope_negative_fraction"
        )
    lo, hi = cfg.hope_queries
    k = int(rng.integers(lo, hi + 1))
    k = min(k, len(present) + len(absent))
    fraction = cfg.hope_negative_fraction
    if fraction < 1.0:
        # positive queries are distinct categories, so their supply is the
        # scene's palette; shrink k when the expected positive demand
        # k*(1-fraction) would exceed it, else negatives get force-fed and
        # the realized mix drifts. The absent pool is corpus-wide and large,
        # so no symmetric cap is needed except in the all-negative case.
        k = min(k, max(int(len(present) / (1.0 - fraction)), 2))
    else:
        k = min(k, len(absent))
    n_neg, n_pos = _split_counts(
        k, fraction, rng, len(absent), len(present)
    )
    queries = [(cat, False) for cat in _pick(absent, n_neg, rng)]
    queries += [(cat, True) for cat in _pick(present, n_pos, rng)]
    queries = [queries[int(i)] for i in rng.permutation(len(queries))]

    segments = []
    answer_ids: list[int] = []
    for cat, is_present in queries:
        if is_present:
            ids = instances_of(scene, cat)
            segments.append("Yes, " + join_id_tokens(ids))
            answer_ids.extend(ids)
        else:
            segments.append("No")

    question = f"{HOPE_QUESTION_PREFIX} " + "; ".join(c for c, _ in queries) + "."
    sample = InstructionSample(
        sample_id=f"hope-{scene.scene_id}-{sample_index:06d}",
        task="hope",
        scene_id=scene.scene_id,
        question=question,
        answer="; ".join(segments),
        question_object_ids=(),
        answer_object_ids=tuple(answer_ids),
        meta={"negative_count": n_neg, "positive_count": n_pos},
    )
    return validate_sample(sample, scene)


def gen_hroc(
    scene: SceneGraph,
    cfg: GenConfig,
    rng: np.random.Generator,
    sample_index: int = 0,
) -> InstructionSample:
    """Referring classification: id-category pairs judged yes/no with correction."""
    categories = sorted(scene.categories())
    if len(categories) < 2:
        raise GenerationError(
            f"scene {scene.scene_id!r} has fewer than 2 distinct categories;"
            " negatives are impossible"
        )
    all_ids = sorted(obj.object_id for obj in scene.objects)
    lo, hi = cfg.hroc_pairs
    m = int(rng.integers(lo, hi + 1))
    m = min(m, len(all_ids))
    n_neg, _ = _split_counts(m, cfg.hroc_negative_fraction, rng, m, m)
    ids = _pick(all_ids, m, rng)
    negative_at = set(int(i) for i in _pick(range(m), n_neg, rng))

    pairs = []
    segments = []
    for pos, oid in enumerate(ids):
        true_cat = scene.object(oid).category
        if pos in negative_at:
            candidates = [c for c in categories if c != true_cat]
            shown = candidates[int(rng.integers(len(candidates)))]
            segments.append(f"No, it is {indefinite(true_cat)}")
        else:
            # overlap gate kept explicit so proposal boxes can slot in later
            best = max(iou(scene.object(oid).box, gt.box) for gt in scene.objects)
            if best < cfg.hroc_positive_iou:
                raise GenerationError(
                    f"object {oid} overlaps no ground-truth box at"
                    f" IoU >= {cfg.hroc_positive_iou}"
                )
            shown = true_cat
            segments.append("Yes")
        pairs.append(f"{id_token(oid)}: {shown}")

    question = f"{HROC_QUESTION_PREFIX} " + "; ".join(pairs) + "."
    sample = InstructionSample(
        sample_id=f"hroc-{scene.scene_id}-{sample_index:06d}",
        task="hroc",
        scene_id=scene.scene_id,
        question=question,
        answer="; ".join(segments),
        question_object_ids=tuple(ids),
        answer_object_ids=(),
        meta={"negative_count": n_neg, "positive_count": m - n_neg},
    )
    return validate_sample(sample, scene)


def _replace_wording(text: str, old: str, new: str) -> str:
    pattern = rf"(?<!\w){re.escape(old)}(?!\w)"
    out, n = re.subn(pattern, lambda m: new, text, count=1)
    if n == 0:
        raise GenerationError(f"wording {old!r} not found in {text!r}")
    return out


def gen_pf3dvg(
    scene: SceneGraph,
    refs: Sequence[Sr3dReference],
    lexicon: RelationLexicon,
    cfg: GenConfig,
    rng: np.random.Generator,
    sample_index: int = 0,
) -> InstructionSample:
    """Grounding under unfactual, relation-swapped, or synonym-restated references."""
    branch = PF_BRANCHES[int(rng.choice(3, p=cfg.pf_weights))]
    scene_cats = set(scene.categories())

    if branch == "unfactual":
        eligible = [r for r in refs if r.target_category not in scene_cats]
        if not eligible:
            raise GenerationError(
                f"no reference with a target category absent from scene"
                f" {scene.scene_id!r}"
            )
        ref = eligible[int(rng.integers(len(eligible)))]
        question_text = ref.surface_text
        answer = "No"
        answer_ids: tuple[int, ...] = ()
        extra = {}
    elif branch == "partial_factual":
        eligible = [
            r
            for r in refs
            if r.scene_id == scene.scene_id
            and not has_distractors(scene, r.target_id)
        ]
        if not eligible:
            raise GenerationError(
                f"no distractor-free reference for scene {scene.scene_id!r}"
            )
        ref = eligible[int(rng.integers(len(eligible)))]
        form = lexicon.find_form(ref.relation, ref.surface_text)
        candidates = lexicon.swap_candidates(ref.relation)
        if not candidates:
            raise GenerationError(f"no swappable relation for {ref.relation!r}")
        swapped_to = candidates[int(rng.integers(len(candidates)))]
        question_text = _replace_wording(
            ref.surface_text, form, lexicon.surface_forms(swapped_to)[0]
        )
        answer = f"It is '{ref.relation}', {id_token(ref.target_id)}"
        answer_ids = (ref.target_id,)
        extra = {"swapped_to": swapped_to}
    else:
        eligible = [r for r in refs if r.scene_id == scene.scene_id]
        if not eligible:
            raise GenerationError(f"no reference for scene {scene.scene_id!r}")
        ref = eligible[int(rng.integers(len(eligible)))]
        form = lexicon.find_form(ref.relation, ref.surface_text)
        synonyms = [s for s in lexicon.synonyms(ref.relation) if s != form]
        if not synonyms:
            raise GenerationError(
                f"relation {ref.relation!r} has no synonym distinct from {form!r}"
            )
        synonym = synonyms[int(rng.integers(len(synonyms)))]
        question_text = _replace_wording(ref.surface_text, form, synonym)
        answer = id_token(ref.target_id)
        answer_ids = (ref.target_id,)
        extra = {"synonym": synonym}

    sample = InstructionSample(
        sample_id=f"pf3dvg-{scene.scene_id}-{sample_index:06d}",
        task="pf3dvg",
        scene_id=scene.scene_id,
        question=f"Find {question_text}.",
        answer=answer,
        question_object_ids=(),
        answer_object_ids=answer_ids,
        meta={
            "branch": branch,
            "relation": ref.relation,
            "source_scene_id": ref.scene_id,
            "target_category": ref.target_category,
            **extra,
        },
    )
    return validate_sample(sample, scene)


def gen_3dfqa(
    scenes: Sequence[SceneGraph],
    qa: Sequence[QaRecord],
    cfg: GenConfig,
    rng: np.random.Generator,
    sample_index: int = 0,
) -> InstructionSample:
    """QA with grounded evidence ids on positives, mandatory refusal on negatives."""
    if not qa:
        raise GenerationError("no QA records to sample from")
    if not scenes:
        raise GenerationError("empty scene pool")
    by_id = {s.scene_id: s for s in scenes}

    negative = rng.random() < cfg.fqa_negative_fraction
    if negative:
        skipped = 0
        rec = None
        for pos in rng.permutation(len(qa)):
            candidate = qa[int(pos)]
            related = set(candidate.related_categories)
            lacking = [s for s in scenes if related.isdisjoint(s.categories())]
            if lacking:
                rec = candidate
                scene = lacking[int(rng.integers(len(lacking)))]
                break
            skipped += 1
        if rec is None:
            raise GenerationError(
                "no scene in the pool lacks the related categories of any QA record"
            )
        answer = "No"
        answer_ids: tuple[int, ...] = ()
        meta = {"polarity": "negative", "qa_scene_id": rec.scene_id,
                "related_categories": list(rec.related_categories),
                "skipped_qa": skipped}
    else:
        rec = qa[int(rng.integers(len(qa)))]
        scene = by_id.get(rec.scene_id)
        if scene is None:
            raise GenerationError(
                f"QA record cites scene {rec.scene_id!r} not present in the pool"
            )
        ids = tuple(sorted(set(rec.related_object_ids)))
        answer = f"{rec.answer}, {join_id_tokens(ids)}"
        answer_ids = ids
        meta = {"polarity": "positive", "qa_scene_id": rec.scene_id,
                "related_categories": list(rec.related_categories)}

    sample = InstructionSample(
        sample_id=f"fqa3d-{scene.scene_id}-{sample_index:06d}",
        task="fqa3d",
        scene_id=scene.scene_id,
        question=f"{rec.question} {FQA_SUFFIX}",
        answer=answer,
        question_object_ids=(),
        answer_object_ids=answer_ids,
        meta=meta,
    )
    return validate_sample(sample, scene)
