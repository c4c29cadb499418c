"""Answer parsing and the grounding / QA metric suite.

Model answers follow a small grammar: segments joined by "; ", each
optionally led by a Yes/No verdict, optionally carrying correction text,
and grounding objects by canonical ID tokens. Parsing is total; anything
unrecognizable degrades to correction text plus diagnostics rather than
raising.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigError
from .scenes import SceneGraph, iou
from .tokens import extract_ids, find_malformed_tokens, join_id_tokens, strip_id_tokens

VERDICTS = ("yes", "no", "none")

THRESHOLDS = (0.25, 0.5)

_VERDICT_RE = re.compile(r"^(yes|no)\b[,.!]?\s*", re.IGNORECASE)
# normalization strips any <obj...>-shaped span, canonical or not
_LOOSE_OBJ_RE = re.compile(r"<[Oo][Bb][Jj][^<>]*>")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class AnswerSegment:
    """One "; "-delimited clause of a grounded answer."""

    verdict: str
    correction: str | None
    ids: tuple[int, ...]

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ConfigError(f"verdict must be one of {VERDICTS}")

    def render(self) -> str:
        parts = []
        if self.verdict == "yes":
            parts.append("Yes")
        elif self.verdict == "no":
            parts.append("No")
        if self.correction:
            parts.append(self.correction)
        if self.ids:
            parts.append(join_id_tokens(self.ids))
        return ", ".join(parts)


@dataclass(frozen=True)
class GroundedAnswer:
    segments: tuple[AnswerSegment, ...]
    raw: str
    diagnostics: tuple[str, ...] = ()

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(i for seg in self.segments for i in seg.ids)

    def render(self) -> str:
        return "; ".join(seg.render() for seg in self.segments)


def parse_answer(raw: str) -> GroundedAnswer:
    """Split a raw answer into verdict/correction/id segments.

    Total function: malformed id tokens are reported in diagnostics, never
    silently dropped or guessed at.
    """
    diagnostics = [
        f"malformed id token {tok!r}" for tok in find_malformed_tokens(raw)
    ]
    segments = []
    for clause in raw.split(";"):
        clause = clause.strip()
        verdict = "none"
        rest = clause
        match = _VERDICT_RE.match(clause)
        if match:
            verdict = match.group(1).lower()
            rest = clause[match.end():]
        ids = tuple(extract_ids(rest))
        correction = strip_id_tokens(rest).strip()
        # id removal can leave a dangling separator
        correction = correction.rstrip(",").rstrip()
        segments.append(
            AnswerSegment(verdict, correction or None, ids)
        )
    return GroundedAnswer(tuple(segments), raw, tuple(diagnostics))


# ---------------------------------------------------------------------------
# Text normalization and exact match


def normalize_text(text: str) -> str:
    """Lowercase, drop id tokens and punctuation, collapse whitespace."""
    text = _LOOSE_OBJ_RE.sub(" ", text)
    text = text.lower().translate(_PUNCT_TABLE)
    return " ".join(text.split())


@dataclass(frozen=True)
class MatchResult:
    em: bool
    em_r: bool


def exact_match(pred_text: str, gt_texts: Sequence[str]) -> MatchResult:
    """EM: normalized equality. EM-R: EM or a normalized gt inside pred."""
    if not gt_texts:
        raise ConfigError("exact_match needs at least one ground-truth text")
    pred = normalize_text(pred_text)
    gts = [normalize_text(t) for t in gt_texts]
    em = any(pred == gt for gt in gts)
    em_r = em or any(gt in pred for gt in gts)
    return MatchResult(em=em, em_r=em_r)


# ---------------------------------------------------------------------------
# Grounding metrics


def _boxes_for(ids, scene: SceneGraph, diagnostics: list, role: str):
    boxes = []
    for oid in ids:
        try:
            boxes.append(scene.object(oid).box)
        except KeyError:
            diagnostics.append(
                f"{role} id {oid} not in scene {scene.scene_id!r}"
            )
            boxes.append(None)
    return boxes


def _dedup(ids, diagnostics: list):
    seen, out = set(), []
    for oid in ids:
        if oid in seen:
            diagnostics.append(f"duplicate predicted id {oid} dropped")
            continue
        seen.add(oid)
        out.append(oid)
    return out


def accuracy_hit(
    pred_ids: Sequence[int],
    gt_id: int,
    scene: SceneGraph,
    threshold: float,
    diagnostics: list | None = None,
) -> bool:
    """Single-target rule: score the first predicted id, flag the rest."""
    diagnostics = diagnostics if diagnostics is not None else []
    if not pred_ids:
        return False
    if len(pred_ids) > 1:
        diagnostics.append(
            f"multi-id prediction on single-target sample; scoring first of "
            f"{list(pred_ids)}"
        )
    (pred_box,) = _boxes_for(pred_ids[:1], scene, diagnostics, "predicted")
    if pred_box is None:
        return False
    gt_box = scene.object(gt_id).box
    return iou(pred_box, gt_box) >= threshold


def grounding_accuracy(
    pred_ids_list: Sequence[Sequence[int]],
    gt_ids_list: Sequence[Sequence[int]],
    scenes: Sequence[SceneGraph],
    threshold: float,
) -> float:
    """Fraction of single-target samples whose predicted box clears IoU."""
    if not len(pred_ids_list) == len(gt_ids_list) == len(scenes):
        raise ConfigError("prediction, ground-truth, and scene lists must align")
    if not pred_ids_list:
        raise ConfigError("cannot score an empty evaluation set")
    hits = 0
    for pred_ids, gt_ids, scene in zip(pred_ids_list, gt_ids_list, scenes):
        if len(gt_ids) != 1:
            raise ConfigError(
                f"accuracy needs single-target ground truth, got {len(gt_ids)} ids"
            )
        hits += accuracy_hit(pred_ids, gt_ids[0], scene, threshold)
    return hits / len(pred_ids_list)


def sample_f1(
    pred_ids: Sequence[int],
    gt_ids: Sequence[int],
    scene: SceneGraph,
    threshold: float,
    matching: str = "greedy",
    diagnostics: list | None = None,
) -> float:
    """One sample's F1 under one-to-one box matching at an IoU threshold.

    Empty-vs-empty is a correct zero-target answer and scores 1.
    """
    diagnostics = diagnostics if diagnostics is not None else []
    pred_ids = _dedup(pred_ids, diagnostics)
    gt_ids = list(gt_ids)
    if not pred_ids and not gt_ids:
        return 1.0
    if not pred_ids or not gt_ids:
        return 0.0
    pred_boxes = _boxes_for(pred_ids, scene, diagnostics, "predicted")
    gt_boxes = _boxes_for(gt_ids, scene, diagnostics, "ground-truth")
    pairs = [
        (iou(p, g), i, j)
        for i, p in enumerate(pred_boxes) if p is not None
        for j, g in enumerate(gt_boxes) if g is not None
    ]
    tp = _match_count(pairs, threshold, matching)
    precision = tp / len(pred_ids)
    recall = tp / len(gt_ids)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _match_count(pairs, threshold: float, matching: str) -> int:
    if matching == "greedy":
        used_pred, used_gt, tp = set(), set(), 0
        # stable order: descending IoU, then lowest indexes
        for score, i, j in sorted(pairs, key=lambda t: (-t[0], t[1], t[2])):
            if score < threshold or i in used_pred or j in used_gt:
                continue
            used_pred.add(i)
            used_gt.add(j)
            tp += 1
        return tp
    if matching == "optimal":
        import numpy as np
        from scipy.optimize import linear_sum_assignment

        n_pred = max((i for _, i, _ in pairs), default=-1) + 1
        n_gt = max((j for _, _, j in pairs), default=-1) + 1
        if not n_pred or not n_gt:
            return 0
        cost = np.zeros((n_pred, n_gt))
        for score, i, j in pairs:
            cost[i, j] = -score
        rows, cols = linear_sum_assignment(cost)
        return int(sum(-cost[r, c] >= threshold for r, c in zip(rows, cols)))
    raise ConfigError(f"unknown matching strategy {matching!r}")


def grounding_f1(
    pred_ids_list: Sequence[Sequence[int]],
    gt_ids_list: Sequence[Sequence[int]],
    scenes: Sequence[SceneGraph],
    threshold: float,
    matching: str = "greedy",
) -> float:
    """Mean per-sample F1 over an evaluation set."""
    if not len(pred_ids_list) == len(gt_ids_list) == len(scenes):
        raise ConfigError("prediction, ground-truth, and scene lists must align")
    if not pred_ids_list:
        raise ConfigError("cannot score an empty evaluation set")
    total = sum(
        sample_f1(p, g, s, threshold, matching)
        for p, g, s in zip(pred_ids_list, gt_ids_list, scenes)
    )
    return total / len(pred_ids_list)


# ---------------------------------------------------------------------------
# Whole-set evaluation


@dataclass(frozen=True)
class EvalReport:
    """Aggregates plus the per-sample rows they were reduced from."""

    acc_at: Mapping[float, float]
    f1_at: Mapping[float, float]
    em: float
    em_r: float
    n_samples: int
    n_single_target: int
    rows: tuple[dict, ...]
    diagnostics: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "acc_at": {str(k): v for k, v in self.acc_at.items()},
            "f1_at": {str(k): v for k, v in self.f1_at.items()},
            "em": self.em,
            "em_r": self.em_r,
            "n_samples": self.n_samples,
            "n_single_target": self.n_single_target,
            "rows": list(self.rows),
            "diagnostics": list(self.diagnostics),
        }


def evaluate(
    samples,
    predictions: Mapping[str, str],
    scenes: Mapping[str, SceneGraph],
    thresholds: Sequence[float] = THRESHOLDS,
    matching: str = "greedy",
) -> EvalReport:
    """Score predicted answer texts against reference samples.

    Accuracy covers single-target samples only; F1 and EM/EM-R cover every
    sample. A sample without a prediction scores zero everywhere and is
    flagged in diagnostics.
    """
    if not samples:
        raise ConfigError("cannot evaluate an empty sample list")
    diagnostics: list[str] = []
    rows = []
    for sample in samples:
        scene = scenes.get(sample.scene_id)
        if scene is None:
            raise ConfigError(f"no scene {sample.scene_id!r} for {sample.sample_id}")
        pred_text = predictions.get(sample.sample_id)
        if pred_text is None:
            diagnostics.append(f"no prediction for {sample.sample_id}")
            pred_text = ""
        parsed = parse_answer(pred_text)
        diagnostics.extend(
            f"{sample.sample_id}: {note}" for note in parsed.diagnostics
        )
        pred_ids = list(parsed.ids)
        gt_ids = list(sample.answer_object_ids)
        row = {
            "sample_id": sample.sample_id,
            "task": sample.task,
            "n_gt": len(gt_ids),
            "acc": {},
            "f1": {},
        }
        sample_diags: list[str] = []
        for threshold in thresholds:
            if len(gt_ids) == 1:
                row["acc"][threshold] = float(
                    accuracy_hit(pred_ids, gt_ids[0], scene, threshold, sample_diags)
                )
            row["f1"][threshold] = sample_f1(
                pred_ids, gt_ids, scene, threshold, matching, sample_diags
            )
        match = exact_match(pred_text, [sample.answer])
        row["em"] = float(match.em)
        row["em_r"] = float(match.em_r)
        # per-threshold loops repeat the same complaints; keep one copy
        seen = set()
        for note in sample_diags:
            if note not in seen:
                seen.add(note)
                diagnostics.append(f"{sample.sample_id}: {note}")
        rows.append(row)

    single = [row for row in rows if row["n_gt"] == 1]
    acc_at = {
        t: sum(row["acc"][t] for row in single) / len(single) if single else 0.0
        for t in thresholds
    }
    f1_at = {
        t: sum(row["f1"][t] for row in rows) / len(rows) for t in thresholds
    }
    return EvalReport(
        acc_at=acc_at,
        f1_at=f1_at,
        em=sum(row["em"] for row in rows) / len(rows),
        em_r=sum(row["em_r"] for row in rows) / len(rows),
        n_samples=len(rows),
        n_single_target=len(single),
        rows=tuple(rows),
        diagnostics=tuple(diagnostics),
    )


def format_table(report: EvalReport) -> str:
    """Aligned plain-text summary, one metric per row."""
    lines = [
        f"{'metric':<12}{'value':>8}",
        f"{'-' * 20}",
    ]
    for threshold, value in sorted(report.acc_at.items()):
        lines.append(f"{f'acc@{threshold}':<12}{value:>8.4f}")
    for threshold, value in sorted(report.f1_at.items()):
        lines.append(f"{f'f1@{threshold}':<12}{value:>8.4f}")
    lines.append(f"{'em':<12}{report.em:>8.4f}")
    lines.append(f"{'em_r':<12}{report.em_r:>8.4f}")
    lines.append(f"{'samples':<12}{report.n_samples:>8d}")
    return "\n".join(lines)
