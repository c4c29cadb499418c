"""The instruction sample record and the task taxonomy.

An InstructionSample is one question/answer pair tied to a scene, with the
object ids cited by each side listed explicitly so downstream consumers
never have to re-parse the text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .errors import GenerationError
from .scenes import SceneGraph
from .tokens import extract_ids, find_malformed_tokens

ADVERSARIAL_TASKS = ("hope", "hroc", "pf3dvg", "fqa3d")
DIVERSE_TASKS = (
    "diverse_category_qa",
    "diverse_nr3d_caption",
    "diverse_appearance",
    "diverse_region",
    "diverse_nr3d_grounding",
    "diverse_sr3d_grounding",
)
BENCHMARK_TASKS = (
    "benchmark_scanrefer",
    "benchmark_multi3drefer",
    "benchmark_scanqa",
)

TASK_GROUPS: dict[str, tuple[str, ...]] = {
    "adversarial": ADVERSARIAL_TASKS,
    "diverse": DIVERSE_TASKS,
    "benchmark": BENCHMARK_TASKS,
}

ALL_TASKS = ADVERSARIAL_TASKS + DIVERSE_TASKS + BENCHMARK_TASKS

_GROUP_OF = {task: group for group, tasks in TASK_GROUPS.items() for task in tasks}


def task_group(task: str) -> str:
    try:
        return _GROUP_OF[task]
    except KeyError:
        raise GenerationError(f"unknown task {task!r}") from None


@dataclass(frozen=True)
class InstructionSample:
    """One generated question/answer pair over a scene."""

    sample_id: str
    task: str
    scene_id: str
    question: str
    answer: str
    question_object_ids: tuple[int, ...]
    answer_object_ids: tuple[int, ...]
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "question_object_ids", tuple(self.question_object_ids)
        )
        object.__setattr__(
            self, "answer_object_ids", tuple(self.answer_object_ids)
        )

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task": self.task,
            "scene_id": self.scene_id,
            "question": self.question,
            "answer": self.answer,
            "question_object_ids": list(self.question_object_ids),
            "answer_object_ids": list(self.answer_object_ids),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "InstructionSample":
        missing = [
            k
            for k in (
                "sample_id",
                "task",
                "scene_id",
                "question",
                "answer",
                "question_object_ids",
                "answer_object_ids",
            )
            if k not in obj
        ]
        if missing:
            raise GenerationError(f"sample missing fields: {', '.join(missing)}")
        return cls(
            sample_id=obj["sample_id"],
            task=obj["task"],
            scene_id=obj["scene_id"],
            question=obj["question"],
            answer=obj["answer"],
            question_object_ids=tuple(obj["question_object_ids"]),
            answer_object_ids=tuple(obj["answer_object_ids"]),
            meta=dict(obj.get("meta", {})),
        )


def sample_problems(sample: InstructionSample, scene: SceneGraph | None) -> list[str]:
    """Consistency violations in one sample; empty list means valid.

    Checks the id contract: every id token in the text is declared in the
    matching id list, every declared id exists in the scene, and no
    malformed near-miss tokens slipped through.
    """
    problems = []
    if sample.task not in ALL_TASKS:
        problems.append(f"unknown task {sample.task!r}")
    if not sample.sample_id:
        problems.append("empty sample_id")
    for side, text, declared in (
        ("question", sample.question, sample.question_object_ids),
        ("answer", sample.answer, sample.answer_object_ids),
    ):
        for bad in find_malformed_tokens(text):
            problems.append(f"{side} contains malformed id token {bad!r}")
        declared_set = set(declared)
        for oid in extract_ids(text):
            if oid not in declared_set:
                problems.append(
                    f"{side} text cites object {oid} missing from"
                    f" {side}_object_ids"
                )
        if scene is not None:
            for oid in declared:
                if not scene.has_object(oid):
                    problems.append(
                        f"{side}_object_ids lists object {oid} not in scene"
                        f" {sample.scene_id!r}"
                    )
    if scene is not None and scene.scene_id != sample.scene_id:
        problems.append(
            f"sample scene_id {sample.scene_id!r} does not match scene"
            f" {scene.scene_id!r}"
        )
    return problems


def validate_sample(sample: InstructionSample, scene: SceneGraph | None = None):
    """Raise GenerationError on the first inconsistency; return the sample."""
    problems = sample_problems(sample, scene)
    if problems:
        raise GenerationError(
            f"invalid sample {sample.sample_id!r}: " + "; ".join(problems)
        )
    return sample
