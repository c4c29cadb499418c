"""Diverse-data transforms and the chat rephrasing pipeline.

Six pure transforms turn corpus records into instruction samples; an
optional rephrase stage rewrites the natural-language side of eligible
tasks through a chat backend while provably preserving which objects are
cited. Prompts are data files; three tasks inherit their one-shot example
from the task they were constructed from.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .adversarial import FQA_SUFFIX
from .chat import (
    ChatBackend,
    RephraseRequest,
    draw_temperature,
    rephrase,
)
from .corpus import CaptionRecord, Corpus, QaRecord, Sr3dReference
from .errors import ConfigError, GenerationError
from .rngs import derive_rng
from .samples import InstructionSample, validate_sample
from .scenes import SceneGraph, instances_of
from .tokens import extract_ids, id_token, indefinite, join_id_tokens

# task tag -> prompt file base; three tasks inherit the base of the task
# their records were constructed from, so they ship no file of their own
REPHRASE_PROMPT_OF: Mapping[str, str] = {
    "benchmark_scanrefer": "scanrefer",
    "benchmark_multi3drefer": "multi3drefer",
    "diverse_nr3d_grounding": "nr3d",
    "diverse_sr3d_grounding": "sr3d_plus",
    "diverse_nr3d_caption": "nr3d",
    "benchmark_scanqa": "scanqa",
    "pf3dvg": "sr3d_plus",
    "fqa3d": "scanqa",
}

PROMPT_BASES = ("scanrefer", "multi3drefer", "nr3d", "sr3d_plus", "scanqa", "sqa3d")

# the captioning task carries its language in the answer; everything else
# carries it in the question
_ANSWER_SIDE_TASKS = frozenset({"diverse_nr3d_caption"})


def load_prompt(base: str, prompt_dir: str | Path | None = None) -> tuple[str, str]:
    """(system, one_shot) prompt pair for a prompt base name."""
    names = (f"{base}.system.txt", f"{base}.oneshot.txt")
    out = []
    for name in names:
        if prompt_dir is not None:
            path = Path(prompt_dir) / name
            if not path.is_file():
                raise ConfigError(f"missing prompt file {path}")
            out.append(path.read_text(encoding="utf-8").strip())
        else:
            ref = resources.files("sceneinstruct").joinpath(f"data/prompts/{name}")
            if not ref.is_file():
                raise ConfigError(f"missing packaged prompt file {name}")
            out.append(ref.read_text(encoding="utf-8").strip())
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Pure transforms


def _require_kind(record: CaptionRecord, kind: str):
    if record.kind != kind:
        raise GenerationError(
            f"record kind {record.kind!r} cannot feed the {kind!r} transform"
        )


def transform_category_qa(
    record: CaptionRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Ask for the category of an id-addressed object."""
    _require_kind(record, "category_qa")
    category = scene.object(record.object_id).category
    sample = InstructionSample(
        sample_id=f"diverse_category_qa-{scene.scene_id}-{sample_index:06d}",
        task="diverse_category_qa",
        scene_id=scene.scene_id,
        question=f"What is the category of {id_token(record.object_id)}?",
        answer=f"It is {indefinite(category)}.",
        question_object_ids=(record.object_id,),
        answer_object_ids=(),
        meta={},
    )
    return validate_sample(sample, scene)


def _caption_transform(
    task: str,
    question_template: str,
    record: CaptionRecord,
    scene: SceneGraph,
    sample_index: int,
) -> InstructionSample:
    sample = InstructionSample(
        sample_id=f"{task}-{scene.scene_id}-{sample_index:06d}",
        task=task,
        scene_id=scene.scene_id,
        question=question_template.format(token=id_token(record.object_id)),
        answer=record.text,
        question_object_ids=(record.object_id,),
        answer_object_ids=tuple(extract_ids(record.text)),
        meta={},
    )
    return validate_sample(sample, scene)


def transform_nr3d_caption(
    record: CaptionRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Caption the spatial relation of an object to its neighborhood."""
    _require_kind(record, "nr3d_caption")
    return _caption_transform(
        "diverse_nr3d_caption",
        "Describe the spatial relation of {token} to the objects around it.",
        record, scene, sample_index,
    )


def transform_appearance(
    record: CaptionRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Caption physical attributes and visual characteristics."""
    _require_kind(record, "appearance")
    return _caption_transform(
        "diverse_appearance",
        "Describe the appearance of {token}.",
        record, scene, sample_index,
    )


def transform_region(
    record: CaptionRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Caption the region encircling an object."""
    _require_kind(record, "region")
    return _caption_transform(
        "diverse_region",
        "Describe the region surrounding {token}.",
        record, scene, sample_index,
    )


def transform_nr3d_grounding(
    record: CaptionRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """End-to-end grounding from a free-form description; no candidates given."""
    _require_kind(record, "nr3d_caption")
    sample = InstructionSample(
        sample_id=f"diverse_nr3d_grounding-{scene.scene_id}-{sample_index:06d}",
        task="diverse_nr3d_grounding",
        scene_id=scene.scene_id,
        question=record.text,
        answer=id_token(record.object_id),
        question_object_ids=tuple(extract_ids(record.text)),
        answer_object_ids=(record.object_id,),
        meta={},
    )
    return validate_sample(sample, scene)


def transform_sr3d_grounding(
    record: Sr3dReference, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """End-to-end grounding from a templated reference; no candidates given."""
    sample = InstructionSample(
        sample_id=f"diverse_sr3d_grounding-{scene.scene_id}-{sample_index:06d}",
        task="diverse_sr3d_grounding",
        scene_id=scene.scene_id,
        question=record.surface_text,
        answer=id_token(record.target_id),
        question_object_ids=(),
        answer_object_ids=(record.target_id,),
        meta={"relation": record.relation},
    )
    return validate_sample(sample, scene)


# benchmark-styled transforms: the original finetune formats


def transform_scanrefer(
    record: Sr3dReference, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    sample = InstructionSample(
        sample_id=f"benchmark_scanrefer-{scene.scene_id}-{sample_index:06d}",
        task="benchmark_scanrefer",
        scene_id=scene.scene_id,
        question=f"Find the object that matches this description: {record.surface_text}.",
        answer=id_token(record.target_id),
        question_object_ids=(),
        answer_object_ids=(record.target_id,),
        meta={},
    )
    return validate_sample(sample, scene)


def transform_multi3drefer(
    category: str, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Multi-object grounding; absent categories make zero-target samples."""
    ids = instances_of(scene, category) if category in set(scene.categories()) else ()
    sample = InstructionSample(
        sample_id=f"benchmark_multi3drefer-{scene.scene_id}-{sample_index:06d}",
        task="benchmark_multi3drefer",
        scene_id=scene.scene_id,
        question=f"Find all instances of the {category} in the scene.",
        answer=join_id_tokens(ids) if ids else "No",
        question_object_ids=(),
        answer_object_ids=tuple(ids),
        meta={"zero_target": not ids},
    )
    return validate_sample(sample, scene)


def transform_scanqa(
    record: QaRecord, scene: SceneGraph, sample_index: int = 0
) -> InstructionSample:
    """Plain QA without a grounding requirement."""
    sample = InstructionSample(
        sample_id=f"benchmark_scanqa-{scene.scene_id}-{sample_index:06d}",
        task="benchmark_scanqa",
        scene_id=scene.scene_id,
        question=record.question,
        answer=record.answer,
        question_object_ids=tuple(extract_ids(record.question)),
        answer_object_ids=tuple(extract_ids(record.answer)),
        meta={},
    )
    return validate_sample(sample, scene)


# ---------------------------------------------------------------------------
# Rephrasing


@dataclass(frozen=True)
class RephraseConfig:
    seed: int = 0
    enabled: bool = True
    max_attempts: int = 3
    max_workers: int = 4
    prompt_dir: str | None = None
    tasks: tuple[str, ...] = tuple(sorted(REPHRASE_PROMPT_OF))

    def __post_init__(self):
        if self.max_attempts < 1 or self.max_workers < 1:
            raise ConfigError("max_attempts and max_workers must be >= 1")
        unknown = set(self.tasks) - set(REPHRASE_PROMPT_OF)
        if unknown:
            raise ConfigError(
                f"tasks not eligible for rephrasing: {', '.join(sorted(unknown))}"
            )


def _rephrasable_text(sample: InstructionSample) -> tuple[str, str]:
    """(side, text) of the sentence the rephraser may rewrite."""
    if sample.task in _ANSWER_SIDE_TASKS:
        return "answer", sample.answer
    if sample.task == "fqa3d":
        # the appended mandate is a fixed contract marker; only the original
        # question ahead of it is free text
        return "question", sample.question[: -len(FQA_SUFFIX)].rstrip()
    return "question", sample.question


def _apply_rephrased(sample: InstructionSample, side: str, text: str,
                     meta_extra: dict) -> InstructionSample:
    question, answer = sample.question, sample.answer
    if side == "answer":
        answer = text
    elif sample.task == "fqa3d":
        question = f"{text} {FQA_SUFFIX}"
    else:
        question = text
    return InstructionSample(
        sample_id=sample.sample_id,
        task=sample.task,
        scene_id=sample.scene_id,
        question=question,
        answer=answer,
        question_object_ids=sample.question_object_ids,
        answer_object_ids=sample.answer_object_ids,
        meta={**sample.meta, **meta_extra},
    )


def rephrase_samples(
    samples: Sequence[InstructionSample],
    client: ChatBackend,
    cfg: RephraseConfig = RephraseConfig(),
) -> list[InstructionSample]:
    """Rephrase the eligible subset of samples, preserving cited ids.

    Requests run concurrently but results are re-sequenced by input index,
    and each sample's temperature comes from its own derived stream, so
    output is independent of scheduling.
    """
    prompts = {
        task: load_prompt(REPHRASE_PROMPT_OF[task], cfg.prompt_dir)
        for task in cfg.tasks
    }

    def work(item: tuple[int, InstructionSample]):
        index, sample = item
        if sample.task not in prompts or not cfg.enabled:
            return index, sample
        side, text = _rephrasable_text(sample)
        rng = derive_rng(cfg.seed, "rephrase", sample.sample_id)
        system_prompt, one_shot = prompts[sample.task]
        req = RephraseRequest(
            system_prompt=system_prompt,
            one_shot=one_shot,
            payload=f"sentence={text}",
            temperature=draw_temperature(rng),
            task=sample.task,
        )
        result = rephrase(
            req, client, max_attempts=cfg.max_attempts,
            required_ids=tuple(extract_ids(text)),
        )
        updated = _apply_rephrased(
            sample, side, result.rephrased,
            {
                "rephrased": not result.fallback,
                "temperature": result.temperature,
                "backend": result.backend,
                "rephrase_attempts": result.attempts,
            },
        )
        return index, validate_sample(updated)

    indexed = list(enumerate(samples))
    if cfg.max_workers == 1:
        results = [work(item) for item in indexed]
    else:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            results = list(pool.map(work, indexed))
    return [sample for _, sample in sorted(results, key=lambda pair: pair[0])]


# ---------------------------------------------------------------------------
# One-pass pipeline over a corpus


def run_diverse_pipeline(
    corpus: Corpus,
    client: ChatBackend | None = None,
    cfg: RephraseConfig = RephraseConfig(),
) -> list[InstructionSample]:
    """Transform every eligible corpus record once, then optionally rephrase.

    Record order is deterministic: tasks in a fixed order, records in
    corpus order within each task. Rephrasing runs only when a client is
    given and cfg.enabled is true.
    """
    samples: list[InstructionSample] = []
    counters: dict[str, int] = {}

    def emit(build, *args):
        task_scene = args[-1].scene_id
        # per-(task, scene) running index keeps sample ids unique
        key = f"{build.__name__}:{task_scene}"
        idx = counters.get(key, 0)
        counters[key] = idx + 1
        samples.append(build(*args, sample_index=idx))

    for record in corpus.captions:
        scene = corpus.scenes[record.scene_id]
        if record.kind == "category_qa":
            emit(transform_category_qa, record, scene)
        elif record.kind == "nr3d_caption":
            emit(transform_nr3d_caption, record, scene)
            emit(transform_nr3d_grounding, record, scene)
        elif record.kind == "appearance":
            emit(transform_appearance, record, scene)
        elif record.kind == "region":
            emit(transform_region, record, scene)
    for record in corpus.references:
        scene = corpus.scenes[record.scene_id]
        emit(transform_sr3d_grounding, record, scene)

    if client is not None and cfg.enabled:
        samples = rephrase_samples(samples, client, cfg)
    return samples
