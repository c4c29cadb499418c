"""End-to-end generation: corpus + plan -> validated sample list.

Each sample draws from its own stream keyed by (seed, task, scene_id,
index), so any subset of tasks regenerates identically and output never
depends on generation order. Scenes and records are reused cyclically
when a quota exceeds the corpus size; a task is infeasible only when its
eligible pool is empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .adversarial import GenConfig, gen_3dfqa, gen_hope, gen_hroc, gen_pf3dvg
from .chat import ChatBackend
from .compose import GenerationPlan
from .corpus import Corpus
from .diverse import (
    RephraseConfig,
    rephrase_samples,
    transform_appearance,
    transform_category_qa,
    transform_multi3drefer,
    transform_nr3d_caption,
    transform_nr3d_grounding,
    transform_region,
    transform_scanqa,
    transform_scanrefer,
    transform_sr3d_grounding,
)
from .errors import CompositionError
from .rngs import derive_rng
from .samples import InstructionSample
from .scenes import SceneGraph, has_distractors


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    gen: GenConfig = field(default_factory=GenConfig)
    rephrase: RephraseConfig = field(default_factory=RephraseConfig)


# caption-fed tasks: record kind consumed and the transform applied
_CAPTION_DRIVERS: dict[str, tuple[str, Callable]] = {
    "diverse_category_qa": ("category_qa", transform_category_qa),
    "diverse_nr3d_caption": ("nr3d_caption", transform_nr3d_caption),
    "diverse_nr3d_grounding": ("nr3d_caption", transform_nr3d_grounding),
    "diverse_appearance": ("appearance", transform_appearance),
    "diverse_region": ("region", transform_region),
}


def _sorted_scenes(corpus: Corpus) -> list[SceneGraph]:
    return [corpus.scenes[key] for key in sorted(corpus.scenes)]


def hope_eligible(corpus: Corpus, cfg: GenConfig) -> list[SceneGraph]:
    pool = set(corpus.category_pool())
    scenes = _sorted_scenes(corpus)
    if cfg.hope_negative_fraction == 0.0:
        return [s for s in scenes if s.objects]
    return [s for s in scenes if s.objects and pool - set(s.categories())]


def hroc_eligible(corpus: Corpus) -> list[SceneGraph]:
    return [s for s in _sorted_scenes(corpus) if len(s.categories()) >= 2]


def pf3dvg_eligible(corpus: Corpus) -> list[SceneGraph]:
    """Scenes where every PF branch is guaranteed satisfiable.

    Conservative: the generator picks references uniformly inside a
    branch, so each candidate reference must itself be usable, not merely
    one of them.
    """
    lexicon = corpus.lexicon
    refs = corpus.references
    out = []
    for scene in _sorted_scenes(corpus):
        cats = set(scene.categories())
        if not any(r.target_category not in cats for r in refs):
            continue
        same = [r for r in refs if r.scene_id == scene.scene_id]
        if not same:
            continue
        partial = [r for r in same if not has_distractors(scene, r.target_id)]
        if not partial:
            continue
        if not all(lexicon.swap_candidates(r.relation) for r in partial):
            continue
        factual_ok = all(
            any(
                s != lexicon.find_form(r.relation, r.surface_text)
                for s in lexicon.synonyms(r.relation)
            )
            for r in same
        )
        if factual_ok:
            out.append(scene)
    return out


def _require_pool(task: str, quota: int, pool_size: int, what: str):
    if quota > 0 and pool_size == 0:
        raise CompositionError(
            f"task {task!r} quota {quota} unmet: no eligible {what} in the "
            f"corpus (achievable maximum 0)"
        )


def generate_task(
    corpus: Corpus,
    task: str,
    quota: int,
    cfg: PipelineConfig,
) -> list[InstructionSample]:
    """All samples for one task, each from its own derived stream."""
    seed = cfg.seed
    gen_cfg = cfg.gen
    samples: list[InstructionSample] = []

    if task == "hope":
        pool = sorted(corpus.category_pool())
        scenes = hope_eligible(corpus, gen_cfg)
        _require_pool(task, quota, len(scenes), "scene")
        for i in range(quota):
            scene = scenes[i % len(scenes)]
            rng = derive_rng(seed, "hope", scene.scene_id, i)
            samples.append(gen_hope(scene, pool, gen_cfg, rng, i))
    elif task == "hroc":
        scenes = hroc_eligible(corpus)
        _require_pool(task, quota, len(scenes), "scene")
        for i in range(quota):
            scene = scenes[i % len(scenes)]
            rng = derive_rng(seed, "hroc", scene.scene_id, i)
            samples.append(gen_hroc(scene, gen_cfg, rng, i))
    elif task == "pf3dvg":
        scenes = pf3dvg_eligible(corpus)
        _require_pool(task, quota, len(scenes), "scene")
        for i in range(quota):
            scene = scenes[i % len(scenes)]
            rng = derive_rng(seed, "pf3dvg", scene.scene_id, i)
            samples.append(
                gen_pf3dvg(scene, corpus.references, corpus.lexicon, gen_cfg, rng, i)
            )
    elif task == "fqa3d":
        scenes = _sorted_scenes(corpus)
        _require_pool(task, quota, len(scenes), "scene")
        _require_pool(task, quota, len(corpus.qa), "QA record")
        for i in range(quota):
            rng = derive_rng(seed, "fqa3d", "pool", i)
            samples.append(gen_3dfqa(scenes, corpus.qa, gen_cfg, rng, i))
    elif task in _CAPTION_DRIVERS:
        kind, transform = _CAPTION_DRIVERS[task]
        records = [r for r in corpus.captions if r.kind == kind]
        _require_pool(task, quota, len(records), f"{kind} caption record")
        for i in range(quota):
            record = records[i % len(records)]
            samples.append(transform(record, corpus.scenes[record.scene_id], i))
    elif task in ("diverse_sr3d_grounding", "benchmark_scanrefer"):
        transform = (
            transform_sr3d_grounding
            if task == "diverse_sr3d_grounding"
            else transform_scanrefer
        )
        refs = corpus.references
        _require_pool(task, quota, len(refs), "reference")
        for i in range(quota):
            ref = refs[i % len(refs)]
            samples.append(transform(ref, corpus.scenes[ref.scene_id], i))
    elif task == "benchmark_multi3drefer":
        pairs = [
            (scene, category)
            for scene in _sorted_scenes(corpus)
            for category in sorted(corpus.category_pool())
        ]
        _require_pool(task, quota, len(pairs), "scene/category pair")
        for i in range(quota):
            scene, category = pairs[i % len(pairs)]
            samples.append(transform_multi3drefer(category, scene, i))
    elif task == "benchmark_scanqa":
        records = corpus.qa
        _require_pool(task, quota, len(records), "QA record")
        for i in range(quota):
            record = records[i % len(records)]
            samples.append(
                transform_scanqa(record, corpus.scenes[record.scene_id], i)
            )
    else:
        raise CompositionError(f"no driver for task {task!r}")
    return samples


def generate_dataset(
    corpus: Corpus,
    plan: GenerationPlan,
    cfg: PipelineConfig = PipelineConfig(),
    client: ChatBackend | None = None,
) -> list[InstructionSample]:
    """Generate the planned mix, optionally rephrased, in canonical order."""
    samples: list[InstructionSample] = []
    for task in sorted(plan.quotas):
        samples.extend(generate_task(corpus, task, plan.quotas[task], cfg))
    samples.sort(key=lambda s: (s.task, s.scene_id, s.sample_id))
    if client is not None and cfg.rephrase.enabled:
        samples = rephrase_samples(samples, client, cfg.rephrase)
    return samples
