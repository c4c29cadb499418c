"""Deterministic generator and evaluation toolkit for robust 3D
instruction-following data.

The pieces compose in layers: scene/corpus loading, four adversarial
generators plus six transform families, an optional chat-backed rephrase
stage, token-sequence organization, a numerical projector reference, and
grounding/QA metrics. Everything that writes dataset bytes is seeded and
reproducible; `sceneinstruct.cli` ties the layers into one command.
"""

from .adversarial import GenConfig, gen_3dfqa, gen_hope, gen_hroc, gen_pf3dvg
from .compose import GenerationPlan, paper_mix, parse_quota_specs
from .corpus import Corpus, load_corpus, load_corpus_dir
from .dataset_io import read_dataset, read_manifest, validate_dataset, write_dataset
from .diverse import RephraseConfig, rephrase_samples, run_diverse_pipeline
from .errors import (
    BackendError,
    CompositionError,
    ConfigError,
    CorpusError,
    GenerationError,
    ProjectorError,
    SceneInstructError,
    SequenceError,
)
from .metrics import EvalReport, evaluate, parse_answer
from .pipeline import PipelineConfig, generate_dataset
from .projector import FeatureBatch, MlpParams, rap_forward
from .samples import InstructionSample
from .scenes import Aabb3, ObjectInstance, SceneGraph, iou
from .sequence import IdVocabulary, TokenSequence, VisionSlot, assemble
from .stats import StatsReport, compute_stats
from .synth import make_corpus

__version__ = "0.1.0"

__all__ = [
    "Aabb3",
    "BackendError",
    "CompositionError",
    "ConfigError",
    "Corpus",
    "CorpusError",
    "EvalReport",
    "FeatureBatch",
    "GenConfig",
    "GenerationError",
    "GenerationPlan",
    "IdVocabulary",
    "InstructionSample",
    "MlpParams",
    "ObjectInstance",
    "PipelineConfig",
    "ProjectorError",
    "RephraseConfig",
    "SceneGraph",
    "SceneInstructError",
    "SequenceError",
    "StatsReport",
    "TokenSequence",
    "VisionSlot",
    "assemble",
    "compute_stats",
    "evaluate",
    "gen_3dfqa",
    "gen_hope",
    "gen_hroc",
    "gen_pf3dvg",
    "generate_dataset",
    "iou",
    "load_corpus",
    "load_corpus_dir",
    "make_corpus",
    "paper_mix",
    "parse_answer",
    "parse_quota_specs",
    "rap_forward",
    "read_dataset",
    "read_manifest",
    "rephrase_samples",
    "run_diverse_pipeline",
    "validate_dataset",
    "write_dataset",
    "__version__",
]
