"""Command-line surface tying the data engine together.

Subcommands: generate, rephrase, validate, stats, eval, rap-check,
report, make-corpus. Exit codes: 0 success, 1 validation failures
present, 2 usage or config error, 3 backend transport failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chat import TEMPERATURES, HttpChatBackend, MockChatBackend, build_messages
from .compose import GenerationPlan, paper_mix, parse_quota_specs
from .config import (
    get_bool, get_float, get_int, get_str, load_config, merge_config,
)
from .adversarial import GenConfig
from .corpus import load_corpus_dir
from .dataset_io import (
    config_hash, read_dataset, read_manifest, manifest_path,
    validate_dataset, write_dataset,
)
from .diverse import RephraseConfig, rephrase_samples
from .errors import (
    BackendError, CompositionError, ConfigError, CorpusError,
    GenerationError, ProjectorError, SequenceError,
)
from .metrics import THRESHOLDS, evaluate, format_table
from .pipeline import PipelineConfig, generate_dataset
from .projector import (
    default_mlps, load_fixture, property_report, random_batch, rap_forward,
    write_fixture,
)
from .report import write_report
from .stats import compute_stats, format_stats_table
from .synth import make_corpus, write_corpus

RAP_TOLERANCES = {
    "row_norm_dev": 1e-9,
    "permutation_dev": 1e-12,
    "scale_invariance_dev": 1e-9,
    "rowwise_dev": 1e-12,
    "gelu_fd_dev": 1e-6,
}


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _load_source_corpus(values: dict):
    corpus_dir = get_str(values, "corpus", None)
    if corpus_dir:
        return load_corpus_dir(corpus_dir)
    return make_corpus(
        seed=get_int(values, "synth_seed", get_int(values, "seed", 0)),
        n_scenes=get_int(values, "synth_scenes", 60),
        n_categories=get_int(values, "synth_categories", 24),
    )


def _resolve_plan(values: dict) -> GenerationPlan:
    quota = values.get("quota")
    preset = get_str(values, "preset", None)
    if quota and preset:
        raise ConfigError("give either quota entries or a preset, not both")
    if quota:
        specs = quota if isinstance(quota, list) else str(quota).split(",")
        return parse_quota_specs([spec.strip() for spec in specs])
    if preset:
        if preset != "paper-mix":
            raise ConfigError(f"unknown preset {preset!r}")
        return paper_mix(scale=get_float(values, "scale", 1.0))
    raise ConfigError("no composition given: use --quota task=N or --preset paper-mix")


def _effective_config(values: dict, keys: tuple[str, ...]) -> dict:
    flat = {}
    for key in keys:
        value = values.get(key)
        if isinstance(value, list):
            value = ",".join(str(item) for item in value)
        flat[key] = "" if value is None else str(value)
    return flat


_GENERATE_KEYS = (
    "seed", "corpus", "preset", "scale", "quota", "rephrase", "rephrase_seed",
    "hope_negative_fraction", "hroc_negative_fraction", "fqa_negative_fraction",
    "synth_seed", "synth_scenes", "synth_categories",
)


def cmd_generate(args: argparse.Namespace) -> int:
    file_values = load_config(args.config) if args.config else {}
    values = merge_config(file_values, {
        "seed": args.seed,
        "out": args.out,
        "corpus": args.corpus,
        "preset": args.preset,
        "scale": args.scale,
        "quota": args.quota,
        "stamp": args.stamp,
        "rephrase": args.rephrase,
        "rephrase_seed": args.rephrase_seed,
        "hope_negative_fraction": args.hope_negative_fraction,
        "hroc_negative_fraction": args.hroc_negative_fraction,
        "fqa_negative_fraction": args.fqa_negative_fraction,
        "synth_seed": args.synth_seed,
        "synth_scenes": args.synth_scenes,
        "synth_categories": args.synth_categories,
    })
    out = get_str(values, "out", None)
    if not out:
        raise ConfigError("an output path is required (--out or out= in the config)")
    seed = get_int(values, "seed", 0)
    plan = _resolve_plan(values)
    corpus = _load_source_corpus(values)

    gen = GenConfig(
        hope_negative_fraction=get_float(values, "hope_negative_fraction", 0.5),
        hroc_negative_fraction=get_float(values, "hroc_negative_fraction", 0.5),
        fqa_negative_fraction=get_float(values, "fqa_negative_fraction", 0.5),
    )
    mode = get_str(values, "rephrase", "none")
    if mode not in ("none", "mock"):
        raise ConfigError(f"generate supports rephrase none|mock, got {mode!r}")
    rephrase_seed = get_int(values, "rephrase_seed", seed)
    cfg = PipelineConfig(
        seed=seed, gen=gen,
        rephrase=RephraseConfig(seed=rephrase_seed, enabled=mode == "mock"),
    )
    client = MockChatBackend(seed=rephrase_seed) if mode == "mock" else None

    samples = generate_dataset(corpus, plan, cfg, client=client)
    manifest = write_dataset(
        samples, out, seed=seed,
        config_digest=config_hash(_effective_config(values, _GENERATE_KEYS)),
        corpus_hashes=corpus.file_hashes,
        stamp=get_bool(values, "stamp", False),
    )
    print(f"wrote {manifest['total']} samples to {out}")
    for task in sorted(manifest["counts"]):
        print(f"  {task}  {manifest['counts'][task]}")
    return 0


def cmd_rephrase(args: argparse.Namespace) -> int:
    samples = read_dataset(args.dataset)
    if args.backend == "mock":
        client = MockChatBackend(
            seed=args.seed,
            marker_dropout=args.mock_dropout,
            transport_failure=args.mock_transport,
        )
    else:
        overrides = {}
        if args.endpoint:
            overrides["endpoint"] = args.endpoint
        if args.model:
            overrides["model"] = args.model
        client = HttpChatBackend.from_env(**overrides)
        # A dead endpoint must abort with the transport exit code, not
        # silently write a fallback copy of the input.
        client.complete(
            build_messages(
                "You rewrite sentences.",
                "sentence=ping\nrephrase=ping",
                "sentence=preflight",
            ),
            TEMPERATURES[0],
        )
    cfg = RephraseConfig(
        seed=args.seed,
        max_attempts=args.max_attempts,
        max_workers=args.max_workers,
        tasks=tuple(args.tasks.split(",")) if args.tasks else RephraseConfig().tasks,
    )
    rephrased = rephrase_samples(samples, client, cfg)

    corpus_hashes = {}
    if manifest_path(args.dataset).exists():
        corpus_hashes = read_manifest(args.dataset).get("corpus_hashes", {})
    write_dataset(
        rephrased, args.out, seed=args.seed,
        config_digest=config_hash({
            "backend": args.backend, "seed": args.seed,
            "max_attempts": args.max_attempts, "tasks": args.tasks or "",
        }),
        corpus_hashes=corpus_hashes, stamp=args.stamp,
    )
    changed = sum(
        1 for before, after in zip(samples, rephrased)
        if before.question != after.question or before.answer != after.answer
    )
    print(f"rephrased {changed} of {len(samples)} samples into {args.out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    scenes = None
    if args.corpus:
        scenes = load_corpus_dir(args.corpus).scenes
    violations = validate_dataset(args.dataset, scenes=scenes)
    for violation in violations:
        print(violation)
    if violations:
        print(f"{len(violations)} violations")
        return 1
    print("ok")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    samples = read_dataset(args.dataset)
    manifest = None
    if manifest_path(args.dataset).exists():
        manifest = read_manifest(args.dataset)
    report = compute_stats(samples, manifest=manifest, top_words=args.top_words)
    if args.json:
        print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    else:
        print(format_stats_table(report, top_words=args.top_words))
    return 0


def _load_predictions(path: str | Path) -> dict[str, str]:
    """Predictions as {"id": "answer"} JSON or JSONL records with those keys."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    try:
        if stripped.startswith("{") and "\n{" not in stripped:
            obj = json.loads(text)
            if not isinstance(obj, dict):
                raise ConfigError(f"{path}: predictions must map sample id to text")
            if set(obj) == {"sample_id", "answer"}:
                return {str(obj["sample_id"]): str(obj["answer"])}
            return {str(k): str(v) for k, v in obj.items()}
        out = {}
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if not isinstance(record, dict) or "sample_id" not in record \
                    or "answer" not in record:
                raise ConfigError(
                    f"{path}:{line_no}: expected sample_id and answer keys"
                )
            out[str(record["sample_id"])] = str(record["answer"])
        return out
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err.msg}") from err


def cmd_eval(args: argparse.Namespace) -> int:
    samples = read_dataset(args.dataset)
    predictions = _load_predictions(args.predictions)
    scenes = load_corpus_dir(args.corpus).scenes
    report = evaluate(
        samples, predictions, scenes,
        thresholds=tuple(args.threshold) if args.threshold else THRESHOLDS,
        matching=args.matching,
    )
    if args.json:
        print(json.dumps(report.to_json(), sort_keys=True, indent=2))
    else:
        print(format_table(report))
    return 0


def cmd_rap_check(args: argparse.Namespace) -> int:
    if args.fixture:
        batch, mlp_main, mlp_pos = load_fixture(args.fixture)
    else:
        batch = random_batch(args.rows, seed=args.seed)
        mlp_main, mlp_pos = default_mlps(seed=args.seed)
    if args.write_fixture:
        write_fixture(args.write_fixture, batch, mlp_main, mlp_pos)
    if args.out:
        projected = rap_forward(batch, mlp_main, mlp_pos)
        Path(args.out).write_text(
            json.dumps({"x_rap": projected.tolist()}, indent=2) + "\n",
            encoding="utf-8",
        )
    results = property_report(batch, mlp_main, mlp_pos, seed=args.seed)
    failures = 0
    print(f"rows {results['rows']}  cols {results['cols']}")
    for key, bound in RAP_TOLERANCES.items():
        value = results[key]
        ok = value < bound
        failures += not ok
        print(f"{key:22s} {value:.3e}  (< {bound:.0e})  {'PASS' if ok else 'FAIL'}")
    return 1 if failures else 0


def cmd_report(args: argparse.Namespace) -> int:
    samples = read_dataset(args.dataset)
    manifest = None
    if manifest_path(args.dataset).exists():
        manifest = read_manifest(args.dataset)
    stats = compute_stats(samples, manifest=manifest, top_words=args.top_words)
    paths = write_report(stats, args.out_dir, top_words=args.top_words)
    for path in paths:
        print(path)
    return 0


def cmd_make_corpus(args: argparse.Namespace) -> int:
    corpus = make_corpus(
        seed=args.seed, n_scenes=args.scenes, n_categories=args.categories,
        refs_per_scene=args.refs_per_scene, qa_per_scene=args.qa_per_scene,
    )
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus.scenes)} scenes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneinstruct",
        description="Deterministic robust-instruction data engine and evaluator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset from a corpus")
    p.add_argument("--out", help="dataset output path (.jsonl)")
    p.add_argument("--corpus", help="corpus directory; omitted = synthetic corpus")
    p.add_argument("--config", help="KEY=VALUE config file; flags win")
    p.add_argument("--seed", type=int, help="generation seed (default 0)")
    p.add_argument("--preset", choices=["paper-mix"], help="composition preset")
    p.add_argument("--scale", type=float, help="preset scale factor (default 1.0)")
    p.add_argument("--quota", action="append", metavar="TASK=N",
                   help="explicit per-task quota, repeatable")
    p.add_argument("--stamp", action="store_const", const=True, default=None,
                   help="record wall-clock generation time in the manifest")
    p.add_argument("--rephrase", choices=["none", "mock"],
                   help="rephrase during generation (default none)")
    p.add_argument("--rephrase-seed", type=int, help="seed for the rephrase stream")
    p.add_argument("--hope-negative-fraction", type=float)
    p.add_argument("--hroc-negative-fraction", type=float)
    p.add_argument("--fqa-negative-fraction", type=float)
    p.add_argument("--synth-seed", type=int, help="synthetic corpus seed")
    p.add_argument("--synth-scenes", type=int, help="synthetic corpus scene count")
    p.add_argument("--synth-categories", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("rephrase", help="rephrase an existing dataset")
    p.add_argument("dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["mock", "http"], default="mock")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=3)
    p.add_argument("--max-workers", type=int, default=4)
    p.add_argument("--tasks", help="comma-separated task names to rephrase")
    p.add_argument("--endpoint", help="chat endpoint (http backend)")
    p.add_argument("--model", help="chat model name (http backend)")
    p.add_argument("--mock-dropout", type=float, default=0.0,
                   help="mock backend marker dropout rate")
    p.add_argument("--mock-transport", type=float, default=0.0,
                   help="mock backend transport failure rate")
    p.add_argument("--stamp", action="store_true")
    p.set_defaults(func=cmd_rephrase)

    p = sub.add_parser("validate", help="check a dataset file and its manifest")
    p.add_argument("dataset")
    p.add_argument("--corpus", help="corpus directory for scene-aware id checks")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="sentence lengths and word frequencies")
    p.add_argument("dataset")
    p.add_argument("--top-words", type=int, default=50)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score predictions against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True,
                   help="JSON {id: text} or JSONL with sample_id/answer")
    p.add_argument("--corpus", required=True, help="corpus directory with scenes")
    p.add_argument("--threshold", type=float, action="append",
                   help="IoU threshold, repeatable (default 0.25 and 0.5)")
    p.add_argument("--matching", choices=["greedy", "optimal"], default="greedy")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rap-check", help="run the projector reference checks")
    p.add_argument("--fixture", help="fixture JSON; omitted = seeded random batch")
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-fixture", help="write the batch and weights used")
    p.add_argument("--out", help="write the projected matrix as JSON")
    p.set_defaults(func=cmd_rap_check)

    p = sub.add_parser("report", help="stats tables plus rendered figures")
    p.add_argument("dataset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top-words", type=int, default=20)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("make-corpus", help="write a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int, default=60)
    p.add_argument("--categories", type=int, default=24)
    p.add_argument("--refs-per-scene", type=int, default=3)
    p.add_argument("--qa-per-scene", type=int, default=2)
    p.set_defaults(func=cmd_make_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendError as err:
        _fail(str(err))
        return 3
    except (CompositionError, ConfigError, CorpusError, GenerationError,
            ProjectorError, SequenceError) as err:
        _fail(str(err))
        return 2
    except OSError as err:
        _fail(str(err))
        return 2


if __name__ == "__main__":
    sys.exit(main())
