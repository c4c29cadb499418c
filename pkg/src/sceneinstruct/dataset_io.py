"""Dataset serialization: JSON-lines samples plus a manifest sidecar.

Lines are compact JSON with sorted keys and ASCII escapes, so a fixed
sample list always serializes to identical bytes. The manifest records
per-task counts, proportions, the seed given, a config hash, and corpus
content hashes; its timestamp is null unless explicitly stamped, keeping
repeated runs byte-comparable.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .errors import CorpusError
from .samples import InstructionSample, sample_problems

DATASET_KEYS = (
    "sample_id", "task", "scene_id", "question", "answer",
    "question_object_ids", "answer_object_ids", "meta",
)

MANIFEST_SUFFIX = ".manifest.json"


def sample_to_line(sample: InstructionSample) -> str:
    return json.dumps(
        sample.to_json(), sort_keys=True, ensure_ascii=True, separators=(",", ":")
    )


def manifest_path(dataset_path: str | Path) -> Path:
    """Sidecar path: the dataset's extension replaced by .manifest.json."""
    path = Path(dataset_path)
    return path.with_name(path.stem + MANIFEST_SUFFIX)


def config_hash(config: Mapping[str, object]) -> str:
    """Stable digest of a flat config mapping."""
    canon = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def build_manifest(
    samples: Sequence[InstructionSample],
    seed: int | None = None,
    config_digest: str | None = None,
    corpus_hashes: Mapping[str, str] | None = None,
    stamp: bool = False,
) -> dict:
    counts = Counter(sample.task for sample in samples)
    total = len(samples)
    proportions = {
        task: counts[task] / total for task in sorted(counts)
    } if total else {}
    return {
        "total": total,
        "counts": {task: counts[task] for task in sorted(counts)},
        "proportions": proportions,
        "seed": seed,
        "config_hash": config_digest,
        "corpus_hashes": dict(sorted((corpus_hashes or {}).items())),
        "generated_at": (
            datetime.now(timezone.utc).isoformat() if stamp else None
        ),
    }


def write_dataset(
    samples: Sequence[InstructionSample],
    path: str | Path,
    seed: int | None = None,
    config_digest: str | None = None,
    corpus_hashes: Mapping[str, str] | None = None,
    stamp: bool = False,
) -> dict:
    """Write samples as JSONL plus the manifest sidecar; return the manifest."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    lines = [sample_to_line(sample) for sample in samples]
    body = "\n".join(lines) + ("\n" if lines else "")
    path.write_text(body, encoding="utf-8", newline="\n")
    manifest = build_manifest(samples, seed, config_digest, corpus_hashes, stamp)
    manifest_path(path).write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8", newline="\n",
    )
    return manifest


def read_dataset(path: str | Path) -> list[InstructionSample]:
    """Parse a dataset file, failing loudly with the offending line number."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise CorpusError(f"cannot read dataset {path}: {err}") from err
    samples = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise CorpusError(f"{path}:{line_no}: invalid JSON: {err.msg}") from err
        if not isinstance(obj, dict):
            raise CorpusError(f"{path}:{line_no}: line is not a JSON object")
        extra = set(obj) - set(DATASET_KEYS)
        missing = set(DATASET_KEYS) - set(obj)
        if extra or missing:
            detail = []
            if missing:
                detail.append(f"missing keys {sorted(missing)}")
            if extra:
                detail.append(f"unknown keys {sorted(extra)}")
            raise CorpusError(f"{path}:{line_no}: {'; '.join(detail)}")
        try:
            samples.append(InstructionSample.from_json(obj))
        except Exception as err:
            raise CorpusError(f"{path}:{line_no}: {err}") from err
    return samples


def read_manifest(path: str | Path) -> dict:
    """Load a manifest, given either the sidecar path or the dataset path."""
    path = Path(path)
    if not path.name.endswith(MANIFEST_SUFFIX):
        path = manifest_path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise CorpusError(f"cannot read manifest {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise CorpusError(f"{path}: invalid JSON: {err.msg}") from err
    if not isinstance(obj, dict) or "counts" not in obj or "total" not in obj:
        raise CorpusError(f"{path}: not a dataset manifest")
    return obj


def validate_dataset(
    path: str | Path,
    scenes: Mapping | None = None,
) -> list[str]:
    """All contract violations in a dataset file and its manifest sidecar.

    Validates each line's schema and id consistency (against scene content
    when scenes are supplied) and cross-checks the manifest counts by an
    independent recount. Returns human-readable violation strings.
    """
    violations: list[str] = []
    try:
        samples = read_dataset(path)
    except CorpusError as err:
        return [str(err)]

    seen_ids = set()
    for index, sample in enumerate(samples, start=1):
        scene = scenes.get(sample.scene_id) if scenes is not None else None
        if scenes is not None and scene is None:
            violations.append(
                f"line {index}: scene {sample.scene_id!r} not in corpus"
            )
        for problem in sample_problems(sample, scene):
            violations.append(f"line {index} ({sample.sample_id}): {problem}")
        if sample.sample_id in seen_ids:
            violations.append(f"line {index}: duplicate sample_id {sample.sample_id}")
        seen_ids.add(sample.sample_id)

    sidecar = manifest_path(path)
    if sidecar.is_file():
        try:
            manifest = read_manifest(sidecar)
        except CorpusError as err:
            violations.append(str(err))
        else:
            recount = Counter(sample.task for sample in samples)
            if manifest["total"] != len(samples):
                violations.append(
                    f"manifest total {manifest['total']} != {len(samples)} lines"
                )
            if manifest["counts"] != {t: recount[t] for t in sorted(recount)}:
                violations.append("manifest per-task counts disagree with recount")
            if manifest["counts"]:
                spread = sum(manifest["proportions"].values())
                if abs(spread - 1.0) > 1e-9:
                    violations.append(f"manifest proportions sum to {spread}")
    return violations
