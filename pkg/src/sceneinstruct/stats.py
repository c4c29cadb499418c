"""Dataset statistics: per-task sentence lengths and id-free word frequencies.

Sentence length is the word count of the question plus the word count of
the answer, with object-id tokens excluded before counting. A word is a
maximal run of non-whitespace; runs made of punctuation only do not count.
The frequency table applies the same id exclusion, then lowercases and
strips edge punctuation so "Chair?" and "chair" pool together.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .dataset_io import manifest_path, read_dataset, read_manifest
from .samples import InstructionSample

# Loose on purpose: malformed variants like <obj3> or <OBJ 4> must not
# leak into word counts either.
_LOOSE_OBJ_RE = re.compile(r"<[Oo][Bb][Jj][^<>]*>")

_PUNCT = set(string.punctuation)


def strip_id_tokens(text: str) -> str:
    return _LOOSE_OBJ_RE.sub(" ", text)


def words_of(text: str) -> list[str]:
    """Countable words of a text under the dataset's length rule."""
    words = []
    for token in strip_id_tokens(text).split():
        if all(ch in _PUNCT for ch in token):
            continue
        words.append(token)
    return words


def sentence_length(sample: InstructionSample) -> int:
    """Question words plus answer words, object ids excluded."""
    return len(words_of(sample.question)) + len(words_of(sample.answer))


def word_frequencies(
    samples: Sequence[InstructionSample],
) -> list[tuple[str, int]]:
    """(word, count) pairs over questions and answers, most frequent first.

    Ties break alphabetically. Object-id tokens never appear: they are
    removed before tokenization.
    """
    counts: Counter[str] = Counter()
    for sample in samples:
        for text in (sample.question, sample.answer):
            for token in words_of(text):
                word = token.lower().strip(string.punctuation)
                if word:
                    counts[word] += 1
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class StatsReport:
    """Aggregate statistics of one dataset file."""

    total: int
    counts: Mapping[str, int]
    avg_sentence_length: Mapping[str, float]
    overall_avg_length: float
    word_freq: Sequence[tuple[str, int]]
    manifest: Mapping | None = None

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "counts": dict(self.counts),
            "avg_sentence_length": dict(self.avg_sentence_length),
            "overall_avg_length": self.overall_avg_length,
            "word_freq": [[word, count] for word, count in self.word_freq],
            "manifest": dict(self.manifest) if self.manifest is not None else None,
        }


def compute_stats(
    samples: Sequence[InstructionSample],
    manifest: Mapping | None = None,
    top_words: int = 50,
) -> StatsReport:
    if top_words < 0:
        raise ValueError(f"top_words must be >= 0, got {top_words}")
    counts: Counter[str] = Counter(sample.task for sample in samples)
    length_sums: Counter[str] = Counter()
    total_length = 0
    for sample in samples:
        n = sentence_length(sample)
        length_sums[sample.task] += n
        total_length += n
    averages = {
        task: length_sums[task] / counts[task] for task in sorted(counts)
    }
    return StatsReport(
        total=len(samples),
        counts={task: counts[task] for task in sorted(counts)},
        avg_sentence_length=averages,
        overall_avg_length=total_length / len(samples) if samples else 0.0,
        word_freq=tuple(word_frequencies(samples)[:top_words]),
        manifest=manifest,
    )


def stats_from_file(path: str | Path, top_words: int = 50) -> StatsReport:
    """Stats for a dataset file, echoing its manifest sidecar if present."""
    path = Path(path)
    samples = read_dataset(path)
    manifest = None
    if manifest_path(path).exists():
        manifest = read_manifest(path)
    return compute_stats(samples, manifest=manifest, top_words=top_words)


def format_stats_table(report: StatsReport, top_words: int = 15) -> str:
    """Aligned text rendering, one task per row plus a frequency tail."""
    lines = [f"samples {report.total}"]
    if report.counts:
        width = max(len(task) for task in (*report.counts, "overall"))
        lines.append(f"{'task'.ljust(width)}  count  avg_len")
        for task in sorted(report.counts):
            lines.append(
                f"{task.ljust(width)}  {report.counts[task]:5d}"
                f"  {report.avg_sentence_length[task]:7.2f}"
            )
        lines.append(f"{'overall'.ljust(width)}  {report.total:5d}"
                     f"  {report.overall_avg_length:7.2f}")
    if report.word_freq:
        lines.append("top words")
        for word, count in list(report.word_freq)[:top_words]:
            lines.append(f"  {word}  {count}")
    return "\n".join(lines)
