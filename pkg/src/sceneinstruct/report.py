"""Report rendering: delimited stat tables plus figure files.

Everything here is derived from one StatsReport. Tables are tab-separated
with a header row so they diff cleanly; figures are rendered through the
object-oriented matplotlib interface, which needs no interactive backend.
"""

from __future__ import annotations

from pathlib import Path

from matplotlib.figure import Figure

from .stats import StatsReport

_DPI = 150


def write_tables(report: StatsReport, out_dir: str | Path) -> list[Path]:
    """Write task_stats.tsv and word_freq.tsv; return the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    task_path = out_dir / "task_stats.tsv"
    rows = ["task\tcount\tproportion\tavg_sentence_length"]
    for task in sorted(report.counts):
        share = report.counts[task] / report.total if report.total else 0.0
        rows.append(
            f"{task}\t{report.counts[task]}\t{share:.6f}"
            f"\t{report.avg_sentence_length[task]:.4f}"
        )
    rows.append(
        f"overall\t{report.total}\t1.000000\t{report.overall_avg_length:.4f}"
        if report.total else "overall\t0\t0.000000\t0.0000"
    )
    task_path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    freq_path = out_dir / "word_freq.tsv"
    lines = ["word\tcount"]
    lines.extend(f"{word}\t{count}" for word, count in report.word_freq)
    freq_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [task_path, freq_path]


def _save(fig: Figure, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")


def render_figures(
    report: StatsReport, out_dir: str | Path, top_words: int = 20
) -> list[Path]:
    """Render sentence-length, word-frequency, and task-mix figures as PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    tasks = sorted(report.counts)

    fig = Figure(figsize=(8, max(2.5, 0.35 * len(tasks) + 1)))
    ax = fig.add_subplot()
    lengths = [report.avg_sentence_length[task] for task in tasks]
    ax.barh(tasks, lengths, color="#4878a8")
    ax.invert_yaxis()
    ax.set_xlabel("average sentence length (words, ids excluded)")
    ax.set_title("Sentence length by task")
    path = out_dir / "sentence_length.png"
    _save(fig, path)
    paths.append(path)

    head = list(report.word_freq)[:top_words]
    fig = Figure(figsize=(8, max(2.5, 0.3 * len(head) + 1)))
    ax = fig.add_subplot()
    if head:
        words, counts = zip(*head)
        ax.barh(words, counts, color="#5a9a68")
        ax.invert_yaxis()
    ax.set_xlabel("occurrences")
    ax.set_title(f"Top {len(head)} words (object ids excluded)")
    path = out_dir / "word_freq.png"
    _save(fig, path)
    paths.append(path)

    fig = Figure(figsize=(7, 7))
    ax = fig.add_subplot()
    if report.total:
        shares = [report.counts[task] for task in tasks]
        ax.pie(shares, labels=tasks, autopct="%1.1f%%", startangle=90,
               textprops={"fontsize": 8})
    ax.set_title("Task proportions")
    path = out_dir / "task_mix.png"
    _save(fig, path)
    paths.append(path)
    return paths


def write_report(
    report: StatsReport, out_dir: str | Path, top_words: int = 20
) -> list[Path]:
    """Tables plus figures in one directory; returns every path written."""
    return write_tables(report, out_dir) + render_figures(
        report, out_dir, top_words=top_words
    )
