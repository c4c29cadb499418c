"""Composition control: how many samples of each task to generate.

The shipped preset reproduces the source mix's 344:508:165 ratio between
the adversarial, diverse, and benchmark groups at any scale, distributing
within each group uniformly. All integer allocation uses the largest-
remainder method so quotas always sum to the requested total.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import CompositionError
from .samples import ALL_TASKS, TASK_GROUPS, task_group

# group weights from the published data mix (thousands of samples)
PAPER_GROUP_WEIGHTS = {"adversarial": 344, "diverse": 508, "benchmark": 165}
PAPER_TOTAL = sum(PAPER_GROUP_WEIGHTS.values()) * 1000


def largest_remainder(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Integer allocation of *total* proportional to *weights*.

    Floors the exact shares, then hands leftover units to the largest
    fractional remainders; ties resolve by the order keys appear in
    *weights*, so the result is deterministic.
    """
    if total < 0:
        raise CompositionError("total must be non-negative")
    if not weights:
        raise CompositionError("no weights to allocate over")
    if any(w < 0 for w in weights.values()):
        raise CompositionError("weights must be non-negative")
    mass = float(sum(weights.values()))
    if mass == 0:
        raise CompositionError("weights sum to zero")
    keys = list(weights)
    exact = {k: total * weights[k] / mass for k in keys}
    alloc = {k: int(exact[k]) for k in keys}
    leftover = total - sum(alloc.values())
    by_remainder = sorted(
        keys, key=lambda k: (-(exact[k] - alloc[k]), keys.index(k))
    )
    for k in by_remainder[:leftover]:
        alloc[k] += 1
    return alloc


@dataclass(frozen=True)
class GenerationPlan:
    """Per-task sample quotas; zero-quota tasks are dropped."""

    quotas: Mapping[str, int]

    def __post_init__(self):
        unknown = set(self.quotas) - set(ALL_TASKS)
        if unknown:
            raise CompositionError(f"unknown tasks: {', '.join(sorted(unknown))}")
        if any(count < 0 for count in self.quotas.values()):
            raise CompositionError("quotas must be non-negative")
        cleaned = {
            task: int(self.quotas[task])
            for task in sorted(self.quotas)
            if self.quotas[task] > 0
        }
        object.__setattr__(self, "quotas", cleaned)

    @property
    def total(self) -> int:
        return sum(self.quotas.values())

    def by_group(self) -> dict[str, int]:
        groups = {name: 0 for name in TASK_GROUPS}
        for task, count in self.quotas.items():
            groups[task_group(task)] += count
        return groups

    def to_json(self) -> dict:
        return dict(self.quotas)


def plan_from_quotas(quotas: Mapping[str, int]) -> GenerationPlan:
    return GenerationPlan(dict(quotas))


def paper_mix(scale: float = 1e-3) -> GenerationPlan:
    """Preset mix at the published group ratio, scaled.

    scale 1/1000 lands exactly on 344 adversarial, 508 diverse, and 165
    benchmark-styled samples.
    """
    if scale <= 0:
        raise CompositionError("scale must be positive")
    total = round(PAPER_TOTAL * scale)
    if total == 0:
        raise CompositionError(f"scale {scale} rounds to an empty dataset")
    group_totals = largest_remainder(total, PAPER_GROUP_WEIGHTS)
    quotas: dict[str, int] = {}
    for group, group_total in group_totals.items():
        tasks = TASK_GROUPS[group]
        shares = largest_remainder(group_total, {task: 1.0 for task in tasks})
        quotas.update(shares)
    return GenerationPlan(quotas)


def parse_quota_specs(specs: Sequence[str]) -> GenerationPlan:
    """Parse repeated CLI quota flags of the form task=count."""
    quotas: dict[str, int] = {}
    for spec in specs:
        task, sep, value = spec.partition("=")
        if not sep or not task:
            raise CompositionError(f"quota must be task=count, got {spec!r}")
        try:
            count = int(value)
        except ValueError:
            raise CompositionError(f"quota count must be an integer: {spec!r}")
        if task in quotas:
            raise CompositionError(f"duplicate quota for task {task!r}")
        quotas[task] = count
    if not quotas:
        raise CompositionError("no quotas given")
    return GenerationPlan(quotas)
