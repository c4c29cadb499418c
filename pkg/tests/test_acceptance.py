"""Acceptance suite: ten go/no-go checks over the whole engine.

Each test prints exactly one verdict line (run with -s to see them on
success). Tolerances are pinned here and nowhere else; loosening them is
a contract change, not a test fix.
"""

import hashlib
import time
from collections import Counter

import numpy as np
import pytest

from sceneinstruct.adversarial import GenConfig
from sceneinstruct.chat import MockChatBackend, draw_temperature, extract_rephrase
from sceneinstruct.cli import main
from sceneinstruct.compose import paper_mix
from sceneinstruct.dataset_io import manifest_path, read_manifest, write_dataset
from sceneinstruct.diverse import RephraseConfig, rephrase_samples
from sceneinstruct.metrics import evaluate, parse_answer, sample_f1
from sceneinstruct.pipeline import PipelineConfig, generate_dataset, generate_task
from sceneinstruct.projector import default_mlps, property_report, random_batch
from sceneinstruct.rngs import derive_rng
from sceneinstruct.samples import TASK_GROUPS
from sceneinstruct.scenes import Aabb3, iou
from sceneinstruct.sequence import (
    FEATURE_ORDER_3D_FIRST,
    SEGMENT_KINDS,
    IdVocabulary,
    VisionSlot,
    assemble,
    recover_object_ids,
)
from sceneinstruct.stats import compute_stats, sentence_length, word_frequencies
from sceneinstruct.synth import make_corpus
from sceneinstruct.tokens import extract_ids

from .oracles import (
    check_3dfqa,
    check_hope,
    check_hroc,
    check_pf3dvg,
    random_lattice_box_pair,
    voxel_iou,
)
from .test_stats import GOLDEN_ROWS, golden_samples

ADVERSARIAL_QUOTA = 10_000
N_SCENES = 50
N_CATEGORIES = 16


def _verdict(number: int, label: str, failures: list[str]):
    status = "PASS" if not failures else "FAIL"
    print(f"criterion {number:02d} {status}: {label}")
    assert not failures, f"criterion {number}: " + "; ".join(failures[:5])


@pytest.fixture(scope="module")
def big_corpus():
    return make_corpus(seed=202, n_scenes=N_SCENES, n_categories=N_CATEGORIES)


@pytest.fixture(scope="module")
def adversarial_10k(big_corpus):
    """10,000 samples per adversarial task plus the generation wall time."""
    cfg = PipelineConfig(seed=31, rephrase=RephraseConfig(enabled=False))
    start = time.monotonic()
    by_task = {
        task: generate_task(big_corpus, task, ADVERSARIAL_QUOTA, cfg)
        for task in ("hope", "hroc", "pf3dvg", "fqa3d")
    }
    return by_task, time.monotonic() - start


@pytest.fixture(scope="module")
def dataset_1017(big_corpus):
    cfg = PipelineConfig(seed=77, rephrase=RephraseConfig(enabled=False))
    return generate_dataset(big_corpus, paper_mix(1e-3), cfg)


def test_criterion_01_polarity_soundness(big_corpus, adversarial_10k):
    by_task, gen_seconds = adversarial_10k
    failures = []
    start = time.monotonic()
    scenes = big_corpus.scenes
    if len(scenes) < 50:
        failures.append(f"only {len(scenes)} scenes")
    if len(big_corpus.category_pool()) < 15:
        failures.append(f"only {len(big_corpus.category_pool())} categories")
    for task, checker in (
        ("hope", check_hope), ("hroc", check_hroc), ("pf3dvg", check_pf3dvg),
    ):
        samples = by_task[task]
        if len(samples) < ADVERSARIAL_QUOTA:
            failures.append(f"{task}: only {len(samples)} samples")
        for sample in samples:
            try:
                checker(sample, scenes[sample.scene_id])
            except AssertionError as err:
                failures.append(f"{task}: {err}")
                break
    for sample in by_task["fqa3d"]:
        try:
            check_3dfqa(sample, scenes)
        except AssertionError as err:
            failures.append(f"fqa3d: {err}")
            break
    elapsed = gen_seconds + (time.monotonic() - start)
    if elapsed >= 60.0:
        failures.append(f"runtime {elapsed:.1f}s (limit 60s)")
    _verdict(1, f"polarity soundness, 4x{ADVERSARIAL_QUOTA} samples in "
                f"{elapsed:.1f}s", failures)


def test_criterion_02_byte_determinism(tmp_path):
    failures = []
    corpus_dir = tmp_path / "corpus"
    assert main(["make-corpus", "--out", str(corpus_dir), "--seed", "17",
                 "--scenes", "12"]) == 0
    config = tmp_path / "run.cfg"
    config.write_text(
        f"corpus={corpus_dir}\npreset=paper-mix\nscale=0.001\nseed=123\n"
        "rephrase=mock\n"
    )
    digests = []
    for name in ("first", "second"):
        out = tmp_path / f"{name}.jsonl"
        code = main(["generate", "--config", str(config), "--out", str(out)])
        if code != 0:
            failures.append(f"generate exited {code}")
            break
        digests.append((
            hashlib.sha256(out.read_bytes()).hexdigest(),
            hashlib.sha256(manifest_path(out).read_bytes()).hexdigest(),
        ))
    if len(digests) == 2 and digests[0] != digests[1]:
        failures.append(f"hashes differ: {digests[0]} vs {digests[1]}")
    _verdict(2, "two generate runs byte-identical (dataset and manifest)",
             failures)


def test_criterion_03_paper_mix_composition(dataset_1017, tmp_path):
    failures = []
    path = tmp_path / "mix.jsonl"
    write_dataset(dataset_1017, path, seed=77)
    manifest = read_manifest(path)
    groups = Counter()
    for task, count in manifest["counts"].items():
        for group, tasks in TASK_GROUPS.items():
            if task in tasks:
                groups[group] += count
    expected = {"adversarial": 344, "diverse": 508, "benchmark": 165}
    if dict(groups) != expected:
        failures.append(f"group counts {dict(groups)} != {expected}")
    if manifest["total"] != 1017:
        failures.append(f"total {manifest['total']} != 1017")
    _verdict(3, "paper-mix at 1/1000 gives 344/508/165, manifest-verified",
             failures)


def test_criterion_04_negative_fraction_realization(big_corpus, adversarial_10k):
    by_task, _ = adversarial_10k
    failures = []
    cfg = GenConfig()
    for task, checker, configured in (
        ("hope", check_hope, cfg.hope_negative_fraction),
        ("hroc", check_hroc, cfg.hroc_negative_fraction),
    ):
        n_pos = n_neg = 0
        for sample in by_task[task]:
            pos, neg = checker(sample, big_corpus.scenes[sample.scene_id])
            n_pos += pos
            n_neg += neg
        realized = n_neg / (n_pos + n_neg)
        if abs(realized - configured) > 0.02:
            failures.append(
                f"{task}: realized {realized:.4f} vs configured {configured}"
            )
    _verdict(4, "negative fractions within 2 percentage points over 10k",
             failures)


def test_criterion_05_rephrase_pipeline(dataset_1017):
    failures = []

    framings = [
        "rephrase={body}",
        "Sure, here is one option.\nrephrase={body}",
        "rephrase={body}\nLet me know if you want more.",
        "  rephrase={body}  ",
        "Option:\n\nrephrase={body}\n",
        "I picked this wording.\nrephrase={body}\nHope it helps!",
        "REPHRASE={body}",
        "Preamble sentence.\n\tRephrase = {body}",
    ]
    bodies = [
        "Where is the chair?",
        "Find the lamp <OBJ004> near the door.",
        "It is 'lying on', <OBJ012>",
        "No",
        "A tall cabinet stands in the corner.",
        "Is there a sofa in this room?",
    ]
    total = hits = 0
    for framing in framings:
        for body in bodies:
            total += 1
            if extract_rephrase(framing.format(body=body)) == body.strip():
                hits += 1
    if hits != total:
        failures.append(f"extraction {hits}/{total}")

    draws = Counter(
        draw_temperature(derive_rng(0, "rephrase", f"sample-{i}"))
        for i in range(9_999)
    )
    for temperature in (1.1, 1.2, 1.3):
        share = draws[temperature] / 9_999
        if abs(share - 1 / 3) > 0.02:
            failures.append(f"temperature {temperature}: share {share:.4f}")

    rephrased = rephrase_samples(
        dataset_1017, MockChatBackend(seed=5), RephraseConfig(seed=5),
    )
    changed = 0
    for before, after in zip(dataset_1017, rephrased):
        before_ids = sorted(extract_ids(before.question)
                            + extract_ids(before.answer))
        after_ids = sorted(extract_ids(after.question)
                           + extract_ids(after.answer))
        if before_ids != after_ids:
            failures.append(f"{before.sample_id}: id multiset changed")
            break
        changed += before.question != after.question \
            or before.answer != after.answer
    if changed == 0:
        failures.append("mock rephrase changed nothing")
    _verdict(5, "rephrase: extraction 100%, temperatures uniform, ids kept",
             failures)


def test_criterion_06_projector_reference():
    failures = []
    report = property_report(random_batch(64, seed=5), *default_mlps(seed=5),
                             seed=5)
    for key, bound in (
        ("row_norm_dev", 1e-9),
        ("permutation_dev", 1e-12),
        ("scale_invariance_dev", 1e-9),
        ("gelu_fd_dev", 1e-6),
    ):
        if report[key] >= bound:
            failures.append(f"{key} {report[key]:.3e} >= {bound:.0e}")
    _verdict(6, "projector norms, equivariance, invariance, GELU derivative",
             failures)


def test_criterion_07_geometry_oracle():
    failures = []
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(1_000):
        (amin, amax), (bmin, bmax) = random_lattice_box_pair(rng)
        analytic = iou(Aabb3(tuple(amin), tuple(amax)),
                       Aabb3(tuple(bmin), tuple(bmax)))
        reference = voxel_iou(amin, amax, bmin, bmax)
        worst = max(worst, abs(analytic - reference))
    if worst > 2e-3:
        failures.append(f"worst voxel deviation {worst:.2e}")

    unit = Aabb3((0, 0, 0), (1, 1, 1))
    if iou(unit, unit) != 1.0:
        failures.append("identical boxes != 1")
    if iou(unit, Aabb3((5, 5, 5), (6, 6, 6))) != 0.0:
        failures.append("disjoint boxes != 0")
    third = iou(unit, Aabb3((0.5, 0, 0), (1.5, 1, 1)))
    if abs(third - 1 / 3) > 1e-12:
        failures.append(f"one-third case off by {abs(third - 1 / 3):.2e}")
    _verdict(7, f"IoU vs 200^3 voxel oracle (worst {worst:.1e}) and exact "
                "hand cases", failures)


def test_criterion_08_metric_properties(big_corpus, dataset_1017):
    failures = []
    for sample in dataset_1017:
        parsed = parse_answer(sample.answer)
        if parsed.render() != sample.answer:
            failures.append(f"{sample.sample_id}: round trip broke")
            break

    scenes = big_corpus.scenes
    rng = np.random.default_rng(99)
    pool = list(dataset_1017)
    for trial in range(100):
        chosen = [pool[int(k)] for k in
                  rng.choice(len(pool), size=20, replace=False)]
        predictions = {}
        for sample in chosen:
            roll = rng.random()
            if roll < 0.4:
                predictions[sample.sample_id] = sample.answer
            elif roll < 0.7:
                objs = scenes[sample.scene_id].objects
                swap = objs[int(rng.integers(len(objs)))].object_id
                predictions[sample.sample_id] = f"Yes, <OBJ{swap:03d}>"
            else:
                predictions[sample.sample_id] = "perhaps the other one"
        report = evaluate(chosen, predictions, scenes, thresholds=(0.25, 0.5))
        if report.acc_at[0.25] < report.acc_at[0.5] - 1e-12:
            failures.append(f"trial {trial}: accuracy increased with threshold")
            break
        if report.f1_at[0.25] < report.f1_at[0.5] - 1e-12:
            failures.append(f"trial {trial}: F1 increased with threshold")
            break
        for row in report.rows:
            if row["em"] and not row["em_r"]:
                failures.append(f"trial {trial}: EM without EM-R")
                break

    scene = next(iter(scenes.values()))
    if sample_f1((), (), scene, 0.25) != 1.0:
        failures.append("empty-vs-empty F1 != 1")
    _verdict(8, "parse/render round trip, threshold monotonicity, EM=>EM-R,"
                " zero-target F1", failures)


def test_criterion_09_sequence_organization():
    failures = []
    vocab = IdVocabulary()
    rng = np.random.default_rng(4242)
    for trial in range(200):
        n = int(rng.integers(1, 151))
        ids = sorted(int(i) for i in rng.choice(150, size=n, replace=False))
        slots = [
            VisionSlot(oid, int(rng.integers(0, 1000)),
                       int(rng.integers(0, 1000)))
            for oid in ids
        ]
        seq = assemble(["sys"], ["q"], slots, ["a"], vocab=vocab,
                       feature_order=FEATURE_ORDER_3D_FIRST)
        vision = seq.segment("vision")
        if len(vision) != 4 * n:
            failures.append(f"trial {trial}: vision length {len(vision)}")
            break
        kinds = tuple(kind for kind, _ in seq.segments)
        if kinds != SEGMENT_KINDS:
            failures.append(f"trial {trial}: segment order {kinds}")
            break
        ok_wrappers = all(
            vision[k] == vision[k + 3] == vocab.token_for(ids[k // 4])
            for k in range(0, 4 * n, 4)
        )
        if not ok_wrappers:
            failures.append(f"trial {trial}: wrapper identity broken")
            break
        shuffled = list(slots)
        rng.shuffle(shuffled)
        if assemble(["sys"], ["q"], shuffled, ["a"], vocab=vocab) != seq:
            failures.append(f"trial {trial}: slot order leaked into layout")
            break
        if recover_object_ids(seq) != tuple(ids):
            failures.append(f"trial {trial}: recovered ids wrong")
            break
    _verdict(9, "vision 4x slots, wrapper identity, segment order, shuffle"
                " canonicalization", failures)


def test_criterion_10_stats_golden():
    failures = []
    samples = golden_samples()
    for sample, row in zip(samples, GOLDEN_ROWS):
        expected = row[5]
        got = sentence_length(sample)
        if got != expected:
            failures.append(f"{sample.sample_id}: length {got} != {expected}")
    report = compute_stats(samples)
    hand = {
        "benchmark_scanqa": 4.6, "diverse_category_qa": 8.0,
        "hope": 7.2, "hroc": 8.2,
    }
    if report.avg_sentence_length != hand:
        failures.append(f"averages {report.avg_sentence_length} != {hand}")
    if report.overall_avg_length != 7.0:
        failures.append(f"overall {report.overall_avg_length} != 7.0")
    for word, _ in word_frequencies(samples):
        if "obj" in word or "<" in word:
            failures.append(f"frequency table leaked token {word!r}")
            break
    _verdict(10, "20-sample golden lengths exact, frequency table id-free",
             failures)
