"""Stream derivation stability and sample-level consistency checks."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sceneinstruct.errors import GenerationError
from sceneinstruct.rngs import derive_entropy, derive_rng
from sceneinstruct.samples import (
    ALL_TASKS,
    BENCHMARK_TASKS,
    DIVERSE_TASKS,
    InstructionSample,
    TASK_GROUPS,
    sample_problems,
    task_group,
    validate_sample,
)
from sceneinstruct.scenes import Aabb3, ObjectInstance, SceneGraph


class TestDeriveRng:
    def test_same_keys_same_stream(self):
        a = derive_rng(7, "hope", "scene0", 3)
        b = derive_rng(7, "hope", "scene0", 3)
        assert a.integers(0, 2**31, size=8).tolist() == b.integers(
            0, 2**31, size=8
        ).tolist()

    def test_different_index_different_stream(self):
        a = derive_rng(7, "hope", "scene0", 3)
        b = derive_rng(7, "hope", "scene0", 4)
        assert a.integers(0, 2**31, size=8).tolist() != b.integers(
            0, 2**31, size=8
        ).tolist()

    def test_type_tagged_keys(self):
        # "1" and 1 must not collide
        assert derive_entropy(0, "1") != derive_entropy(0, 1)
        # neither must ("ab","c") and ("a","bc")
        assert derive_entropy(0, "ab", "c") != derive_entropy(0, "a", "bc")

    def test_entropy_is_frozen(self):
        # pinned values: changing the derivation would silently break
        # reproducibility of published datasets
        assert derive_entropy(0) == int(
            "5087ad76195acbc364c2fc45ebafaf32faa3a90865e0b21376c10d0a08987166", 16
        )
        assert derive_entropy(7, "hope", "scene0", 3) == int(
            "78e627f37941aab1def20093ff564f897f8d2c19cb6465c53fb43aeabd0c1639", 16
        )

    def test_seed_range_enforced(self):
        with pytest.raises(ValueError):
            derive_entropy(-1)
        with pytest.raises(ValueError):
            derive_entropy(2**64)

    def test_bool_key_rejected(self):
        with pytest.raises(TypeError):
            derive_entropy(0, True)

    @given(
        st.integers(min_value=0, max_value=2**64 - 1),
        st.text(max_size=20),
        st.integers(min_value=-(2**63), max_value=2**63 - 1),
    )
    def test_derivation_never_crashes(self, seed, name, idx):
        rng = derive_rng(seed, name, idx)
        assert isinstance(rng, np.random.Generator)


class TestTaskTaxonomy:
    def test_groups_partition_tasks(self):
        seen = [t for tasks in TASK_GROUPS.values() for t in tasks]
        assert sorted(seen) == sorted(ALL_TASKS)
        assert len(set(seen)) == len(seen)

    def test_prefixes(self):
        for t in DIVERSE_TASKS:
            assert t.startswith("diverse_")
        for t in BENCHMARK_TASKS:
            assert t.startswith("benchmark_")

    def test_task_group(self):
        assert task_group("hope") == "adversarial"
        assert task_group("diverse_region") == "diverse"
        assert task_group("benchmark_scanqa") == "benchmark"
        with pytest.raises(GenerationError):
            task_group("nonsense")


def scene_with(n):
    objs = tuple(
        ObjectInstance(i, "chair", Aabb3((2.0 * i, 0, 0), (2.0 * i + 1, 1, 1)))
        for i in range(n)
    )
    return SceneGraph("s0", objs)


def sample(**over):
    base = dict(
        sample_id="hope-s0-000000",
        task="hope",
        scene_id="s0",
        question="Determine the presence of the following objects in the scene: chair.",
        answer="Yes, <OBJ000> <OBJ001>",
        question_object_ids=(),
        answer_object_ids=(0, 1),
        meta={},
    )
    base.update(over)
    return InstructionSample(**base)


class TestSampleValidation:
    def test_valid_sample_passes(self):
        validate_sample(sample(), scene_with(2))

    def test_text_id_missing_from_list(self):
        s = sample(answer_object_ids=(0,))
        probs = sample_problems(s, scene_with(2))
        assert any("cites object 1" in p for p in probs)

    def test_listed_id_missing_from_scene(self):
        s = sample(answer_object_ids=(0, 1, 5))
        probs = sample_problems(s, scene_with(2))
        assert any("object 5 not in scene" in p for p in probs)

    def test_malformed_token_flagged(self):
        s = sample(answer="Yes, <OBJ1> <OBJ001>", answer_object_ids=(1,))
        probs = sample_problems(s, scene_with(2))
        assert any("malformed" in p for p in probs)

    def test_unknown_task_flagged(self):
        s = sample(task="mystery")
        assert any("unknown task" in p for p in sample_problems(s, None))

    def test_scene_id_mismatch(self):
        s = sample(scene_id="other")
        probs = sample_problems(s, scene_with(2))
        assert any("does not match" in p for p in probs)

    def test_validate_raises(self):
        with pytest.raises(GenerationError, match="cites object"):
            validate_sample(sample(answer_object_ids=()), scene_with(2))

    def test_round_trip(self):
        s = sample(meta={"polarity": "positive"})
        assert InstructionSample.from_json(s.to_json()) == s

    def test_from_json_missing_field(self):
        obj = sample().to_json()
        del obj["answer"]
        with pytest.raises(GenerationError, match="answer"):
            InstructionSample.from_json(obj)
