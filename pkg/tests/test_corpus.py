"""Corpus loading: schema validation, rejection reports, cross-scene checks."""

import json

import pytest

from sceneinstruct.corpus import (
    CaptionRecord,
    QaRecord,
    Sr3dReference,
    build_corpus,
    load_captions,
    load_corpus,
    load_qa,
    load_relation_lexicon,
    load_scene,
    load_sr3d,
)
from sceneinstruct.errors import CorpusError
from sceneinstruct.scenes import SceneGraph, ObjectInstance, Aabb3


def unit_box(x):
    return {"min": [x, 0.0, 0.0], "max": [x + 1.0, 1.0, 1.0]}


def write_scene(tmp_path, scene_id, cats, name=None):
    objects = [
        {"id": i, "category": cat, "box": unit_box(float(2 * i))}
        for i, cat in enumerate(cats)
    ]
    path = tmp_path / (name or f"{scene_id}.json")
    path.write_text(json.dumps({"scene_id": scene_id, "objects": objects}))
    return path


def write_jsonl(tmp_path, name, rows):
    path = tmp_path / name
    path.write_text("\n".join(json.dumps(r) if isinstance(r, dict) else r for r in rows))
    return path


class TestLoadScene:
    def test_minimal_scene(self, tmp_path):
        path = write_scene(tmp_path, "scene0", ["chair"])
        scene = load_scene(path)
        assert len(scene.objects) == 1
        assert scene.object(0).category == "chair"

    def test_duplicate_id_names_the_id(self, tmp_path):
        objects = [
            {"id": i, "category": "chair", "box": unit_box(float(2 * i))}
            for i in (0, 1, 2, 4)
        ]
        objects.append({"id": 4, "category": "table", "box": unit_box(20.0)})
        path = tmp_path / "dup.json"
        path.write_text(json.dumps({"scene_id": "dup", "objects": objects}))
        with pytest.raises(CorpusError, match="4"):
            load_scene(path)

    def test_150_object_fixture(self, tmp_path):
        cats = [f"cat{i % 10}" for i in range(150)]
        path = write_scene(tmp_path, "big", cats)
        scene = load_scene(path)
        assert len(scene.objects) == 150
        # recount per category independently of the index
        for c in set(cats):
            expected = [i for i in range(150) if cats[i] == c]
            assert list(scene.category_index[c]) == expected
        assert sum(len(v) for v in scene.category_index.values()) == 150

    def test_missing_field_names_field_and_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {"scene_id": "s", "objects": [{"id": 0, "box": unit_box(0.0)}]}
            )
        )
        with pytest.raises(CorpusError, match=r"objects\[0\].*category"):
            load_scene(path)

    def test_bad_box_rejected(self, tmp_path):
        path = tmp_path / "badbox.json"
        path.write_text(
            json.dumps(
                {
                    "scene_id": "s",
                    "objects": [
                        {
                            "id": 0,
                            "category": "chair",
                            "box": {"min": [0, 0, 0], "max": [1, -1, 1]},
                        }
                    ],
                }
            )
        )
        with pytest.raises(CorpusError):
            load_scene(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "nope.json"
        path.write_text("this is not json")
        with pytest.raises(CorpusError, match="JSON"):
            load_scene(path)


class TestRelationLexicon:
    def test_packaged_lexicon_has_below_synonyms(self):
        lex = load_relation_lexicon()
        assert "below" in lex
        for syn in ("under", "beneath", "underneath"):
            assert syn in lex.synonyms("below")

    def test_find_form_matches_whole_words(self):
        lex = load_relation_lexicon()
        assert lex.find_form("below", "the pillow under the couch") == "under"
        # "thunder" must not count as a hit for "under"
        assert lex.find_form("below", "the thunder poster on the wall") is None

    def test_find_form_prefers_longest(self):
        lex = load_relation_lexicon()
        text = "the lamp on the left side of the bed"
        assert lex.find_form("left of", text) == "on the left side of"

    def test_render_uses_template(self):
        lex = load_relation_lexicon()
        out = lex.render("lying on", "pillow", ["couch"])
        assert out == "the pillow lying on the couch"
        out = lex.render("below", "pillow", ["couch"], form="underneath")
        assert out == "the pillow underneath the couch"

    def test_swap_candidates_share_no_wording(self):
        lex = load_relation_lexicon()
        for rel in lex.relations:
            true_forms = set(lex.all_forms(rel))
            for cand in lex.swap_candidates(rel):
                assert cand != rel
                assert true_forms.isdisjoint(lex.all_forms(cand))
            # every relation must leave at least one legal swap
            assert lex.swap_candidates(rel)

    def test_unknown_relation_raises(self):
        lex = load_relation_lexicon()
        with pytest.raises(CorpusError, match="floating within"):
            lex.synonyms("floating within")


def ref_row(**over):
    row = {
        "scene_id": "scene0",
        "target_id": 1,
        "target_category": "pillow",
        "anchor_ids": [2],
        "relation": "lying on",
        "surface_text": "the pillow lying on the couch",
    }
    row.update(over)
    return row


class TestLoadSr3d:
    def test_lying_on_accepted(self, tmp_path):
        lex = load_relation_lexicon()
        path = write_jsonl(tmp_path, "refs.jsonl", [ref_row()])
        result = load_sr3d(path, lex)
        assert len(result.records) == 1
        assert result.records[0].relation == "lying on"
        assert not result.rejections

    def test_unknown_relation_rejected_with_report(self, tmp_path):
        lex = load_relation_lexicon()
        path = write_jsonl(
            tmp_path,
            "refs.jsonl",
            [ref_row(relation="floating within", surface_text="the a floating within the b")],
        )
        result = load_sr3d(path, lex)
        assert not result.records
        assert len(result.rejections) == 1
        assert "floating within" in result.rejections[0].reason
        assert result.rejections[0].line_no == 1

    def test_surface_text_must_contain_relation_wording(self, tmp_path):
        lex = load_relation_lexicon()
        path = write_jsonl(
            tmp_path,
            "refs.jsonl",
            [ref_row(surface_text="the pillow next to the couch")],
        )
        result = load_sr3d(path, lex)
        assert not result.records
        assert "wording" in result.rejections[0].reason

    def test_100_records_3_malformed(self, tmp_path):
        lex = load_relation_lexicon()
        rows = []
        for i in range(100):
            if i == 10:
                rows.append("{broken json")
            elif i == 40:
                rows.append(ref_row(relation="floating within"))
            elif i == 70:
                row = ref_row()
                del row["target_id"]
                rows.append(row)
            else:
                rows.append(ref_row(target_id=i))
        path = write_jsonl(tmp_path, "refs.jsonl", rows)
        result = load_sr3d(path, lex)
        assert len(result.records) == 97
        assert len(result.rejections) == 3
        assert sorted(r.line_no for r in result.rejections) == [11, 41, 71]
        # every rejection is itemized with its own reason
        assert len({r.reason for r in result.rejections}) == 3

    def test_round_trip(self, tmp_path):
        lex = load_relation_lexicon()
        path = write_jsonl(tmp_path, "refs.jsonl", [ref_row()])
        rec = load_sr3d(path, lex).records[0]
        path2 = write_jsonl(tmp_path, "refs2.jsonl", [rec.to_json()])
        rec2 = load_sr3d(path2, lex).records[0]
        assert rec == rec2


class TestLoadQaAndCaptions:
    def test_empty_related_ids_rejected(self, tmp_path):
        path = write_jsonl(
            tmp_path,
            "qa.jsonl",
            [
                {
                    "scene_id": "s",
                    "question": "How many chairs?",
                    "answer": "two",
                    "related_object_ids": [],
                    "related_categories": ["chair"],
                }
            ],
        )
        result = load_qa(path)
        assert not result.records
        assert "related_object_ids" in result.rejections[0].reason

    def test_qa_fixture_loads(self, tmp_path):
        rows = [
            {
                "scene_id": "s",
                "question": f"Question {i}?",
                "answer": "yes",
                "related_object_ids": [i % 5],
                "related_categories": ["chair"],
            }
            for i in range(50)
        ]
        path = write_jsonl(tmp_path, "qa.jsonl", rows)
        result = load_qa(path)
        assert len(result.records) == 50
        assert not result.rejections

    def test_caption_kinds(self, tmp_path):
        rows = [
            {"scene_id": "s", "object_id": 0, "kind": "appearance", "text": "a red chair"},
            {"scene_id": "s", "object_id": 1, "kind": "bogus", "text": "x"},
        ]
        path = write_jsonl(tmp_path, "caps.jsonl", rows)
        result = load_captions(path)
        assert len(result.records) == 1
        assert result.records[0].kind == "appearance"
        assert "bogus" in result.rejections[0].reason

    def test_require_clean_raises_on_rejections(self, tmp_path):
        path = write_jsonl(tmp_path, "caps.jsonl", ["{bad"])
        with pytest.raises(CorpusError, match="rejected"):
            load_captions(path).require_clean()


def make_scene(scene_id, cats):
    objects = tuple(
        ObjectInstance(i, cat, Aabb3((2.0 * i, 0, 0), (2.0 * i + 1, 1, 1)))
        for i, cat in enumerate(cats)
    )
    return SceneGraph(scene_id, objects)


class TestBuildCorpus:
    def test_unknown_scene_quarantined(self):
        scene = make_scene("scene0", ["couch", "pillow"])
        ref = Sr3dReference("ghost", 1, "pillow", (0,), "lying on",
                            "the pillow lying on the couch")
        corpus = build_corpus([scene], references=[ref])
        assert not corpus.references
        assert len(corpus.quarantine) == 1
        assert corpus.quarantine[0].kind == "reference"
        assert corpus.quarantine[0].reason == "unknown scene_id"

    def test_category_mismatch_quarantined(self):
        scene = make_scene("scene0", ["couch", "pillow"])
        ref = Sr3dReference("scene0", 1, "lamp", (0,), "lying on",
                            "the lamp lying on the couch")
        corpus = build_corpus([scene], references=[ref])
        assert not corpus.references
        assert "lamp" in corpus.quarantine[0].reason

    def test_valid_records_kept(self):
        scene = make_scene("scene0", ["couch", "pillow"])
        ref = Sr3dReference("scene0", 1, "pillow", (0,), "lying on",
                            "the pillow lying on the couch")
        qa = QaRecord("scene0", "Is there a pillow?", "yes", (1,), ("pillow",))
        cap = CaptionRecord("scene0", 0, "appearance", "a gray couch")
        corpus = build_corpus([scene], references=[ref], qa=[qa], captions=[cap])
        assert corpus.references == (ref,)
        assert corpus.qa == (qa,)
        assert corpus.captions == (cap,)
        assert not corpus.quarantine

    def test_qa_with_missing_object_quarantined(self):
        scene = make_scene("scene0", ["couch"])
        qa = QaRecord("scene0", "Q?", "a", (7,), ("couch",))
        corpus = build_corpus([scene], qa=[qa])
        assert not corpus.qa
        assert "7" in corpus.quarantine[0].reason

    def test_category_pool_is_sorted_union(self):
        a = make_scene("a", ["couch", "pillow"])
        b = make_scene("b", ["chair", "couch"])
        corpus = build_corpus([a, b])
        assert corpus.category_pool() == ("chair", "couch", "pillow")

    def test_duplicate_scene_id_raises(self):
        with pytest.raises(CorpusError, match="duplicate scene_id"):
            build_corpus([make_scene("a", ["x"]), make_scene("a", ["y"])])


class TestLoadCorpus:
    def build_inputs(self, tmp_path):
        s0 = write_scene(tmp_path, "scene0", ["couch", "pillow", "chair"])
        s1 = write_scene(tmp_path, "scene1", ["table", "lamp"])
        refs = write_jsonl(tmp_path, "refs.jsonl", [ref_row()])
        qa = write_jsonl(
            tmp_path,
            "qa.jsonl",
            [
                {
                    "scene_id": "scene1",
                    "question": "What sits on the table?",
                    "answer": "a lamp",
                    "related_object_ids": [0, 1],
                    "related_categories": ["table", "lamp"],
                }
            ],
        )
        caps = write_jsonl(
            tmp_path,
            "caps.jsonl",
            [{"scene_id": "scene0", "object_id": 2, "kind": "region", "text": "a corner"}],
        )
        return [s0, s1], [refs], [qa], [caps]

    def test_end_to_end(self, tmp_path):
        scenes, refs, qa, caps = self.build_inputs(tmp_path)
        corpus = load_corpus(scenes, refs, qa, caps)
        assert set(corpus.scenes) == {"scene0", "scene1"}
        assert len(corpus.references) == 1
        assert len(corpus.qa) == 1
        assert len(corpus.captions) == 1
        assert not corpus.quarantine
        assert len(corpus.file_hashes) == 5

    def test_loading_is_idempotent(self, tmp_path):
        scenes, refs, qa, caps = self.build_inputs(tmp_path)
        c1 = load_corpus(scenes, refs, qa, caps)
        c2 = load_corpus(scenes, refs, qa, caps)
        assert c1.scenes == c2.scenes
        assert c1.references == c2.references
        assert c1.qa == c2.qa
        assert c1.captions == c2.captions
        assert c1.file_hashes == c2.file_hashes
