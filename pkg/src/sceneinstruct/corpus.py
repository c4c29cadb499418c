"""Loading and validation of the annotation corpora the generators consume.

A corpus is four kinds of input: scene files (one JSON object each),
templated referring expressions, question/answer pairs, and per-object
caption records (the latter three as JSON lines). Everything is validated
up front so the generators can assume well-formed, scene-consistent data.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import CorpusError
from .scenes import SceneGraph, Aabb3, ObjectInstance, canonicalize_category

CAPTION_KINDS = ("appearance", "category_qa", "nr3d_caption", "region")

_MAX_SNIPPET = 80


def _snippet(raw: str) -> str:
    raw = raw.strip()
    if len(raw) > _MAX_SNIPPET:
        return raw[: _MAX_SNIPPET - 3] + "..."
    return raw


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Relation lexicon


class RelationLexicon:
    """Canonical relation names with their surface forms and synonyms.

    The lexicon is a plain JSON data file so the relation inventory can be
    extended without code changes. Each entry maps a canonical name to
    ``surface_forms`` (wordings that identify the relation in reference
    text, canonical rendering first), ``synonyms`` (replacement wordings
    used by text augmentation), and a ``template`` with ``{target}``,
    ``{relation}`` and ``{anchor}`` slots.
    """

    def __init__(self, entries: Mapping[str, Mapping[str, object]]):
        if not entries:
            raise CorpusError("relation lexicon is empty")
        self._entries: dict[str, dict[str, object]] = {}
        for name, entry in entries.items():
            if not isinstance(name, str) or not name.strip():
                raise CorpusError(f"relation lexicon: bad relation name {name!r}")
            for key in ("surface_forms", "synonyms", "template"):
                if key not in entry:
                    raise CorpusError(
                        f"relation lexicon: relation {name!r} missing {key!r}"
                    )
            forms = entry["surface_forms"]
            syns = entry["synonyms"]
            template = entry["template"]
            if (
                not isinstance(forms, list)
                or not forms
                or not all(isinstance(f, str) and f.strip() for f in forms)
            ):
                raise CorpusError(
                    f"relation lexicon: relation {name!r} needs a non-empty"
                    " surface_forms list of strings"
                )
            if not isinstance(syns, list) or not all(
                isinstance(s, str) and s.strip() for s in syns
            ):
                raise CorpusError(
                    f"relation lexicon: relation {name!r} synonyms must be strings"
                )
            if not isinstance(template, str) or "{target}" not in template:
                raise CorpusError(
                    f"relation lexicon: relation {name!r} template must contain"
                    " a {{target}} slot"
                )
            self._entries[name] = {
                "surface_forms": tuple(forms),
                "synonyms": tuple(syns),
                "template": template,
            }

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(sorted(self._entries))

    def __contains__(self, relation: str) -> bool:
        return relation in self._entries

    def surface_forms(self, relation: str) -> tuple[str, ...]:
        return self._entry(relation)["surface_forms"]

    def synonyms(self, relation: str) -> tuple[str, ...]:
        return self._entry(relation)["synonyms"]

    def template(self, relation: str) -> str:
        return self._entry(relation)["template"]

    def all_forms(self, relation: str) -> tuple[str, ...]:
        """Every wording that names this relation, canonical name included."""
        entry = self._entry(relation)
        seen: dict[str, None] = {}
        for form in (relation, *entry["surface_forms"], *entry["synonyms"]):
            seen.setdefault(form)
        return tuple(seen)

    def find_form(self, relation: str, text: str) -> str | None:
        """Longest wording of `relation` occurring in `text`, None if absent."""
        best = None
        for form in sorted(self.all_forms(relation), key=len, reverse=True):
            if re.search(rf"(?<!\w){re.escape(form)}(?!\w)", text):
                best = form
                break
        return best

    def render(
        self,
        relation: str,
        target: str,
        anchors: Sequence[str],
        form: str | None = None,
    ) -> str:
        entry = self._entry(relation)
        wording = form if form is not None else entry["surface_forms"][0]
        anchor = " and ".join(anchors)
        return entry["template"].format(
            target=target, relation=wording, anchor=anchor
        )

    def swap_candidates(self, relation: str) -> tuple[str, ...]:
        """Relations safe to substitute for `relation` without meaning overlap.

        Excludes any relation sharing a wording with the true one, so a swap
        is guaranteed to change the stated relation.
        """
        true_forms = set(self.all_forms(relation))
        out = []
        for other in self.relations:
            if other == relation:
                continue
            if true_forms.isdisjoint(self.all_forms(other)):
                out.append(other)
        return tuple(out)

    def _entry(self, relation: str) -> dict[str, object]:
        try:
            return self._entries[relation]
        except KeyError:
            raise CorpusError(f"unknown relation {relation!r}") from None


def load_relation_lexicon(path: str | Path | None = None) -> RelationLexicon:
    """Load a lexicon file; the packaged default when no path is given."""
    if path is None:
        ref = resources.files("sceneinstruct").joinpath("data/relations.json")
        raw = ref.read_text(encoding="utf-8")
    else:
        raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"relation lexicon is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CorpusError("relation lexicon must be a JSON object")
    return RelationLexicon(data)


# ---------------------------------------------------------------------------
# Record types


@dataclass(frozen=True)
class Sr3dReference:
    """One templated referring expression tied to a scene."""

    scene_id: str
    target_id: int
    target_category: str
    anchor_ids: tuple[int, ...]
    relation: str
    surface_text: str

    def __post_init__(self):
        object.__setattr__(
            self, "target_category", canonicalize_category(self.target_category)
        )
        object.__setattr__(self, "anchor_ids", tuple(self.anchor_ids))

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "target_id": self.target_id,
            "target_category": self.target_category,
            "anchor_ids": list(self.anchor_ids),
            "relation": self.relation,
            "surface_text": self.surface_text,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Sr3dReference":
        return cls(
            scene_id=_req_str(obj, "scene_id"),
            target_id=_req_int(obj, "target_id"),
            target_category=_req_str(obj, "target_category"),
            anchor_ids=tuple(_req_int_list(obj, "anchor_ids")),
            relation=_req_str(obj, "relation"),
            surface_text=_req_str(obj, "surface_text"),
        )


@dataclass(frozen=True)
class QaRecord:
    """A question/answer pair grounded in the objects of one scene."""

    scene_id: str
    question: str
    answer: str
    related_object_ids: tuple[int, ...]
    related_categories: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "related_object_ids", tuple(self.related_object_ids)
        )
        object.__setattr__(
            self,
            "related_categories",
            tuple(canonicalize_category(c) for c in self.related_categories),
        )

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "question": self.question,
            "answer": self.answer,
            "related_object_ids": list(self.related_object_ids),
            "related_categories": list(self.related_categories),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "QaRecord":
        return cls(
            scene_id=_req_str(obj, "scene_id"),
            question=_req_str(obj, "question"),
            answer=_req_str(obj, "answer"),
            related_object_ids=tuple(_req_int_list(obj, "related_object_ids")),
            related_categories=tuple(_req_str_list(obj, "related_categories")),
        )


@dataclass(frozen=True)
class CaptionRecord:
    """A per-object caption, typed by which transform may consume it."""

    scene_id: str
    object_id: int
    kind: str
    text: str

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "object_id": self.object_id,
            "kind": self.kind,
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "CaptionRecord":
        return cls(
            scene_id=_req_str(obj, "scene_id"),
            object_id=_req_int(obj, "object_id"),
            kind=_req_str(obj, "kind"),
            text=_req_str(obj, "text"),
        )


def _req(obj: Mapping, key: str):
    if key not in obj:
        raise CorpusError(f"missing field {key!r}")
    return obj[key]


def _req_str(obj: Mapping, key: str) -> str:
    val = _req(obj, key)
    if not isinstance(val, str):
        raise CorpusError(f"field {key!r} must be a string, got {type(val).__name__}")
    return val


def _req_int(obj: Mapping, key: str) -> int:
    val = _req(obj, key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise CorpusError(f"field {key!r} must be an integer, got {type(val).__name__}")
    return val


def _req_int_list(obj: Mapping, key: str) -> list[int]:
    val = _req(obj, key)
    if not isinstance(val, list) or any(
        isinstance(v, bool) or not isinstance(v, int) for v in val
    ):
        raise CorpusError(f"field {key!r} must be a list of integers")
    return val


def _req_str_list(obj: Mapping, key: str) -> list[str]:
    val = _req(obj, key)
    if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
        raise CorpusError(f"field {key!r} must be a list of strings")
    return val


# ---------------------------------------------------------------------------
# Scene loading


def load_scene(path: str | Path, max_objects: int | None = None) -> SceneGraph:
    """Parse one scene file into a validated SceneGraph.

    Any schema violation raises CorpusError naming the offending field and
    its location; scenes are all-or-nothing, unlike the line-oriented
    corpora which reject records individually.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CorpusError(f"{path}: scene file must be a JSON object")
    try:
        scene_id = _req_str(data, "scene_id")
        objects_raw = _req(data, "objects")
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None
    if not isinstance(objects_raw, list):
        raise CorpusError(f"{path}: field 'objects' must be a list")

    objects = []
    for pos, obj in enumerate(objects_raw):
        where = f"{path}: objects[{pos}]"
        if not isinstance(obj, dict):
            raise CorpusError(f"{where}: must be a JSON object")
        try:
            oid = _req_int(obj, "id")
            category = _req_str(obj, "category")
            box_raw = _req(obj, "box")
        except CorpusError as exc:
            raise CorpusError(f"{where}: {exc}") from None
        if not isinstance(box_raw, dict):
            raise CorpusError(f"{where}: field 'box' must be an object")
        for corner in ("min", "max"):
            val = box_raw.get(corner)
            if (
                not isinstance(val, list)
                or len(val) != 3
                or not all(isinstance(c, (int, float)) for c in val)
            ):
                raise CorpusError(
                    f"{where}: box.{corner} must be a list of 3 numbers"
                )
        try:
            box = Aabb3(tuple(box_raw["min"]), tuple(box_raw["max"]))
            objects.append(ObjectInstance(oid, category, box))
        except ValueError as exc:
            raise CorpusError(f"{where}: {exc}") from None

    kwargs = {} if max_objects is None else {"max_objects": max_objects}
    try:
        return SceneGraph(scene_id, tuple(objects), **kwargs)
    except ValueError as exc:
        raise CorpusError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Line-oriented loading with itemized rejection


@dataclass(frozen=True)
class Rejection:
    """One rejected input line with its location and reason."""

    path: str
    line_no: int
    reason: str
    snippet: str


@dataclass(frozen=True)
class LoadResult:
    records: tuple
    rejections: tuple[Rejection, ...]

    def require_clean(self):
        if self.rejections:
            first = self.rejections[0]
            raise CorpusError(
                f"{len(self.rejections)} rejected record(s); first:"
                f" {first.path}:{first.line_no}: {first.reason}"
            )
        return self.records


def _iter_jsonl(path: Path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                yield line_no, line


def _load_jsonl(path: str | Path, parse, validate=None) -> LoadResult:
    path = Path(path)
    records, rejections = [], []
    for line_no, line in _iter_jsonl(path):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            rejections.append(
                Rejection(str(path), line_no, f"not valid JSON: {exc}", _snippet(line))
            )
            continue
        if not isinstance(obj, dict):
            rejections.append(
                Rejection(str(path), line_no, "line must be a JSON object", _snippet(line))
            )
            continue
        try:
            rec = parse(obj)
            if validate is not None:
                validate(rec)
        except CorpusError as exc:
            rejections.append(Rejection(str(path), line_no, str(exc), _snippet(line)))
            continue
        records.append(rec)
    return LoadResult(tuple(records), tuple(rejections))


def load_sr3d(path: str | Path, lexicon: RelationLexicon) -> LoadResult:
    """Load referring expressions, rejecting records the lexicon can't name."""

    def validate(rec: Sr3dReference):
        if rec.relation not in lexicon:
            raise CorpusError(f"unknown relation {rec.relation!r}")
        if lexicon.find_form(rec.relation, rec.surface_text) is None:
            raise CorpusError(
                f"surface_text does not contain any wording of {rec.relation!r}"
            )
        if not rec.surface_text.strip():
            raise CorpusError("surface_text is empty")

    return _load_jsonl(path, Sr3dReference.from_json, validate)


def load_qa(path: str | Path) -> LoadResult:
    """Load QA pairs; every record must name its supporting objects."""

    def validate(rec: QaRecord):
        if not rec.related_object_ids:
            raise CorpusError("related_object_ids is empty")
        if not rec.related_categories:
            raise CorpusError("related_categories is empty")
        if not rec.question.strip():
            raise CorpusError("question is empty")
        if not rec.answer.strip():
            raise CorpusError("answer is empty")

    return _load_jsonl(path, QaRecord.from_json, validate)


def load_captions(path: str | Path) -> LoadResult:
    def validate(rec: CaptionRecord):
        if rec.kind not in CAPTION_KINDS:
            raise CorpusError(
                f"unknown caption kind {rec.kind!r};"
                f" expected one of {', '.join(CAPTION_KINDS)}"
            )
        if not rec.text.strip():
            raise CorpusError("text is empty")

    return _load_jsonl(path, CaptionRecord.from_json, validate)


# ---------------------------------------------------------------------------
# Assembled corpus


@dataclass(frozen=True)
class Quarantined:
    """A structurally valid record set aside during cross-scene validation."""

    kind: str
    scene_id: str
    reason: str


@dataclass(frozen=True)
class Corpus:
    """Immutable bundle of validated scenes and the records that cite them."""

    scenes: Mapping[str, SceneGraph]
    references: tuple[Sr3dReference, ...]
    qa: tuple[QaRecord, ...]
    captions: tuple[CaptionRecord, ...]
    lexicon: RelationLexicon
    file_hashes: Mapping[str, str] = field(default_factory=dict)
    rejections: tuple[Rejection, ...] = ()
    quarantine: tuple[Quarantined, ...] = ()

    def category_pool(self) -> tuple[str, ...]:
        """Union of categories over all scenes, sorted."""
        pool = set()
        for scene in self.scenes.values():
            pool.update(scene.categories())
        return tuple(sorted(pool))

    def scene(self, scene_id: str) -> SceneGraph:
        try:
            return self.scenes[scene_id]
        except KeyError:
            raise CorpusError(f"unknown scene {scene_id!r}") from None


def _check_reference(rec: Sr3dReference, scene: SceneGraph) -> str | None:
    if not scene.has_object(rec.target_id):
        return f"target_id {rec.target_id} not in scene"
    if scene.object(rec.target_id).category != rec.target_category:
        return (
            f"target_category {rec.target_category!r} does not match scene"
            f" category {scene.object(rec.target_id).category!r}"
        )
    for aid in rec.anchor_ids:
        if not scene.has_object(aid):
            return f"anchor_id {aid} not in scene"
    return None


def _check_qa(rec: QaRecord, scene: SceneGraph) -> str | None:
    for oid in rec.related_object_ids:
        if not scene.has_object(oid):
            return f"related_object_id {oid} not in scene"
    scene_cats = set(scene.categories())
    for cat in rec.related_categories:
        if cat not in scene_cats:
            return f"related_category {cat!r} not in scene"
    return None


def _check_caption(rec: CaptionRecord, scene: SceneGraph) -> str | None:
    if not scene.has_object(rec.object_id):
        return f"object_id {rec.object_id} not in scene"
    return None


def build_corpus(
    scenes: Iterable[SceneGraph],
    references: Sequence[Sr3dReference] = (),
    qa: Sequence[QaRecord] = (),
    captions: Sequence[CaptionRecord] = (),
    lexicon: RelationLexicon | None = None,
    file_hashes: Mapping[str, str] | None = None,
    rejections: Sequence[Rejection] = (),
) -> Corpus:
    """Cross-validate records against their scenes and assemble a Corpus.

    Records citing unknown scenes, or objects/categories their scene does
    not contain, are quarantined rather than dropped silently; generation
    proceeds on the surviving subset.
    """
    if lexicon is None:
        lexicon = load_relation_lexicon()
    scene_map: dict[str, SceneGraph] = {}
    for scene in scenes:
        if scene.scene_id in scene_map:
            raise CorpusError(f"duplicate scene_id {scene.scene_id!r}")
        scene_map[scene.scene_id] = scene

    quarantine: list[Quarantined] = []

    def sift(kind: str, records, check):
        kept = []
        for rec in records:
            scene = scene_map.get(rec.scene_id)
            if scene is None:
                quarantine.append(
                    Quarantined(kind, rec.scene_id, "unknown scene_id")
                )
                continue
            problem = check(rec, scene)
            if problem is not None:
                quarantine.append(Quarantined(kind, rec.scene_id, problem))
                continue
            kept.append(rec)
        return tuple(kept)

    return Corpus(
        scenes=scene_map,
        references=sift("reference", references, _check_reference),
        qa=sift("qa", qa, _check_qa),
        captions=sift("caption", captions, _check_caption),
        lexicon=lexicon,
        file_hashes=dict(file_hashes or {}),
        rejections=tuple(rejections),
        quarantine=tuple(quarantine),
    )


def load_corpus(
    scene_paths: Sequence[str | Path],
    reference_paths: Sequence[str | Path] = (),
    qa_paths: Sequence[str | Path] = (),
    caption_paths: Sequence[str | Path] = (),
    lexicon_path: str | Path | None = None,
    max_objects: int | None = None,
) -> Corpus:
    """Load every input file, then cross-validate into a single Corpus."""
    lexicon = load_relation_lexicon(lexicon_path)
    hashes: dict[str, str] = {}
    scenes = []
    for path in scene_paths:
        scenes.append(load_scene(path, max_objects=max_objects))
        hashes[str(path)] = file_sha256(path)

    references: list[Sr3dReference] = []
    qa: list[QaRecord] = []
    captions: list[CaptionRecord] = []
    rejections: list[Rejection] = []
    for paths, loader, sink in (
        (reference_paths, lambda p: load_sr3d(p, lexicon), references),
        (qa_paths, load_qa, qa),
        (caption_paths, load_captions, captions),
    ):
        for path in paths:
            result = loader(path)
            sink.extend(result.records)
            rejections.extend(result.rejections)
            hashes[str(path)] = file_sha256(path)
    if lexicon_path is not None:
        hashes[str(lexicon_path)] = file_sha256(lexicon_path)

    return build_corpus(
        scenes,
        references,
        qa,
        captions,
        lexicon=lexicon,
        file_hashes=hashes,
        rejections=rejections,
    )


def load_corpus_dir(root: str | Path, max_objects: int | None = None) -> Corpus:
    """Load a corpus laid out by convention under one directory.

    Expected layout: scenes/*.json plus optional references.jsonl,
    qa.jsonl, captions.jsonl, and relations.json at the top level.
    """
    root = Path(root)
    scene_dir = root / "scenes"
    if not scene_dir.is_dir():
        raise CorpusError(f"no scenes/ directory under {root}")
    scene_paths = sorted(scene_dir.glob("*.json"))
    if not scene_paths:
        raise CorpusError(f"no scene files in {scene_dir}")

    def optional(name: str) -> list[Path]:
        path = root / name
        return [path] if path.is_file() else []

    lexicon = root / "relations.json"
    return load_corpus(
        scene_paths,
        reference_paths=optional("references.jsonl"),
        qa_paths=optional("qa.jsonl"),
        caption_paths=optional("captions.jsonl"),
        lexicon_path=lexicon if lexicon.is_file() else None,
        max_objects=max_objects,
    )
