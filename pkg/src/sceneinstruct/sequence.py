"""LLM-ready token layouts for object-grounded instructions.

Object identities live in a fixed vocabulary of special tokens. Each
object's vision features enter the sequence wrapped between two identical
ID tokens, and the whole vision block sits after the question so that
answer tokens can attend to every object. This module shuffles symbols
only; it never touches raw feature values or tokenizes prose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import SequenceError
from .tokens import ID_TOKEN_RE, id_token

SEGMENT_KINDS = ("system", "question", "vision", "answer")

# inner layout of one wrapped object; 2d-first kept as an ablation knob
FEATURE_ORDER_3D_FIRST = ("3d", "2d")
FEATURE_ORDER_2D_FIRST = ("2d", "3d")

_PLACEHOLDER_OF = {"3d": "F3D", "2d": "F2D"}


@dataclass(frozen=True)
class FeatureToken:
    """Symbolic handle to one feature vector; renders as [F3D:i] / [F2D:i]."""

    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in _PLACEHOLDER_OF:
            raise SequenceError(f"unknown feature kind {self.kind!r}")
        if self.index < 0:
            raise SequenceError("feature index must be non-negative")

    def render(self) -> str:
        return f"[{_PLACEHOLDER_OF[self.kind]}:{self.index}]"


Token = Union[str, FeatureToken]


def render_token(token: Token) -> str:
    return token.render() if isinstance(token, FeatureToken) else token


@dataclass(frozen=True)
class IdVocabulary:
    """Fixed-size pool of object-ID tokens, one per slot index."""

    n: int = 150
    max_n: int = 150

    def __post_init__(self):
        if self.max_n < 1:
            raise SequenceError("max_n must be positive")
        if not 1 <= self.n <= self.max_n:
            raise SequenceError(
                f"vocabulary size must be in [1, {self.max_n}], got {self.n}"
            )

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(id_token(i) for i in range(self.n))

    def token_for(self, object_id: int) -> str:
        if not 0 <= object_id < self.n:
            raise SequenceError(
                f"object id {object_id} outside vocabulary of {self.n} slots"
            )
        return id_token(object_id)

    def index_of(self, token: str) -> int:
        match = ID_TOKEN_RE.fullmatch(token)
        if match is None or id_token(int(match.group(1))) != token:
            raise SequenceError(f"not a canonical id token: {token!r}")
        index = int(match.group(1))
        if index >= self.n:
            raise SequenceError(f"token {token!r} outside vocabulary of {self.n} slots")
        return index


@dataclass(frozen=True)
class VisionSlot:
    """One object's feature handles: exactly one 3D and one 2D vector."""

    object_id: int
    feat3d: int
    feat2d: int

    def __post_init__(self):
        if self.object_id < 0:
            raise SequenceError("object id must be non-negative")
        if self.feat3d < 0 or self.feat2d < 0:
            raise SequenceError("feature handles must be non-negative")


def wrap_object(
    slot: VisionSlot,
    vocab: IdVocabulary,
    feature_order: tuple[str, str] = FEATURE_ORDER_3D_FIRST,
) -> list[Token]:
    """[<OBJi>, f3d, f2d, <OBJi>]: identical ID token at both ends."""
    if sorted(feature_order) != ["2d", "3d"]:
        raise SequenceError(f"feature order must pair 3d with 2d, got {feature_order}")
    marker = vocab.token_for(slot.object_id)
    handles = {"3d": slot.feat3d, "2d": slot.feat2d}
    inner = [FeatureToken(kind, handles[kind]) for kind in feature_order]
    return [marker, *inner, marker]


@dataclass(frozen=True)
class TokenSequence:
    """Segments in the fixed order system, question, vision, answer."""

    segments: tuple[tuple[str, tuple[Token, ...]], ...]

    def __post_init__(self):
        kinds = tuple(kind for kind, _ in self.segments)
        if kinds != SEGMENT_KINDS:
            raise SequenceError(
                f"segment kinds must be exactly {SEGMENT_KINDS} in order, got {kinds}"
            )
        vision = self.segment("vision")
        if len(vision) % 4:
            raise SequenceError("vision segment length must be a multiple of 4")
        for start in range(0, len(vision), 4):
            head, a, b, tail = vision[start:start + 4]
            if not isinstance(head, str) or head != tail:
                raise SequenceError(
                    f"wrapped object at offset {start} lacks matching end tokens"
                )
            match = ID_TOKEN_RE.fullmatch(head)
            if match is None or id_token(int(match.group(1))) != head:
                raise SequenceError(
                    f"wrapped object at offset {start} has non-canonical id {head!r}"
                )
            if not (isinstance(a, FeatureToken) and isinstance(b, FeatureToken)):
                raise SequenceError(
                    f"wrapped object at offset {start} must hold feature tokens"
                )
            if {a.kind, b.kind} != {"3d", "2d"}:
                raise SequenceError(
                    f"wrapped object at offset {start} needs one 3d and one 2d handle"
                )

    def segment(self, kind: str) -> tuple[Token, ...]:
        for name, tokens in self.segments:
            if name == kind:
                return tokens
        raise SequenceError(f"no segment of kind {kind!r}")

    @property
    def tokens(self) -> tuple[Token, ...]:
        return tuple(tok for _, segment in self.segments for tok in segment)

    def dump(self) -> str:
        """One line per segment: 'kind: tok tok ...'."""
        lines = []
        for kind, tokens in self.segments:
            rendered = " ".join(render_token(t) for t in tokens)
            lines.append(f"{kind}: {rendered}".rstrip())
        return "\n".join(lines)


def assemble(
    system: Sequence[Token],
    question: Sequence[Token],
    slots: Iterable[VisionSlot],
    answer: Sequence[Token],
    vocab: IdVocabulary = IdVocabulary(),
    feature_order: tuple[str, str] = FEATURE_ORDER_3D_FIRST,
) -> TokenSequence:
    """Lay out one training example with the vision block after the question.

    Slots are canonicalized to ascending object id, so any input order
    produces the same sequence.
    """
    ordered = sorted(slots, key=lambda slot: slot.object_id)
    if len(ordered) > vocab.n:
        raise SequenceError(
            f"{len(ordered)} slots exceed the {vocab.n}-token vocabulary"
        )
    ids = [slot.object_id for slot in ordered]
    if len(set(ids)) != len(ids):
        raise SequenceError("duplicate object ids in slot list")
    vision: list[Token] = []
    for slot in ordered:
        vision.extend(wrap_object(slot, vocab, feature_order))
    return TokenSequence(
        segments=(
            ("system", tuple(system)),
            ("question", tuple(question)),
            ("vision", tuple(vision)),
            ("answer", tuple(answer)),
        )
    )


def recover_object_ids(sequence: TokenSequence) -> tuple[int, ...]:
    """Ascending object ids recovered from the vision wrapper tokens."""
    vision = sequence.segment("vision")
    ids = {
        int(ID_TOKEN_RE.fullmatch(tok).group(1))
        for tok in vision[::4]
        if isinstance(tok, str)
    }
    return tuple(sorted(ids))
