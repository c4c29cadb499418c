"""Object-ID token formatting and extraction.

Every object in a scene is addressed by a special token of the form
``<OBJ007>`` (zero-padded, three digits).  This is the single canonical
rendering used by generators, the sequence assembler, and the answer
parser, so round-trips are exact.
"""

from __future__ import annotations

import re

# Strict form emitted by the engine: at least three digits, zero-padded.
ID_TOKEN_RE = re.compile(r"<OBJ(\d{3,})>")
# Loose form used to flag near-miss tokens (wrong case, missing digits, ...).
_LOOSE_TOKEN_RE = re.compile(r"<[Oo][Bb][Jj][^<>]*>")


def id_token(object_id: int) -> str:
    """Render the canonical token for an object id, e.g. 7 -> ``<OBJ007>``."""
    if object_id < 0:
        raise ValueError(f"object id must be non-negative, got {object_id}")
    return f"<OBJ{object_id:03d}>"


def _canonical_matches(text: str):
    for m in ID_TOKEN_RE.finditer(text):
        if id_token(int(m.group(1))) == m.group(0):
            yield m


def extract_ids(text: str) -> list[int]:
    """All object ids referenced in *text*, in order of appearance.

    Only exact canonical tokens count; near-misses like ``<OBJ0012>`` are
    left for find_malformed_tokens to report.
    """
    return [int(m.group(1)) for m in _canonical_matches(text)]


def find_malformed_tokens(text: str) -> list[str]:
    """Near-miss object tokens that do not match the canonical form.

    A token is canonical only if re-rendering its id reproduces it exactly,
    which rules out wrong case, short digit runs, and over-padded ids like
    ``<OBJ0012>``.
    """
    bad = []
    for m in _LOOSE_TOKEN_RE.finditer(text):
        token = m.group(0)
        strict = ID_TOKEN_RE.fullmatch(token)
        if strict is None or id_token(int(strict.group(1))) != token:
            bad.append(token)
    return bad


def strip_id_tokens(text: str) -> str:
    """Remove every canonical object token from *text*."""
    out = []
    last = 0
    for m in _canonical_matches(text):
        out.append(text[last : m.start()])
        last = m.end()
    out.append(text[last:])
    return "".join(out)


def join_id_tokens(object_ids) -> str:
    """Space-separated token run for a sequence of ids."""
    return " ".join(id_token(i) for i in object_ids)


def indefinite(noun: str) -> str:
    """Prefix a noun with its indefinite article, e.g. "a chair"."""
    if not noun:
        raise ValueError("empty noun")
    article = "an" if noun[0].lower() in "aeiou" else "a"
    return f"{article} {noun}"
