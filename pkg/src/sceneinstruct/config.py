"""Config files: one KEY=VALUE pair per line, # comments, flags win.

Values stay strings until a typed getter pulls them out, so the file
format has no quoting or escaping rules to remember. Command-line flags
override file values through merge_config.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from .errors import ConfigError

_BOOL_WORDS = {
    "1": True, "true": True, "yes": True, "on": True,
    "0": False, "false": False, "no": False, "off": False,
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(
                f"{source}:{line_no}: expected KEY=VALUE, got {raw.strip()!r}"
            )
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{line_no}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
        values[key] = value.strip()
    return values


def load_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config_text(text, source=str(path))


def merge_config(
    file_values: Mapping[str, str], overrides: Mapping[str, object]
) -> dict[str, object]:
    """File values with every non-None override on top."""
    merged: dict[str, object] = dict(file_values)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def get_int(values: Mapping[str, object], key: str, default: int) -> int:
    if key not in values:
        return default
    raw = values[key]
    if isinstance(raw, bool):
        raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}")
    if isinstance(raw, int):
        return raw
    try:
        return int(str(raw), 10)
    except ValueError as err:
        raise ConfigError(
            f"config key {key!r}: expected an integer, got {raw!r}"
        ) from err


def get_float(values: Mapping[str, object], key: str, default: float) -> float:
    if key not in values:
        return default
    raw = values[key]
    if isinstance(raw, bool):
        raise ConfigError(f"config key {key!r}: expected a number, got {raw!r}")
    if isinstance(raw, (int, float)):
        return float(raw)
    try:
        return float(str(raw))
    except ValueError as err:
        raise ConfigError(
            f"config key {key!r}: expected a number, got {raw!r}"
        ) from err


def get_bool(values: Mapping[str, object], key: str, default: bool) -> bool:
    if key not in values:
        return default
    raw = values[key]
    if isinstance(raw, bool):
        return raw
    word = str(raw).strip().lower()
    if word in _BOOL_WORDS:
        return _BOOL_WORDS[word]
    raise ConfigError(f"config key {key!r}: expected true/false, got {raw!r}")


def get_str(values: Mapping[str, object], key: str, default: str | None) -> str | None:
    if key not in values:
        return default
    return str(values[key])
