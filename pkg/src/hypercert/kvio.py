"""Line-oriented key=value text IO shared by config and artifact files.

The format: one ``key = value`` pair per line, ``#`` starts a comment,
blank lines ignored. Keys are dotted lowercase identifiers. Float arrays
are space-separated decimals printed with 17 significant digits so f64
values round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import IoFailure, MalformedFile

_KEY_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789_.-")


def fmt_float(v: float) -> str:
    return f"{float(v):.17g}"


def fmt_floats(values) -> str:
    return " ".join(fmt_float(v) for v in np.asarray(values, dtype=np.float64).ravel())


def parse_floats(text: str, expect: int = -1, where: str = "") -> np.ndarray:
    parts = text.split()
    try:
        arr = np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise MalformedFile(f"{where}: bad float ({exc})") from None
    if expect >= 0 and arr.size != expect:
        raise MalformedFile(f"{where}: expected {expect} values, found {arr.size}")
    return arr


def format_kv(pairs) -> str:
    """Render (key, value) pairs; iteration order is preserved."""
    lines = []
    if isinstance(pairs, dict):
        pairs = pairs.items()
    for key, value in pairs:
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def parse_kv(text: str, source: str = "<string>") -> dict:
    """Parse key=value lines into an insertion-ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedFile(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not set(key) <= _KEY_CHARS:
            raise MalformedFile(f"{source}:{lineno}: bad key {key!r}")
        if key in out:
            raise MalformedFile(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
