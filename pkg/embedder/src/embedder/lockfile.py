"""models.lock parsing: the committed registry of usable encoders."""

from dataclasses import dataclass
from pathlib import Path

from .errors import MalformedFile

DEFAULT_LOCK = Path(__file__).resolve().parents[2] / "models.lock"


@dataclass(frozen=True)
class EncoderSpec:
    alias: str
    model: str       # model id, or "stub" for the offline stand-in
    dim: int
    revision: str    # repository revision, or "unpinned"/"builtin"

    def describe(self) -> str:
        return f"{self.model}@{self.revision}"


def parse_lock(path=None) -> dict:
    """alias -> EncoderSpec from a lock file (the committed one by default)."""
    path = Path(path) if path is not None else DEFAULT_LOCK
    fields = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise MalformedFile(f"{path}:{lineno}: expected key = value")
        alias, dot, field = key.strip().partition(".")
        if not dot or field not in ("model", "dim", "revision"):
            raise MalformedFile(f"{path}:{lineno}: key must be alias.model|dim|revision")
        fields.setdefault(alias, {})[field] = value.strip()
    specs = {}
    for alias, entry in fields.items():
        missing = {"model", "dim", "revision"} - set(entry)
        if missing:
            raise MalformedFile(f"{path}: entry {alias!r} lacks {', '.join(sorted(missing))}")
        try:
            dim = int(entry["dim"])
        except ValueError:
            raise MalformedFile(f"{path}: entry {alias!r} has non-integer dim {entry['dim']!r}") from None
        if dim < 1:
            raise MalformedFile(f"{path}: entry {alias!r} has non-positive dim")
        specs[alias] = EncoderSpec(alias, entry["model"], dim, entry["revision"])
    return specs


def write_lock(path, specs: dict) -> None:
    lines = ["# Pinned sentence encoders (regenerate with `embedder lock`).", ""]
    for alias in sorted(specs):
        spec = specs[alias]
        lines += [f"{alias}.model = {spec.model}",
                  f"{alias}.dim = {spec.dim}",
                  f"{alias}.revision = {spec.revision}",
                  ""]
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def resolve_spec(name: str, specs: dict) -> EncoderSpec:
    """Look up an encoder by alias or full model id."""
    if name in specs:
        return specs[name]
    for spec in specs.values():
        if spec.model == name:
            return spec
    known = ", ".join(sorted(specs))
    raise MalformedFile(f"unknown encoder {name!r}; aliases: {known}")


__all__ = ["EncoderSpec", "parse_lock", "write_lock", "resolve_spec", "DEFAULT_LOCK"]
