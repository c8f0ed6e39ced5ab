"""Raw utterance input: CSV with text, label, and split columns.

The label vocabulary is normalized case-insensitively; qualified spellings
such as "ambiguous_if_clarify" count as their leading word. Splits must
normalize to train or test; merge validation rows upstream if you have them.
"""

import csv
from dataclasses import dataclass

from .errors import MalformedFile, UnknownLabel

LABELS = ("positive", "negative", "ambiguous")
SPLITS = ("train", "test")

_LABEL_SHORTHAND = {"p": "positive", "n": "negative", "a": "ambiguous"}


@dataclass(frozen=True)
class RawUtterance:
    text: str
    label: str      # one of LABELS
    split: str      # one of SPLITS
    index: int      # 0-based row position in the source file


def normalize_label(value: str) -> str:
    token = value.strip().lower()
    token = _LABEL_SHORTHAND.get(token, token)
    head = token.split("_", 1)[0]
    if head in LABELS:
        return head
    raise UnknownLabel(f"label {value!r} does not normalize to one of {', '.join(LABELS)}")


def normalize_split(value: str) -> str:
    token = value.strip().lower()
    if token in SPLITS:
        return token
    raise UnknownLabel(f"split {value!r} does not normalize to train or test")


def read_raw_csv(path) -> list:
    """Parse a raw utterance CSV into RawUtterance rows.

    Requires a header naming text, label, and split columns (any order,
    extra columns ignored). Empty text is rejected; blank lines are not.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise MalformedFile(f"{path}: empty file, expected a header row")
        missing = {"text", "label", "split"} - set(reader.fieldnames)
        if missing:
            raise MalformedFile(f"{path}: header lacks column(s) {', '.join(sorted(missing))}")
        rows = []
        for i, row in enumerate(reader):
            text = (row["text"] or "").strip()
            if not text:
                raise MalformedFile(f"{path}: row {i + 2} has empty text")
            try:
                label = normalize_label(row["label"] or "")
                split = normalize_split(row["split"] or "")
            except UnknownLabel as exc:
                raise UnknownLabel(f"{path}: row {i + 2}: {exc}") from None
            rows.append(RawUtterance(text, label, split, i))
    return rows


def count_by_partition(rows) -> dict:
    """(split, label) -> count, for conservation checks against the output."""
    counts = {}
    for row in rows:
        key = (row.split, row.label)
        counts[key] = counts.get(key, 0) + 1
    return counts
