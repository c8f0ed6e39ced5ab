"""Labeled embedding vectors and their interchange formats.

Two on-disk formats are supported:

* binary: magic ``EMB1``, little-endian u32 version (=1), u32 record count,
  u32 dimension, then per record a u16 id length, the UTF-8 id bytes, a u8
  label (0=Positive, 1=Negative, 2=Ambiguous), a u8 split (0=Train, 1=Test)
  and ``dim`` little-endian f32 components. This is the bit-exact contract
  shared with external extractors.
* csv: header ``id,label,split,e0,...,e{dim-1}``, labels spelled out, floats
  printed at f32 precision. Meant for inspection and spreadsheet diffing.

Vectors are stored as f32 on disk and promoted to f64 in memory so that
covariance and interval arithmetic do not compound single-precision error.
Datasets are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    DuplicateId,
    IoFailure,
    MalformedFile,
    NonFiniteValue,
)

MAGIC = b"EMB1"
FORMAT_VERSION = 1
MAX_ID_BYTES = 0xFFFF

_HEADER = struct.Struct("<4sIII")
_ID_LEN = struct.Struct("<H")
_LABEL_SPLIT = struct.Struct("<BB")


class Label(IntEnum):
    """Three-way annotation; the binary view merges Ambiguous into Positive."""

    POSITIVE = 0
    NEGATIVE = 1
    AMBIGUOUS = 2

    def to_binary(self) -> "Label":
        return Label.POSITIVE if self is Label.AMBIGUOUS else self

    def spell(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Label":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise MalformedFile(f"unknown label {text!r}") from None


class Split(IntEnum):
    TRAIN = 0
    TEST = 1

    def spell(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "Split":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise MalformedFile(f"unknown split {text!r}") from None


@dataclass(eq=False)
class EmbeddingRecord:
    """One labeled vector. ``vector`` is float64 and read-only."""

    id: str
    label: Label
    split: Split
    vector: np.ndarray

    def __post_init__(self):
        vec = np.atleast_1d(np.asarray(self.vector, dtype=np.float64))
        if vec.ndim != 1:
            raise DimMismatch(f"record {self.id!r} vector must be one-dimensional")
        vec.flags.writeable = False
        self.vector = vec
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValue(f"record {self.id!r} has a non-finite component")

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.split == other.split
            and np.array_equal(self.vector, other.vector)
        )


@dataclass(eq=False)
class EmbeddingDataset:
    """A fixed-dimension collection of records with unique ids."""

    dim: int
    records: tuple

    def __init__(self, dim: int, records):
        if dim <= 0:
            raise DimMismatch(f"dimension must be positive, got {dim}")
        records = tuple(records)
        seen = set()
        for rec in records:
            if rec.vector.shape != (dim,):
                raise DimMismatch(
                    f"record {rec.id!r} has {rec.vector.shape[0]} components, expected {dim}"
                )
            if rec.id in seen:
                raise DuplicateId(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
        self.dim = dim
        self.records = records

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingDataset):
            return NotImplemented
        return self.dim == other.dim and self.records == other.records

    def counts(self) -> dict:
        """Record count per (split, label) pair."""
        out = {}
        for rec in self.records:
            key = (rec.split, rec.label)
            out[key] = out.get(key, 0) + 1
        return out


def partition(dataset: EmbeddingDataset, split: Split, label: Label,
              three_way: bool = False) -> np.ndarray:
    """Vectors matching both filters, row-stacked and ordered by record id.

    With ``three_way=False`` the label filter applies to the binary view
    (Ambiguous counts as Positive); with ``three_way=True`` it matches the
    stored label exactly.
    """
    chosen = []
    for rec in dataset.records:
        if rec.split is not split:
            continue
        rec_label = rec.label if three_way else rec.label.to_binary()
        if rec_label is label:
            chosen.append(rec)
    chosen.sort(key=lambda r: r.id)
    if not chosen:
        return np.empty((0, dataset.dim), dtype=np.float64)
    return np.stack([r.vector for r in chosen])


def split_arrays(dataset: EmbeddingDataset, split: Split,
                 three_way: bool = False) -> tuple:
    """(X, y) arrays for one split, ordered by record id.

    ``y`` holds binary class indices by default (Positive=0, Negative=1) or
    the three-way label value with ``three_way=True``.
    """
    recs = sorted((r for r in dataset.records if r.split is split), key=lambda r: r.id)
    if not recs:
        return (np.empty((0, dataset.dim)), np.empty((0,), dtype=np.int64))
    X = np.stack([r.vector for r in recs])
    if three_way:
        y = np.array([int(r.label) for r in recs], dtype=np.int64)
    else:
        y = np.array([int(r.label.to_binary()) for r in recs], dtype=np.int64)
    return X, y


def all_arrays(dataset: EmbeddingDataset, three_way: bool = False) -> tuple:
    """(X, y) over every record regardless of split, ordered by record id."""
    recs = sorted(dataset.records, key=lambda r: r.id)
    if not recs:
        return (np.empty((0, dataset.dim)), np.empty((0,), dtype=np.int64))
    X = np.stack([r.vector for r in recs])
    if three_way:
        y = np.array([int(r.label) for r in recs], dtype=np.int64)
    else:
        y = np.array([int(r.label.to_binary()) for r in recs], dtype=np.int64)
    return X, y


def load(path, format: str = "binary") -> EmbeddingDataset:
    """Load a dataset file; see the module docstring for the formats."""
    path = Path(path)
    if format == "binary":
        return _load_binary(path)
    if format == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown format {format!r}")


def save(dataset: EmbeddingDataset, path, format: str = "binary") -> None:
    """Write a dataset file such that ``load(save(d)) == d``."""
    path = Path(path)
    if format == "binary":
        _save_binary(dataset, path)
    elif format == "csv":
        _save_csv(dataset, path)
    else:
        raise ValueError(f"unknown format {format!r}")


def _read_file(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _load_binary(path: Path) -> EmbeddingDataset:
    buf = _read_file(path)
    if len(buf) < _HEADER.size:
        raise MalformedFile(f"{path}: file too short for header ({len(buf)} bytes)")
    magic, version, count, dim = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise MalformedFile(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise MalformedFile(f"{path}: unsupported version {version}")
    if dim == 0:
        raise MalformedFile(f"{path}: zero dimension in header")
    offset = _HEADER.size
    vec_bytes = 4 * dim
    records = []
    for i in range(count):
        if offset + _ID_LEN.size > len(buf):
            raise MalformedFile(f"{path}: truncated at record {i}, byte {offset}")
        (id_len,) = _ID_LEN.unpack_from(buf, offset)
        offset += _ID_LEN.size
        end = offset + id_len + _LABEL_SPLIT.size + vec_bytes
        if end > len(buf):
            raise MalformedFile(f"{path}: truncated at record {i}, byte {offset}")
        try:
            rec_id = buf[offset:offset + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFile(f"{path}: record {i} id is not UTF-8") from exc
        offset += id_len
        label_code, split_code = _LABEL_SPLIT.unpack_from(buf, offset)
        offset += _LABEL_SPLIT.size
        if label_code > 2:
            raise MalformedFile(f"{path}: record {i} has label code {label_code}")
        if split_code > 1:
            raise MalformedFile(f"{path}: record {i} has split code {split_code}")
        vec32 = np.frombuffer(buf, dtype="<f4", count=dim, offset=offset)
        offset += vec_bytes
        if not np.all(np.isfinite(vec32)):
            raise NonFiniteValue(f"{path}: non-finite component in record {i} ({rec_id!r})")
        records.append(
            EmbeddingRecord(rec_id, Label(label_code), Split(split_code),
                            vec32.astype(np.float64))
        )
    if offset != len(buf):
        raise MalformedFile(f"{path}: {len(buf) - offset} trailing bytes after record {count - 1}")
    return EmbeddingDataset(dim, records)


def _save_binary(dataset: EmbeddingDataset, path: Path) -> None:
    parts = [_HEADER.pack(MAGIC, FORMAT_VERSION, len(dataset.records), dataset.dim)]
    for rec in dataset.records:
        id_bytes = rec.id.encode("utf-8")
        if len(id_bytes) > MAX_ID_BYTES:
            raise MalformedFile(f"record id {rec.id[:32]!r}... exceeds {MAX_ID_BYTES} bytes")
        vec32 = rec.vector.astype("<f4")
        if not np.all(np.isfinite(vec32)):
            raise NonFiniteValue(f"record {rec.id!r} is not representable as f32")
        parts.append(_ID_LEN.pack(len(id_bytes)))
        parts.append(id_bytes)
        parts.append(_LABEL_SPLIT.pack(int(rec.label), int(rec.split)))
        parts.append(vec32.tobytes())
    try:
        path.write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _format_component(value: float) -> str:
    # shortest decimal that round-trips through f32
    return str(np.float32(value))


def _load_csv(path: Path) -> EmbeddingDataset:
    text = _read_file(path).decode("utf-8")
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedFile(f"{path}: empty file") from None
    if len(header) < 4 or header[:3] != ["id", "label", "split"]:
        raise MalformedFile(f"{path}: bad header {header[:4]!r}")
    dim = len(header) - 3
    for i, name in enumerate(header[3:]):
        if name != f"e{i}":
            raise MalformedFile(f"{path}: expected column e{i}, found {name!r}")
    records = []
    for row_no, row in enumerate(reader):
        if len(row) != 3 + dim:
            raise MalformedFile(
                f"{path}: row {row_no} has {len(row)} fields, expected {3 + dim}"
            )
        rec_id, label, split = row[0], Label.parse(row[1]), Split.parse(row[2])
        try:
            vec64 = np.array([float(v) for v in row[3:]], dtype=np.float64)
        except ValueError as exc:
            raise MalformedFile(f"{path}: row {row_no}: {exc}") from exc
        vec32 = vec64.astype(np.float32)
        if not np.all(np.isfinite(vec32)):
            raise NonFiniteValue(f"{path}: non-finite component in row {row_no} ({rec_id!r})")
        records.append(EmbeddingRecord(rec_id, label, split, vec32.astype(np.float64)))
    return EmbeddingDataset(dim, records)


def _save_csv(dataset: EmbeddingDataset, path: Path) -> None:
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "label", "split"] + [f"e{i}" for i in range(dataset.dim)])
            for rec in dataset.records:
                vec32 = rec.vector.astype(np.float32)
                if not np.all(np.isfinite(vec32)):
                    raise NonFiniteValue(f"record {rec.id!r} is not representable as f32")
                writer.writerow(
                    [rec.id, rec.label.spell(), rec.split.spell()]
                    + [_format_component(v) for v in vec32]
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
