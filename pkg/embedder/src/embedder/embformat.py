"""The EMB1 binary embedding container, written and validated byte by byte.

Layout, all little-endian: magic "EMB1", u32 version (1), u32 record count,
u32 dimension; per record a u16 id length, the UTF-8 id bytes, a u8 label
(0 positive, 1 negative, 2 ambiguous), a u8 split (0 train, 1 test), and
dimension f32 components. This module is the extractor's own independent
implementation of the contract, so a drifting writer shows up as a
cross-tool incompatibility instead of a shared bug.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, DuplicateId, MalformedFile, NonFiniteValue

MAGIC = b"EMB1"
VERSION = 1
LABEL_CODES = {"positive": 0, "negative": 1, "ambiguous": 2}
SPLIT_CODES = {"train": 0, "test": 1}
_LABEL_NAMES = {v: k for k, v in LABEL_CODES.items()}
_SPLIT_NAMES = {v: k for k, v in SPLIT_CODES.items()}


@dataclass(frozen=True)
class EmbRecord:
    id: str
    label: str      # key of LABEL_CODES
    split: str      # key of SPLIT_CODES
    vector: np.ndarray  # f32, shape (dim,)


def write_emb(path, dim: int, records) -> None:
    """Write records to an EMB1 file; validates ids, labels, and dimensions."""
    records = list(records)
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise DuplicateId(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        if rec.label not in LABEL_CODES:
            raise MalformedFile(f"record {rec.id!r}: bad label {rec.label!r}")
        if rec.split not in SPLIT_CODES:
            raise MalformedFile(f"record {rec.id!r}: bad split {rec.split!r}")
        if rec.vector.shape != (dim,):
            raise DimMismatch(f"record {rec.id!r}: vector shape {rec.vector.shape}, expected ({dim},)")
        if not np.isfinite(rec.vector).all():
            raise NonFiniteValue(f"record {rec.id!r}: non-finite embedding component")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", VERSION, len(records), dim))
        for rec in records:
            id_bytes = rec.id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise MalformedFile(f"record id longer than 65535 bytes: {rec.id[:40]!r}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<BB", LABEL_CODES[rec.label], SPLIT_CODES[rec.split]))
            fh.write(np.ascontiguousarray(rec.vector, dtype="<f4").tobytes())


@dataclass
class FormatReport:
    """Outcome of validating one EMB1 file; ok is False on the first problem."""
    path: str
    ok: bool = True
    dim: int = 0
    count: int = 0
    records_read: int = 0
    partition_counts: dict = field(default_factory=dict)
    problem: str = ""

    def summary(self) -> str:
        if self.ok:
            return f"OK, {self.count} records, dim {self.dim}"
        return f"FAIL {self.path}: {self.problem}"


def verify_format(path) -> FormatReport:
    """Validate structure, label domain, and finiteness; never raises.

    The report carries the first problem found, with the record index and
    byte offset where scanning stopped.
    """
    report = FormatReport(path=str(path))

    def fail(message: str) -> FormatReport:
        report.ok = False
        report.problem = message
        return report

    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        return fail(f"unreadable: {exc}")

    if raw[:4] != MAGIC:
        return fail(f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    if len(raw) < 16:
        return fail(f"truncated header: {len(raw)} bytes, expected at least 16")
    version, count, dim = struct.unpack("<III", raw[4:16])
    if version != VERSION:
        return fail(f"unsupported version {version}")
    if dim < 1:
        return fail(f"dimension must be positive, got {dim}")
    report.dim, report.count = dim, count

    offset = 16
    ids = set()
    vec_bytes = 4 * dim
    for i in range(count):
        if offset + 2 > len(raw):
            return fail(f"truncated at record {i}, byte {offset}")
        (id_len,) = struct.unpack_from("<H", raw, offset)
        offset += 2
        end = offset + id_len + 2 + vec_bytes
        if end > len(raw):
            return fail(f"truncated at record {i}, byte {offset}")
        try:
            rec_id = raw[offset:offset + id_len].decode("utf-8")
        except UnicodeDecodeError:
            return fail(f"record {i}: id is not UTF-8 (byte {offset})")
        offset += id_len
        if rec_id in ids:
            return fail(f"record {i}: duplicate id {rec_id!r}")
        ids.add(rec_id)
        label_code, split_code = raw[offset], raw[offset + 1]
        offset += 2
        if label_code not in _LABEL_NAMES:
            return fail(f"record {i}: unknown label code {label_code}")
        if split_code not in _SPLIT_NAMES:
            return fail(f"record {i}: unknown split code {split_code}")
        vec = np.frombuffer(raw, dtype="<f4", count=dim, offset=offset)
        offset += vec_bytes
        if not np.isfinite(vec).all():
            return fail(f"record {i}: NonFiniteValue in embedding components")
        key = (_SPLIT_NAMES[split_code], _LABEL_NAMES[label_code])
        report.partition_counts[key] = report.partition_counts.get(key, 0) + 1
        report.records_read = i + 1
    if offset != len(raw):
        return fail(f"{len(raw) - offset} trailing bytes after record {count - 1}")
    return report
