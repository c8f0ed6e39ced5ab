"""embedder: labeled utterances -> EMB1 binary embedding files.

Extraction runs pinned sentence encoders deterministically and writes the
byte-exact container the verification toolkit ingests; a stub encoder keeps
the whole pipeline testable offline.
"""

from .embformat import EmbRecord, FormatReport, verify_format, write_emb
from .encoders import StubEncoder, build_encoder
from .errors import (
    DimMismatch,
    DuplicateId,
    EmbedderError,
    EncoderUnavailable,
    MalformedFile,
    NonFiniteValue,
    UnknownLabel,
)
from .extract import extract, record_id
from .lockfile import EncoderSpec, parse_lock, resolve_spec, write_lock
from .rawdata import RawUtterance, count_by_partition, normalize_label, read_raw_csv

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
