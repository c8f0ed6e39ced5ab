"""Raw utterances -> EMB1 embedding file.

Record ids are stable hashes of (split, row index, text), so re-running the
same extraction reproduces the same file and two different rows never
collide even when their text matches. Output does not depend on the
encoding batch size; vectors are written exactly as the encoder produced
them (f32), unless L2 normalization is requested explicitly.
"""

import hashlib

import numpy as np

from .embformat import EmbRecord, write_emb
from .encoders import build_encoder
from .errors import DimMismatch, NonFiniteValue
from .lockfile import EncoderSpec
from .rawdata import count_by_partition, read_raw_csv


def record_id(split: str, index: int, text: str) -> str:
    digest = hashlib.sha256(f"{split}|{index}|{text}".encode("utf-8")).hexdigest()
    return digest[:16]


def extract(raw_path, spec: EncoderSpec, out_path, *, normalize: bool = False,
            batch_size: int = 32, encoder=None) -> dict:
    """Embed every utterance of a raw CSV and write the EMB1 file.

    ``encoder`` overrides the model ``spec`` names (tests inject stand-ins).
    Returns the (split, label) -> count partition map of what was written.
    """
    rows = read_raw_csv(raw_path)
    if encoder is None:
        encoder = build_encoder(spec)
    vectors = np.empty((len(rows), spec.dim), dtype=np.float32)
    for start in range(0, len(rows), batch_size):
        batch = rows[start:start + batch_size]
        out = np.asarray(encoder.encode([row.text for row in batch],
                                        batch_size=batch_size), dtype=np.float32)
        if out.shape != (len(batch), spec.dim):
            raise DimMismatch(f"encoder emitted shape {out.shape}, "
                              f"expected ({len(batch)}, {spec.dim})")
        vectors[start:start + len(batch)] = out
    if not np.isfinite(vectors).all():
        bad = int(np.argwhere(~np.isfinite(vectors).all(axis=1))[0, 0])
        raise NonFiniteValue(f"encoder produced a non-finite component at record {bad}")
    if normalize:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1, keepdims=True)
        if (norms == 0).any():
            bad = int(np.argwhere(norms[:, 0] == 0)[0, 0])
            raise NonFiniteValue(f"cannot normalize zero vector at record {bad}")
        vectors = (vectors / norms).astype(np.float32)
    records = [
        EmbRecord(record_id(row.split, row.index, row.text), row.label, row.split, vectors[i])
        for i, row in enumerate(rows)
    ]
    write_emb(out_path, spec.dim, records)
    return count_by_partition(rows)
