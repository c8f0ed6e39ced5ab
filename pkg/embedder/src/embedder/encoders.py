"""Sentence encoders behind one small interface.

Real models load through sentence-transformers at a pinned revision and
run deterministically (eval mode, single-threaded math). The stub encoder
derives each vector from a hash of the text alone, so tests and offline
pipelines get stable embeddings without model downloads. Construction
failures surface as EncoderUnavailable, never as an import error at module
scope.
"""

import hashlib

import numpy as np

from .errors import DimMismatch, EncoderUnavailable
from .lockfile import EncoderSpec


class StubEncoder:
    """Deterministic text -> vector stand-in: hash-seeded Gaussian draws."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec

    def encode(self, texts, batch_size: int = 32) -> np.ndarray:
        out = np.empty((len(texts), self.spec.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            digest = hashlib.sha256(f"{self.spec.model}|{text}".encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "little")
            rng = np.random.default_rng(seed)
            out[i] = rng.standard_normal(self.spec.dim).astype(np.float32)
        return out


class SentenceTransformerEncoder:
    """A pinned sentence-transformers model in deterministic inference mode."""

    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        try:
            import torch
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderUnavailable(f"sentence-transformers not installed: {exc}") from exc
        torch.set_num_threads(1)
        kwargs = {}
        if spec.revision != "unpinned":
            kwargs["revision"] = spec.revision
        try:
            self._model = SentenceTransformer(spec.model, **kwargs)
        except Exception as exc:
            raise EncoderUnavailable(
                f"cannot load {spec.model!r} (offline, or model missing): {exc}"
            ) from exc
        self._model.eval()

    def encode(self, texts, batch_size: int = 32) -> np.ndarray:
        vectors = self._model.encode(
            list(texts), batch_size=batch_size, convert_to_numpy=True,
            normalize_embeddings=False, show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float32)


def build_encoder(spec: EncoderSpec):
    """Instantiate the encoder a spec names and check its emitted dimension."""
    encoder = StubEncoder(spec) if spec.model == "stub" else SentenceTransformerEncoder(spec)
    probe = encoder.encode(["dimension probe"])
    if probe.shape != (1, spec.dim):
        raise DimMismatch(
            f"encoder {spec.model!r} emits dim {probe.shape[-1]}, lockfile says {spec.dim}"
        )
    return encoder
