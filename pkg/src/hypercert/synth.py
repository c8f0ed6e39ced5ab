"""Synthetic embedding datasets: a desk-scale stand-in for real encoders.

Three Gaussian blobs (positive, negative, ambiguous) sit at the corners of
an equilateral triangle with side separation * scale, so the classes are
linearly separable at zero noise and "almost" separable once a label-noise
rate flips a fraction of labels uniformly to one of the other two classes.
Per-dimension spread decays geometrically (sigma_i = scale * anisotropy^(i/(dim-1)))
to mimic the uneven variance of real embedding coordinates.

Vectors are quantized to f32 on creation so the in-memory dataset is
bit-identical to a save/load round trip through the binary format.
"""

from __future__ import annotations

import numpy as np

from .dataset import EmbeddingDataset, EmbeddingRecord, Label, Split
from .errors import BadSpec

_CLASS_ORDER = (Label.POSITIVE, Label.NEGATIVE, Label.AMBIGUOUS)
_ID_PREFIX = {Label.POSITIVE: "pos", Label.NEGATIVE: "neg", Label.AMBIGUOUS: "amb"}


def class_means(dim: int, separation: float, scale: float) -> dict:
    """Blob centers: an equilateral triangle of side separation*scale in the
    first two coordinates (degenerate to a segment at dim=1)."""
    side = separation * scale
    means = {label: np.zeros(dim) for label in _CLASS_ORDER}
    means[Label.POSITIVE][0] = +side / 2.0
    means[Label.NEGATIVE][0] = -side / 2.0
    if dim >= 2:
        means[Label.AMBIGUOUS][1] = side * np.sqrt(3.0) / 2.0
    return means


def generate(dim: int, n_positive: int, n_negative: int, n_ambiguous: int,
             separation: float, scale: float, anisotropy: float,
             noise: float, test_fraction: float, seed: int) -> EmbeddingDataset:
    """Deterministic synthetic dataset; see the module docstring."""
    if dim < 1:
        raise BadSpec(f"dim must be >= 1, got {dim}")
    counts = {
        Label.POSITIVE: n_positive,
        Label.NEGATIVE: n_negative,
        Label.AMBIGUOUS: n_ambiguous,
    }
    if any(c < 0 for c in counts.values()):
        raise BadSpec("class counts must be >= 0")
    if sum(counts.values()) == 0:
        raise BadSpec("at least one class count must be positive")
    if not 0.0 <= test_fraction < 1.0:
        raise BadSpec(f"test_fraction must be in [0, 1), got {test_fraction}")
    if not 0.0 <= noise < 1.0:
        raise BadSpec(f"noise must be in [0, 1), got {noise}")
    if scale <= 0 or separation < 0:
        raise BadSpec("scale must be positive and separation non-negative")
    if not 0.0 < anisotropy <= 1.0:
        raise BadSpec(f"anisotropy must be in (0, 1], got {anisotropy}")

    rng = np.random.default_rng(seed)
    exponents = np.arange(dim) / (dim - 1) if dim > 1 else np.zeros(1)
    sigma = scale * anisotropy ** exponents
    means = class_means(dim, separation, scale)

    records = []
    for label in _CLASS_ORDER:
        n = counts[label]
        if n == 0:
            continue
        vectors = means[label] + rng.standard_normal((n, dim)) * sigma
        flip = rng.random(n) < noise
        offsets = rng.integers(1, 3, size=n)  # which of the other two classes
        n_train = n - int(round(test_fraction * n))
        for i in range(n):
            final = Label((int(label) + int(offsets[i])) % 3) if flip[i] else label
            split = Split.TRAIN if i < n_train else Split.TEST
            vec = vectors[i].astype(np.float32).astype(np.float64)
            records.append(
                EmbeddingRecord(f"{_ID_PREFIX[label]}-{i:05d}", final, split, vec)
            )
    return EmbeddingDataset(dim, records)


def generate_from_config(config, seed: int) -> EmbeddingDataset:
    return generate(
        dim=config.get("synth.dim"),
        n_positive=config.get("synth.n_positive"),
        n_negative=config.get("synth.n_negative"),
        n_ambiguous=config.get("synth.n_ambiguous"),
        separation=config.get("synth.separation"),
        scale=config.get("synth.scale"),
        anisotropy=config.get("synth.anisotropy"),
        noise=config.get("synth.noise"),
        test_fraction=config.get("synth.test_fraction"),
        seed=seed,
    )
