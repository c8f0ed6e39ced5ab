import numpy as np
import pytest

from hypercert.dataset import Label, Split, split_arrays
from hypercert.errors import BadSpec
from hypercert.network import linear_probe
from hypercert.synth import class_means, generate


class TestGenerate:
    def test_counts_and_split_fraction(self):
        ds = generate(dim=4, n_positive=50, n_negative=40, n_ambiguous=30,
                      separation=8.0, scale=1.0, anisotropy=1.0, noise=0.0,
                      test_fraction=0.2, seed=0)
        assert len(ds) == 120
        counts = ds.counts()
        assert counts[(Split.TRAIN, Label.POSITIVE)] == 40
        assert counts[(Split.TEST, Label.POSITIVE)] == 10
        assert counts[(Split.TRAIN, Label.NEGATIVE)] == 32
        assert counts[(Split.TRAIN, Label.AMBIGUOUS)] == 24

    def test_byte_identical_regeneration(self, tmp_path):
        from hypercert.dataset import save
        kwargs = dict(dim=6, n_positive=30, n_negative=30, n_ambiguous=30,
                      separation=6.0, scale=1.0, anisotropy=0.8, noise=0.1,
                      test_fraction=0.3, seed=42)
        a, b = tmp_path / "a.emb", tmp_path / "b.emb"
        save(generate(**kwargs), a)
        save(generate(**kwargs), b)
        assert a.read_bytes() == b.read_bytes()

    def test_vectors_are_f32_exact(self):
        ds = generate(dim=3, n_positive=10, n_negative=10, n_ambiguous=10,
                      separation=8.0, scale=1.0, anisotropy=1.0, noise=0.0,
                      test_fraction=0.3, seed=1)
        for r in ds.records:
            np.testing.assert_array_equal(r.vector, r.vector.astype(np.float32))

    def test_noise_flips_expected_share(self):
        ds = generate(dim=2, n_positive=2000, n_negative=2000, n_ambiguous=2000,
                      separation=50.0, scale=1.0, anisotropy=1.0, noise=0.1,
                      test_fraction=0.5, seed=3)
        means = class_means(2, 50.0, 1.0)
        flipped = 0
        for r in ds.records:
            true_label = min(means, key=lambda lab: np.linalg.norm(r.vector - means[lab]))
            flipped += r.label is not true_label
        assert flipped / len(ds) == pytest.approx(0.1, abs=0.02)

    def test_zero_noise_perfectly_separable(self):
        ds = generate(dim=2, n_positive=100, n_negative=100, n_ambiguous=100,
                      separation=10.0, scale=1.0, anisotropy=1.0, noise=0.0,
                      test_fraction=0.3, seed=5)
        report = linear_probe(ds, mode="all-data", seed=0, epochs=200)
        assert report.accuracy == 1.0

    def test_probe_accuracy_tracks_label_noise(self):
        # with separation >> sigma, probe errors come from flipped labels alone
        accs = []
        for seed in range(10):
            ds = generate(dim=8, n_positive=200, n_negative=200, n_ambiguous=200,
                          separation=12.0, scale=1.0, anisotropy=1.0, noise=0.05,
                          test_fraction=0.3, seed=seed)
            accs.append(linear_probe(ds, mode="all-data", seed=0, epochs=120).accuracy)
        mean = float(np.mean(accs))
        assert 0.93 <= mean <= 0.97

    def test_anisotropy_scales_widths(self):
        ds = generate(dim=4, n_positive=4000, n_negative=10, n_ambiguous=10,
                      separation=8.0, scale=1.0, anisotropy=0.25, noise=0.0,
                      test_fraction=0.01, seed=7)
        X, y = split_arrays(ds, Split.TRAIN)
        pos = X[y == 0][:3900]
        stds = pos.std(axis=0)
        ratios = stds / stds[0]
        expected = 0.25 ** (np.arange(4) / 3.0)
        np.testing.assert_allclose(ratios, expected, rtol=0.1)

    def test_validation(self):
        with pytest.raises(BadSpec):
            generate(dim=0, n_positive=1, n_negative=1, n_ambiguous=1,
                     separation=1.0, scale=1.0, anisotropy=1.0, noise=0.0,
                     test_fraction=0.5, seed=0)
        with pytest.raises(BadSpec):
            generate(dim=2, n_positive=1, n_negative=1, n_ambiguous=1,
                     separation=1.0, scale=1.0, anisotropy=1.0, noise=1.5,
                     test_fraction=0.5, seed=0)

    def test_ids_unique_and_prefixed(self):
        ds = generate(dim=2, n_positive=5, n_negative=5, n_ambiguous=5,
                      separation=8.0, scale=1.0, anisotropy=1.0, noise=0.0,
                      test_fraction=0.2, seed=0)
        ids = [r.id for r in ds.records]
        assert len(set(ids)) == len(ids)
        assert any(i.startswith("pos-") for i in ids)
        assert any(i.startswith("neg-") for i in ids)
        assert any(i.startswith("amb-") for i in ids)


class TestClassMeans:
    def test_equilateral_triangle(self):
        means = class_means(5, separation=8.0, scale=1.0)
        pts = list(means.values())
        d01 = np.linalg.norm(pts[0] - pts[1])
        d02 = np.linalg.norm(pts[0] - pts[2])
        d12 = np.linalg.norm(pts[1] - pts[2])
        assert d01 == pytest.approx(8.0, rel=1e-6)
        assert d02 == pytest.approx(8.0, rel=1e-6)
        assert d12 == pytest.approx(8.0, rel=1e-6)
