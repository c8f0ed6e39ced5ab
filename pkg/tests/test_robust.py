import numpy as np
import pytest

from hypercert import geometry as geo
from hypercert import robust
from hypercert.errors import BadSpec, ConstraintViolation, RejectionExhausted
from hypercert.geometry import Hyperrectangle, RegionSet, RotationTransform
from hypercert.network import Layer, MlpNetwork
from hypercert.robust import (
    AttackConfig,
    AugmentConfig,
    augment_from_regions,
    fgsm,
    make_adversary,
    pgd,
    sample_complement,
    sample_inside,
)


def box(lo, hi):
    return Hyperrectangle(np.asarray(lo, float), np.asarray(hi, float))


def linear_net(W, b=None):
    W = np.asarray(W, float)
    b = np.zeros(W.shape[0]) if b is None else np.asarray(b, float)
    return MlpNetwork([Layer(W, b, "softmax")])


UNIT_SQUARE = box([0.0, 0.0], [1.0, 1.0])
# predicts class 0 exactly when x0 > x1
DIAGONAL_NET = linear_net([[1.0, 0.0], [0.0, 1.0]])


class TestAttackConfig:
    def test_fixed_mode_requires_epsilon(self):
        with pytest.raises(BadSpec):
            AttackConfig(steps=5, mode="fixed")

    def test_bad_mode_rejected(self):
        with pytest.raises(BadSpec):
            AttackConfig(steps=5, mode="sideways")

    def test_fraction_bounds(self):
        with pytest.raises(BadSpec):
            AttackConfig(steps=5, mode="adaptive", fraction=0.0)


class TestSampleInside:
    def test_degenerate_box_returns_the_point(self):
        b = box([0.25, 0.75], [0.25, 0.75])
        X = sample_inside(RegionSet([b]), 16, seed=0)
        assert (X == [0.25, 0.75]).all()

    def test_uniform_mean_on_unit_square(self):
        X = sample_inside(RegionSet([UNIT_SQUARE]), 10_000, seed=1)
        np.testing.assert_allclose(X.mean(axis=0), [0.5, 0.5], atol=0.02)

    def test_all_samples_pass_region_contains(self):
        rot = geo.fit_rotation(np.random.default_rng(0).normal(size=(30, 3)))
        boxes = [box([-1.0] * 3, [1.0] * 3), box([2.0] * 3, [2.5] * 3)]
        regions = RegionSet(boxes, rotation=rot, kind="cluster", k=2)
        X = sample_inside(regions, 500, seed=2)
        assert geo.region_contains_batch(regions, X).all()

    def test_deterministic(self):
        a = sample_inside(RegionSet([UNIT_SQUARE]), 64, seed=3)
        b = sample_inside(RegionSet([UNIT_SQUARE]), 64, seed=3)
        np.testing.assert_array_equal(a, b)


class TestSampleComplement:
    def test_region_equals_envelope_exhausts(self):
        with pytest.raises(RejectionExhausted):
            sample_complement(RegionSet([UNIT_SQUARE]), UNIT_SQUARE, 10, seed=0)

    def test_acceptance_rate_matches_volume_ratio(self):
        inner = box([0.4, 0.4], [0.6, 0.6])  # 4% of the envelope
        X = sample_complement(RegionSet([inner]), UNIT_SQUARE, 20_000, seed=1)
        assert X.shape == (20_000, 2)
        # all outside the inner box, all inside the envelope
        assert not geo.region_contains_batch(RegionSet([inner]), X).any()
        assert geo.contains_batch(UNIT_SQUARE, X).all()

    def test_no_sample_inside_region_rotated(self):
        rot = geo.fit_rotation(np.random.default_rng(2).normal(size=(40, 2)))
        regions = RegionSet([box([-0.5, -0.5], [0.5, 0.5])], rotation=rot)
        envelope = box([-3.0, -3.0], [3.0, 3.0])
        X = sample_complement(regions, envelope, 2_000, seed=3)
        assert not geo.region_contains_batch(regions, X).any()


class TestFgsm:
    def test_zero_epsilon_is_identity(self):
        X = np.array([[0.3, 0.7]])
        out = fgsm(DIAGONAL_NET, X, np.array([0]), 0.0)
        np.testing.assert_array_equal(out, X)

    def test_linear_net_sign_pattern(self):
        # true class 0: loss increases along (w1 - w0) = (-1, 1)
        X = np.array([[0.3, 0.7]])
        out = fgsm(DIAGONAL_NET, X, np.array([0]), 0.25)
        np.testing.assert_allclose(out, [[0.3 - 0.25, 0.7 + 0.25]])

    def test_linf_bound(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 2))
        y = rng.integers(0, 2, size=50)
        out = fgsm(DIAGONAL_NET, X, y, 0.1)
        assert np.abs(out - X).max() <= 0.1 + 1e-15

    def test_per_dimension_epsilon(self):
        X = np.array([[0.0, 0.0]])
        out = fgsm(DIAGONAL_NET, X, np.array([0]), np.array([0.1, 0.4]))
        np.testing.assert_allclose(np.abs(out - X), [[0.1, 0.4]])


class TestPgd:
    def test_single_step_fixed_matches_fgsm_inside_ball(self):
        # step = eps * step_scale / steps lands inside the ball when scale <= 1
        X = np.array([[0.3, 0.7]])
        y = np.array([0])
        cfg = AttackConfig(steps=1, mode="fixed", epsilon=0.2, step_scale=1.0)
        got = pgd(DIAGONAL_NET, X, y, cfg)
        want = fgsm(DIAGONAL_NET, X, y, 0.2)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_fixed_projection_stays_in_ball(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(100, 2))
        y = rng.integers(0, 2, size=100)
        cfg = AttackConfig(steps=7, mode="fixed", epsilon=0.05)
        out = pgd(DIAGONAL_NET, X, y, cfg)
        assert np.abs(out - X).max() <= 0.05 + 1e-12

    def test_adaptive_needs_box(self):
        with pytest.raises(ValueError):
            pgd(DIAGONAL_NET, np.zeros((1, 2)), np.zeros(1, int),
                AttackConfig(steps=3, mode="adaptive"))

    def test_box_constrained_output_inside_box(self):
        rng = np.random.default_rng(2)
        for mode in ("adaptive", "clip"):
            X = rng.uniform(0.1, 0.9, size=(300, 2))
            y = rng.integers(0, 2, size=300)
            cfg = AttackConfig(steps=5, mode=mode, fraction=0.3)
            out = pgd(DIAGONAL_NET, X, y, cfg, box=UNIT_SQUARE)
            assert geo.contains_batch(UNIT_SQUARE, out).all()

    def test_start_outside_box_rejected(self):
        cfg = AttackConfig(steps=3, mode="adaptive")
        with pytest.raises(ConstraintViolation):
            pgd(DIAGONAL_NET, np.array([[2.0, 2.0]]), np.array([0]), cfg, box=UNIT_SQUARE)

    def test_finds_misclassified_point_that_grid_search_confirms(self):
        # class-0 start near the boundary inside a box straddling it
        b = box([0.0, 0.0], [1.0, 1.0])
        start = np.array([[0.55, 0.45]])
        cfg = AttackConfig(steps=20, mode="adaptive", fraction=0.5)
        out = pgd(DIAGONAL_NET, start, np.array([0]), cfg, box=b)
        from hypercert.network import predict_batch
        assert predict_batch(DIAGONAL_NET, out)[0] == 1
        # grid-search oracle: misclassified points do exist in the box
        g = np.linspace(0, 1, 100)
        grid = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
        assert (predict_batch(DIAGONAL_NET, grid) == 1).any()

    def test_never_worse_than_start(self):
        # objective at the returned point >= objective at the start
        rng = np.random.default_rng(3)
        X = rng.uniform(size=(50, 2))
        y = rng.integers(0, 2, size=50)
        cfg = AttackConfig(steps=4, mode="adaptive", fraction=0.2)
        out = pgd(DIAGONAL_NET, X, y, cfg, box=UNIT_SQUARE)
        from hypercert.network import cross_entropy, logits_batch

        def ce_rows(P):
            logits = logits_batch(DIAGONAL_NET, P)
            onehot = logits[np.arange(len(y)), y]
            from hypercert.network import log_sum_exp
            return log_sum_exp(logits) - onehot

        assert (ce_rows(out) >= ce_rows(X) - 1e-12).all()

    def test_rotated_attack_stays_in_rotated_region(self):
        rot = geo.fit_rotation(np.random.default_rng(4).normal(size=(40, 2)))
        regions = RegionSet([box([-0.8, -0.8], [0.8, 0.8])], rotation=rot)
        Z0, _ = geo.sample_in_boxes(regions, 64, seed=5)
        X0 = rot.to_input(Z0)
        cfg = AttackConfig(steps=6, mode="adaptive", fraction=0.2)
        out = pgd(DIAGONAL_NET, X0, np.zeros(64, int), cfg,
                  box=regions.boxes[0], rotation=rot)
        Z_out = rot.to_rotated(out)
        # outputs live in the box in rotated coordinates (tiny float slack)
        assert (Z_out >= regions.boxes[0].lower - 1e-9).all()
        assert (Z_out <= regions.boxes[0].upper + 1e-9).all()


class TestMakeAdversary:
    def _regions(self, rotated=False):
        rot = None
        if rotated:
            rot = geo.fit_rotation(np.random.default_rng(0).normal(size=(30, 2)))
        return RegionSet([box([0.0, 0.0], [1.0, 1.0]), box([2.0, 2.0], [3.0, 3.0])],
                         rotation=rot, kind="cluster", k=2)

    @pytest.mark.parametrize("mode,eps", [("adaptive", None), ("clip", None), ("fixed", 0.05)])
    def test_outputs_inside_region(self, mode, eps):
        regions = self._regions()
        cfg = AttackConfig(steps=4, mode=mode, epsilon=eps)
        adversary = make_adversary(regions, cfg, n_samples=40)
        X, y = adversary(DIAGONAL_NET, seed=1)
        assert X.shape == (40, 2)
        assert (y == 0).all()
        assert geo.region_contains_batch(regions, X).all()

    def test_rotated_outputs_inside_region(self):
        regions = self._regions(rotated=True)
        cfg = AttackConfig(steps=4, mode="adaptive", fraction=0.3)
        adversary = make_adversary(regions, cfg, n_samples=30)
        X, _ = adversary(DIAGONAL_NET, seed=2)
        assert geo.region_contains_batch(regions, X).all()

    def test_deterministic_given_seed(self):
        regions = self._regions()
        cfg = AttackConfig(steps=3, mode="adaptive")
        adversary = make_adversary(regions, cfg, n_samples=16)
        X1, _ = adversary(DIAGONAL_NET, seed=9)
        X2, _ = adversary(DIAGONAL_NET, seed=9)
        np.testing.assert_array_equal(X1, X2)


class TestAugment:
    def test_counts_and_labels(self):
        regions = RegionSet([box([0.2, 0.2], [0.4, 0.4])])
        envelope = UNIT_SQUARE
        X, y = augment_from_regions(regions, envelope, AugmentConfig(30, 20, seed=0))
        assert X.shape == (50, 2)
        assert (y[:30] == 0).all() and (y[30:] == 1).all()
        assert geo.region_contains_batch(regions, X[:30]).all()
        assert not geo.region_contains_batch(regions, X[30:]).any()

    def test_zero_counts_allowed(self):
        regions = RegionSet([UNIT_SQUARE])
        X, y = augment_from_regions(regions, box([-1, -1], [2, 2]),
                                    AugmentConfig(0, 10, seed=1))
        assert X.shape == (10, 2)
        assert (y == 1).all()
