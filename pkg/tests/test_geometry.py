import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypercert import geometry as geo
from hypercert.errors import (
    DegenerateInput,
    EmptyInput,
    KTooLarge,
    MalformedFile,
    SearchExhausted,
)
from hypercert.geometry import Hyperrectangle, RegionSet, RotationTransform


def box(lo, hi):
    return Hyperrectangle(np.asarray(lo, float), np.asarray(hi, float))


UNIT_SQUARE = box([0.0, 0.0], [1.0, 1.0])


class TestHyperrectangle:
    def test_rejects_inverted_bounds(self):
        with pytest.raises(ValueError):
            box([0.0, 1.0], [1.0, 0.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            box([0.0], [float("inf")])

    def test_widths(self):
        np.testing.assert_array_equal(box([0.0, -1.0], [2.0, 1.0]).widths, [2.0, 2.0])

    def test_subset_and_intersection(self):
        inner = box([0.2, 0.2], [0.8, 0.8])
        assert inner.is_subset_of(UNIT_SQUARE)
        assert not UNIT_SQUARE.is_subset_of(inner)
        assert UNIT_SQUARE.intersects(box([0.9, 0.9], [2.0, 2.0]))
        assert not UNIT_SQUARE.intersects(box([1.1, 0.0], [2.0, 1.0]))


class TestBoundingBox:
    def test_single_point(self):
        b = geo.bounding_box([[0.0, 0.0]])
        np.testing.assert_array_equal(b.lower, [0.0, 0.0])
        np.testing.assert_array_equal(b.upper, [0.0, 0.0])

    def test_two_points_coordinatewise(self):
        b = geo.bounding_box([[0.0, 1.0], [2.0, -1.0]])
        np.testing.assert_array_equal(b.lower, [0.0, -1.0])
        np.testing.assert_array_equal(b.upper, [2.0, 1.0])

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            geo.bounding_box(np.empty((0, 3)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (50, 3), elements=st.floats(-100, 100)))
    def test_contains_all_inputs(self, pts):
        b = geo.bounding_box(pts)
        assert geo.contains_batch(b, pts).all()


class TestContainment:
    def test_interior_and_exterior(self):
        assert geo.contains(UNIT_SQUARE, [0.5, 0.5])
        assert not geo.contains(UNIT_SQUARE, [1.5, 0.5])

    def test_boundary_point_is_inside(self):
        assert geo.contains(UNIT_SQUARE, [1.0, 1.0])

    def test_identity_rotation_matches_unrotated(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(1000, 2))
        plain = RegionSet([UNIT_SQUARE])
        rotated = RegionSet([UNIT_SQUARE],
                            rotation=RotationTransform(np.eye(2), np.zeros(2)))
        np.testing.assert_array_equal(
            geo.region_contains_batch(plain, pts),
            geo.region_contains_batch(rotated, pts),
        )


class TestRotation:
    def test_requires_orthogonal_matrix(self):
        with pytest.raises(ValueError):
            RotationTransform(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2))

    def test_round_trip(self):
        rot = geo.fit_rotation(np.random.default_rng(0).normal(size=(40, 3)))
        x = np.random.default_rng(1).normal(size=(10, 3))
        np.testing.assert_allclose(rot.to_input(rot.to_rotated(x)), x, atol=1e-12)

    def test_diagonal_covariance_gives_signed_permutation(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(500, 3)) * np.array([3.0, 1.0, 0.2])
        Q = geo.fit_rotation(pts).matrix
        # each column concentrated on one axis
        assert (np.abs(Q).max(axis=0) > 0.99).all()

    def test_line_y_equals_x(self):
        t = np.linspace(-1, 1, 60)
        pts = np.stack([t, t], axis=1)
        Q = geo.fit_rotation(pts).matrix
        lead = Q[:, 0]
        target = np.array([1.0, 1.0]) / math.sqrt(2.0)
        np.testing.assert_allclose(np.abs(lead @ target), 1.0, atol=1e-12)

    def test_sign_convention_largest_component_positive(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(size=(80, 4)) @ rng.normal(size=(4, 4))
        Q = geo.fit_rotation(pts).matrix
        for col in Q.T:
            assert col[np.argmax(np.abs(col))] > 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_orthogonality_on_gaussian_clouds(self, seed):
        pts = np.random.default_rng(seed).normal(size=(30, 4))
        Q = geo.fit_rotation(pts).matrix
        np.testing.assert_allclose(Q.T @ Q, np.eye(4), atol=1e-8)

    def test_needs_at_least_two_points(self):
        with pytest.raises(DegenerateInput):
            geo.fit_rotation(np.zeros((1, 3)))


class TestShrink:
    def test_fixpoint_when_no_negative_inside(self):
        positives = np.array([[0.2, 0.2], [0.8, 0.8]])
        negatives = np.array([[2.0, 2.0]])
        out = geo.shrink_to_exclude(UNIT_SQUARE, positives, negatives)
        assert out == UNIT_SQUARE

    def test_pinned_two_positive_fixture(self):
        # positives at (.2,.2) and (.8,.8); negative at (.5,.9): only the
        # dim-1 upper face can move without losing a positive
        positives = np.array([[0.2, 0.2], [0.8, 0.8]])
        negatives = np.array([[0.5, 0.9]])
        out = geo.shrink_to_exclude(UNIT_SQUARE, positives, negatives)
        np.testing.assert_array_equal(out.lower, [0.0, 0.0])
        assert out.upper[0] == 1.0
        assert out.upper[1] < 0.9
        assert out.upper[1] > 0.9 - 1e-6
        assert geo.contains_batch(out, positives).all()
        assert not geo.contains(out, negatives[0])

    def test_negative_coincident_with_positive_sacrifices_it(self):
        positives = np.array([[0.2, 0.5], [0.8, 0.5]])
        negatives = np.array([[0.8, 0.5]])
        out = geo.shrink_to_exclude(UNIT_SQUARE, positives, negatives)
        assert not geo.contains(out, negatives[0])
        assert out.is_subset_of(UNIT_SQUARE)

    def test_single_point_box_equal_to_negative_degenerates(self):
        b = box([0.5, 0.5], [0.5, 0.5])
        with pytest.raises(DegenerateInput):
            geo.shrink_to_exclude(b, np.empty((0, 2)), np.array([[0.5, 0.5]]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 6))
    def test_postconditions_random(self, seed, dim):
        rng = np.random.default_rng(seed)
        positives = rng.uniform(-1, 1, size=(12, dim))
        negatives = rng.uniform(-1, 1, size=(4, dim))
        start = geo.bounding_box(positives)
        out = geo.shrink_to_exclude(start, positives, negatives)
        assert out.is_subset_of(start)
        assert not geo.contains_batch(out, negatives).any()


class TestKMeans:
    def test_k_equals_n_each_point_its_own_cluster(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        result = geo.kmeans(pts, 3, seed=0)
        got = {tuple(c) for c in result.centroids}
        assert got == {tuple(p) for p in pts}

    def test_two_blobs_recovered(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(5, 2)) * 0.05
        b = rng.normal(size=(5, 2)) * 0.05 + 10.0
        result = geo.kmeans(np.concatenate([a, b]), 2, seed=1)
        first, second = result.assignments[:5], result.assignments[5:]
        assert len(set(first)) == 1 and len(set(second)) == 1
        assert first[0] != second[0]

    def test_objective_non_increasing(self):
        pts = np.random.default_rng(7).normal(size=(60, 3))
        result = geo.kmeans(pts, 4, seed=2)
        hist = result.objective_history
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            geo.kmeans(np.zeros((2, 2)), 3, seed=0)

    def test_deterministic(self):
        pts = np.random.default_rng(9).normal(size=(30, 2))
        a = geo.kmeans(pts, 3, seed=5)
        b = geo.kmeans(pts, 3, seed=5)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        np.testing.assert_array_equal(a.centroids, b.centroids)


class TestClusterBoxes:
    def test_k1_equals_bounding_box(self):
        pts = np.random.default_rng(0).normal(size=(20, 3))
        regions, _ = geo.cluster_hypercubes(pts, np.empty((0, 3)), k=1, seed=0)
        assert len(regions.boxes) == 1
        assert regions.boxes[0] == geo.bounding_box(pts)

    def test_separated_blobs_exclude_middle_negative(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(-1, 1, size=(10, 2))
        b = rng.uniform(-1, 1, size=(10, 2)) + np.array([10.0, 0.0])
        positives = np.concatenate([a, b])
        negatives = np.array([[5.0, 0.0]])
        regions, residual = geo.cluster_hypercubes(positives, negatives, k=2, seed=0)
        assert len(regions.boxes) == 2
        assert residual == 0
        assert not geo.region_contains(regions, negatives[0])

    def test_all_positives_still_covered(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(40, 3))
        regions, _ = geo.cluster_hypercubes(pts, np.empty((0, 3)), k=5, seed=3)
        assert geo.region_contains_batch(regions, pts).all()


class TestSearchMinK:
    def test_negatives_outside_envelope_gives_one(self):
        pts = np.random.default_rng(0).uniform(size=(15, 2))
        negatives = np.array([[5.0, 5.0]])
        assert geo.search_min_k(pts, negatives, k_max=10, seed=0) == 1

    def test_negative_between_blobs_needs_two(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(-1, 1, size=(8, 2))
        b = rng.uniform(-1, 1, size=(8, 2)) + np.array([10.0, 0.0])
        positives = np.concatenate([a, b])
        negatives = np.array([[5.0, 0.0]])
        assert geo.search_min_k(positives, negatives, k_max=10, seed=0) == 2

    def test_exhaustion_reports_best(self):
        # a negative coincident with a positive can never be excluded
        positives = np.array([[0.0, 0.0], [1.0, 1.0]])
        negatives = positives.copy()
        with pytest.raises(SearchExhausted) as err:
            geo.search_min_k(positives, negatives, k_max=2, seed=0)
        assert err.value.residual_negatives > 0


class TestVariantGrammar:
    def test_plain(self):
        assert geo.parse_variant("plain") == \
            {"kind": "plain", "k": None, "rotate": False, "shrink": False}

    def test_cluster_with_modifiers(self):
        got = geo.parse_variant("cluster:4+rot+shrink")
        assert got == {"kind": "cluster", "k": 4, "rotate": True, "shrink": True}

    def test_small_implies_shrink(self):
        got = geo.parse_variant("small+rot")
        assert got["shrink"] is True and got["rotate"] is True

    @pytest.mark.parametrize("bad", ["", "cluster", "cluster:0", "plain+warp", "cluster:x"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(MalformedFile):
            geo.parse_variant(bad)


class TestRegionSetDescribe:
    def test_descriptions(self):
        rot = RotationTransform(np.eye(2), np.zeros(2))
        assert RegionSet([UNIT_SQUARE]).describe() == "plain"
        assert RegionSet([UNIT_SQUARE], kind="small").describe() == "small"
        assert RegionSet([UNIT_SQUARE], rotation=rot, kind="cluster", k=1,
                         shrunk=True).describe() == "cluster:1+shrink+rot"


class TestVolumes:
    def test_unit_square_is_zero(self):
        assert geo.log_volume_box(UNIT_SQUARE) == 0.0

    def test_half_widths(self):
        b = box([0.0, 0.0], [0.5, 0.5])
        assert geo.log_volume_box(b) == pytest.approx(2 * math.log(0.5), abs=1e-15)

    def test_zero_width_is_minus_inf(self):
        assert geo.log_volume_box(box([0.0, 0.0], [0.0, 1.0])) == -math.inf

    def test_eps_ball_closed_form(self):
        got = geo.log_volume_eps_ball(384, 1e-5)
        assert got == pytest.approx(384 * math.log(2e-5), rel=1e-12)

    def test_region_set_sums_in_log_space(self):
        b1 = box([0.0, 0.0], [1.0, 1.0])
        b2 = box([2.0, 2.0], [3.0, 3.0])
        total = geo.log_volume(RegionSet([b1, b2]))
        assert total == pytest.approx(math.log(2.0), rel=1e-12)

    def test_overlap_flag(self):
        assert geo.overlap_possible(RegionSet([UNIT_SQUARE, box([0.5, 0.5], [2.0, 2.0])]))
        assert not geo.overlap_possible(RegionSet([UNIT_SQUARE, box([2.0, 2.0], [3.0, 3.0])]))

    def test_mc_union_matches_exact_for_disjoint(self):
        b1 = box([0.0, 0.0], [1.0, 1.0])
        b2 = box([2.0, 2.0], [3.0, 3.0])
        est = geo.mc_log_union_volume(RegionSet([b1, b2]), n=20_000, seed=0)
        assert est == pytest.approx(math.log(2.0), abs=1e-9)

    def test_mc_union_discounts_overlap(self):
        # identical boxes: union volume is half the naive sum
        b = UNIT_SQUARE
        est = geo.mc_log_union_volume(RegionSet([b, box([0.0, 0.0], [1.0, 1.0])]),
                                      n=20_000, seed=0)
        assert est == pytest.approx(0.0, abs=1e-9)


class TestSampleInBoxes:
    def test_degenerate_box_returns_the_point(self):
        b = box([0.5, 0.5], [0.5, 0.5])
        Z, idx = geo.sample_in_boxes(RegionSet([b]), 32, seed=0)
        assert (Z == 0.5).all()
        assert (idx == 0).all()

    def test_uniform_mean(self):
        Z, _ = geo.sample_in_boxes(RegionSet([UNIT_SQUARE]), 10_000, seed=1)
        np.testing.assert_allclose(Z.mean(axis=0), [0.5, 0.5], atol=0.02)

    def test_volume_proportional_allocation(self):
        big = box([0.0, 0.0], [2.0, 2.0])   # volume 4
        tiny = box([5.0, 5.0], [5.5, 5.5])  # volume 0.25
        _, idx = geo.sample_in_boxes(RegionSet([big, tiny]), 20_000, seed=2)
        frac_big = (idx == 0).mean()
        assert frac_big == pytest.approx(4.0 / 4.25, abs=0.02)


class TestContainmentReport:
    def test_hand_counted_fixture(self):
        from hypercert.dataset import EmbeddingDataset, EmbeddingRecord, Label, Split
        vecs = {
            # 2 of 4 train positives inside the unit square
            "p0": (Label.POSITIVE, Split.TRAIN, [0.5, 0.5]),
            "p1": (Label.POSITIVE, Split.TRAIN, [0.9, 0.9]),
            "p2": (Label.POSITIVE, Split.TRAIN, [2.0, 2.0]),
            "p3": (Label.POSITIVE, Split.TRAIN, [3.0, 3.0]),
            # 1 of 2 test positives inside
            "q0": (Label.POSITIVE, Split.TEST, [0.1, 0.1]),
            "q1": (Label.POSITIVE, Split.TEST, [5.0, 5.0]),
            # 0 of 1 test negatives inside
            "n0": (Label.NEGATIVE, Split.TEST, [9.0, 9.0]),
            # 1 of 1 test ambiguous inside
            "a0": (Label.AMBIGUOUS, Split.TEST, [1.0, 0.0]),
        }
        records = [EmbeddingRecord(k, lab, sp, np.array(v))
                   for k, (lab, sp, v) in vecs.items()]
        ds = EmbeddingDataset(2, records)
        rows = geo.containment_report([RegionSet([UNIT_SQUARE])], ds)
        row = rows[0]
        assert row.train_positive == pytest.approx(50.0)
        assert row.test_positive == pytest.approx(50.0)
        assert row.test_negative == pytest.approx(0.0)
        assert row.test_ambiguous == pytest.approx(100.0)

    def test_empty_partition_reports_none(self):
        from hypercert.dataset import EmbeddingDataset, EmbeddingRecord, Label, Split
        ds = EmbeddingDataset(2, [
            EmbeddingRecord("p", Label.POSITIVE, Split.TRAIN, np.array([0.5, 0.5])),
        ])
        row = geo.containment_report([RegionSet([UNIT_SQUARE])], ds)[0]
        assert row.train_positive == pytest.approx(100.0)
        assert row.test_negative is None


class TestRegionSetSerialization:
    def test_round_trip_with_rotation_and_meta(self, tmp_path):
        rot = geo.fit_rotation(np.random.default_rng(0).normal(size=(30, 3)))
        boxes = [box([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]), box([-1.0] * 3, [0.0] * 3)]
        regions = RegionSet(boxes, rotation=rot, kind="cluster", k=2, shrunk=True)
        path = tmp_path / "r.region"
        geo.save_region_set(regions, path, meta={"config_hash": "abc123"})
        loaded, meta = geo.load_region_set(path)
        assert meta["config_hash"] == "abc123"
        assert loaded.describe() == regions.describe()
        assert all(a == b for a, b in zip(loaded.boxes, regions.boxes))
        np.testing.assert_array_equal(loaded.rotation.matrix, rot.matrix)
        np.testing.assert_array_equal(loaded.rotation.center, rot.center)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.region"
        path.write_text("not a region file\n")
        with pytest.raises(MalformedFile):
            geo.load_region_set(path)


class TestBuildRegionSet:
    def test_small_excludes_all_negatives(self):
        rng = np.random.default_rng(4)
        positives = rng.uniform(-1, 1, size=(30, 3))
        negatives = rng.uniform(-1, 1, size=(10, 3))
        regions = geo.build_region_set(positives, negatives, "small",
                                       k=None, rotate=False, shrink=True, seed=0)
        assert regions.describe() == "small"
        assert not geo.region_contains_batch(regions, negatives).any()

    def test_rotated_cluster_with_shrink(self):
        rng = np.random.default_rng(5)
        positives = rng.normal(size=(40, 3))
        negatives = rng.normal(size=(12, 3))
        regions = geo.build_region_set(positives, negatives, "cluster",
                                       k=3, rotate=True, shrink=True, seed=1)
        assert regions.rotation is not None
        assert len(regions.boxes) <= 3
        assert not geo.region_contains_batch(regions, negatives).any()
