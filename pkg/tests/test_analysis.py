import numpy as np
import pytest
from sklearn.metrics import silhouette_score

from flagdecomp.analysis import (
    DistanceMatrix,
    classical_mds,
    distance_matrix,
    flags_from_matrices,
    knn_classify,
    stratified_split,
)
from flagdecomp.flags import FlagType, StiefelFlag, flag_chordal, random_stiefel_flag
from flagdecomp.synthgen import gen_cluster_sim


def _pairwise(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


class TestDistanceMatrix:
    def test_identical_items_zero(self):
        insts, _ = gen_cluster_sim(per_cluster=1, centers=1, noise_sigma=0.0, seed=0)
        items = [insts[0].observed] * 4
        dist = distance_matrix(
            items,
            "flag_chordal",
            hierarchy=insts[0].hierarchy,
            flag_type=insts[0].truth_flag.flag_type,
        )
        assert np.allclose(dist.values, 0.0, atol=1e-7)

    def test_two_items_match_direct_call(self):
        ft = FlagType((2, 4), 10)
        x = random_stiefel_flag(ft, 1)
        y = random_stiefel_flag(ft, 2)
        dist = distance_matrix([x, y], "flag_chordal")
        assert dist.values[0, 1] == pytest.approx(flag_chordal(x, y))
        assert dist.values[1, 0] == dist.values[0, 1]
        assert dist.values[0, 0] == 0.0

    def test_cluster_sim_within_below_between(self):
        insts, labels = gen_cluster_sim(seed=1)
        items = [i.observed for i in insts]
        dist = distance_matrix(
            items,
            "flag_chordal",
            hierarchy=insts[0].hierarchy,
            flag_type=insts[0].truth_flag.flag_type,
            method="fd",
        ).values
        same = labels[:, None] == labels[None, :]
        off_diag = ~np.eye(len(items), dtype=bool)
        within = dist[same & off_diag].mean()
        between = dist[~same].mean()
        assert within < between

    def test_heterogeneous_shapes_rejected(self):
        with pytest.raises(ValueError):
            distance_matrix(
                [np.ones((2, 3)), np.ones((3, 3))], "euclidean_flat"
            )

    def test_euclidean_flat_matches_flatten_oracle(self):
        rng = np.random.default_rng(2)
        items = [rng.standard_normal((3, 4)) for _ in range(5)]
        dist = distance_matrix(items, "euclidean_flat").values
        for a in range(5):
            for b in range(5):
                oracle = np.linalg.norm(items[a].ravel() - items[b].ravel())
                assert dist[a, b] == pytest.approx(oracle, abs=1e-9)

    def test_flag_metric_rotation_invariance(self):
        ft = FlagType((1, 3), 6)
        rng = np.random.default_rng(3)
        flags = [random_stiefel_flag(ft, s) for s in range(4)]
        base = distance_matrix(flags, "flag_chordal").values
        rotated = []
        for flag in flags:
            pieces = []
            for block in flag.blocks():
                m = block.shape[1]
                q, r = np.linalg.qr(rng.standard_normal((m, m)))
                pieces.append(block @ (q * np.where(np.diag(r) < 0, -1.0, 1.0)))
            rotated.append(StiefelFlag(np.hstack(pieces), ft))
        after = distance_matrix(rotated, "flag_chordal").values
        assert np.allclose(base, after, atol=1e-10)

    def test_grassmann_product_sum_metric(self):
        from flagdecomp.flags import grassmann_product_sum

        ft = FlagType((1, 3), 7)
        flags = [random_stiefel_flag(ft, s) for s in range(3)]
        dist = distance_matrix(flags, "grassmann_product_sum")
        assert dist.metric == "grassmann_product_sum"
        assert dist.values[0, 1] == pytest.approx(
            grassmann_product_sum(flags[0], flags[1])
        )

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            distance_matrix([np.eye(2)], "manhattan")

    def test_validation(self):
        with pytest.raises(ValueError):
            DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]), "x")
        with pytest.raises(ValueError):
            DistanceMatrix(np.array([[1.0]]), "x")
        with pytest.raises(ValueError):
            DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]), "x")


class TestFlagsFromMatrices:
    def test_methods_produce_flags(self):
        insts, _ = gen_cluster_sim(per_cluster=2, seed=4)
        items = [i.observed for i in insts[:3]]
        h = insts[0].hierarchy
        ft = insts[0].truth_flag.flag_type
        for method in ("fd", "rfd", "svd", "irls_svd"):
            flags = flags_from_matrices(items, h, ft, method)
            assert len(flags) == 3
            assert all(f.flag_type == ft for f in flags)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            flags_from_matrices([np.eye(3)], None, None, "qr")


class TestClassicalMds:
    def test_unit_square_reproduced(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        coords = classical_mds(_pairwise(points), 2)
        assert np.allclose(_pairwise(coords), _pairwise(points), atol=1e-9)
        assert np.abs(coords.mean(axis=0)).max() < 1e-10

    def test_equilateral_triangle(self):
        side = 2.5
        dist = np.full((3, 3), side)
        np.fill_diagonal(dist, 0.0)
        coords = classical_mds(dist, 2)
        rebuilt = _pairwise(coords)
        off = rebuilt[~np.eye(3, dtype=bool)]
        assert np.allclose(off, side, atol=1e-9)

    def test_all_zero_distances(self):
        coords = classical_mds(np.zeros((4, 4)), 2)
        assert np.allclose(coords, 0.0)

    def test_dim_bounds(self):
        with pytest.raises(ValueError):
            classical_mds(np.zeros((3, 3)), 0)
        with pytest.raises(ValueError):
            classical_mds(np.zeros((3, 3)), 3)

    def test_recovers_random_configurations(self):
        rng = np.random.default_rng(5)
        for source_dim in (1, 2, 3):
            points = rng.standard_normal((12, source_dim))
            coords = classical_mds(_pairwise(points), 3)
            assert np.allclose(_pairwise(coords), _pairwise(points), atol=1e-9)

    def test_cluster_sim_silhouette_beats_euclidean(self):
        insts, labels = gen_cluster_sim(seed=6)
        items = [i.observed for i in insts]
        h = insts[0].hierarchy
        ft = insts[0].truth_flag.flag_type
        d_fd = distance_matrix(items, "flag_chordal", hierarchy=h, flag_type=ft).values
        d_eu = distance_matrix(items, "euclidean_flat").values
        s_fd = silhouette_score(d_fd, labels, metric="precomputed")
        s_eu = silhouette_score(d_eu, labels, metric="precomputed")
        assert s_fd > s_eu


class TestKnnClassify:
    def test_duplicate_of_training_item(self):
        # item 3 is an exact duplicate of training item 0
        values = np.array(
            [
                [0.0, 5.0, 5.0, 0.0],
                [5.0, 0.0, 5.0, 5.0],
                [5.0, 5.0, 0.0, 5.0],
                [0.0, 5.0, 5.0, 0.0],
            ]
        )
        labels = np.array([7, 8, 9, 7])
        mask = np.array([True, True, True, False])
        result = knn_classify(values, labels, 1, mask)
        assert result.predicted.tolist() == [7]
        assert result.accuracy == 1.0

    def test_all_training_same_class(self):
        rng = np.random.default_rng(7)
        values = np.abs(rng.standard_normal((6, 6)))
        values = 0.5 * (values + values.T)
        np.fill_diagonal(values, 0.0)
        labels = np.array([3, 3, 3, 3, 1, 2])
        mask = np.array([True, True, True, True, False, False])
        result = knn_classify(values, labels, 3, mask)
        assert result.predicted.tolist() == [3, 3]

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(8)
        points = rng.standard_normal((20, 2))
        labels = (points[:, 0] > 0).astype(int)
        values = _pairwise(points)
        mask = np.zeros(20, dtype=bool)
        mask[:14] = True
        base = knn_classify(values, labels, 5, mask)
        transformed = knn_classify(np.sqrt(values) * 3.0, labels, 5, mask)
        assert np.array_equal(base.predicted, transformed.predicted)

    def test_tie_break_prefers_nearest_neighbor_class(self):
        # k = 2, one vote each: the tied class of the closer neighbor wins
        values = np.array(
            [
                [0.0, 9.0, 1.0, 2.0],
                [9.0, 0.0, 9.0, 9.0],
                [1.0, 9.0, 0.0, 9.0],
                [2.0, 9.0, 9.0, 0.0],
            ]
        )
        labels = np.array([0, 0, 1, 2])
        mask = np.array([False, True, True, True])
        result = knn_classify(values, labels, 2, mask)
        assert result.predicted.tolist() == [1]

    def test_empty_train_rejected(self):
        with pytest.raises(ValueError):
            knn_classify(np.zeros((2, 2)), [0, 1], 1, [False, False])

    def test_k_bounds(self):
        with pytest.raises(ValueError):
            knn_classify(np.zeros((3, 3)), [0, 1, 1], 3, [True, True, False])


class TestStratifiedSplit:
    def test_fractions_and_coverage(self):
        labels = np.repeat([0, 1, 2], [10, 20, 30])
        mask = stratified_split(labels, 0.7, np.random.default_rng(9))
        for cls, total, expected in ((0, 10, 7), (1, 20, 14), (2, 30, 21)):
            got = int(mask[labels == cls].sum())
            assert got == expected

    def test_min_one_train_and_test(self):
        labels = np.array([0, 0, 1, 1])
        mask = stratified_split(labels, 0.99, np.random.default_rng(10))
        for cls in (0, 1):
            members = mask[labels == cls]
            assert 1 <= members.sum() <= len(members) - 1

    def test_deterministic_per_seed(self):
        labels = np.repeat([0, 1], 25)
        a = stratified_split(labels, 0.7, np.random.default_rng(11))
        b = stratified_split(labels, 0.7, np.random.default_rng(11))
        assert np.array_equal(a, b)

    def test_rejects_small_class(self):
        with pytest.raises(ValueError):
            stratified_split(np.array([0, 1, 1]), 0.7, np.random.default_rng(12))
