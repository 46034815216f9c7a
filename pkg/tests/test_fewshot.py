import numpy as np
import pytest

from flagdecomp.errors import DegenerateBlock, FlagTypeError
from flagdecomp.fewshot import (
    FeatureEpisode,
    classify_episode,
    euclidean_prototype_distance,
    evaluate_episodes,
    flag_prototype,
    flag_query_distance,
    load_feature_manifest,
    sample_episodes,
    subspace_prototype_distance,
)
from flagdecomp.flags import FlagType, flag_chordal, random_stiefel_flag
from flagdecomp.linalg import save_matrix_csv, svd


def _planted_support(seed, n=12, s=4):
    """Support matrices whose levels span a planted flag exactly."""
    ft = FlagType((s - 1, 2 * (s - 1)), n)
    truth = random_stiefel_flag(ft, seed)
    rng = np.random.default_rng(seed + 1000)
    f1 = truth.prefix(0) @ rng.standard_normal((s - 1, s))
    f = truth.coordinates @ rng.standard_normal((2 * (s - 1), s))
    return truth, f1, f


def _orthogonal_class_episode(ways=5, n=64, s=3, queries_per_class=2):
    """Classes on disjoint coordinate blocks with zero-mean support."""
    support = []
    queries = []
    for c in range(ways):
        base = 8 * c
        e = np.eye(n)
        a1, a2, a3, a4 = e[:, base], e[:, base + 1], e[:, base + 2], e[:, base + 3]
        f1 = np.column_stack([a1, a2, -(a1 + a2)])
        f = np.column_stack([a1 + a3, a2 + a4, -(a1 + a2 + a3 + a4)])
        support.append((f1, f))
        rng = np.random.default_rng(100 + c)
        for _ in range(queries_per_class):
            alpha, beta = rng.standard_normal(2)
            q1 = alpha * f1[:, 0] + beta * f1[:, 1]
            q2 = alpha * f[:, 0] + beta * f[:, 1]
            queries.append((q1, q2, c))
    return FeatureEpisode(ways, s, tuple(support), tuple(queries))


class TestFlagPrototype:
    def test_two_shot_line_inside_plane(self):
        # level 1 spans a line, level 2 adds one orthogonal direction
        n = 6
        e = np.eye(n)
        f1 = np.column_stack([e[:, 0], 2.0 * e[:, 0]])
        f = np.column_stack([e[:, 0] + e[:, 1], e[:, 0] - e[:, 1]])
        proto = flag_prototype(f1, f, 2)
        q1 = proto.flag.block(0)
        line = np.outer(e[:, 0], e[:, 0])
        assert np.linalg.norm(q1 @ q1.T - line) < 1e-8
        prefix = proto.flag.prefix(1)
        plane = np.outer(e[:, 0], e[:, 0]) + np.outer(e[:, 1], e[:, 1])
        assert np.linalg.norm(prefix @ prefix.T - plane) < 1e-8

    def test_three_shot_type(self):
        rng = np.random.default_rng(0)
        proto = flag_prototype(rng.standard_normal((9, 3)), rng.standard_normal((9, 3)), 3)
        assert proto.flag.flag_type == FlagType((2, 4), 9)

    def test_recovers_planted_flag(self):
        truth, f1, f = _planted_support(seed=1)
        proto = flag_prototype(f1, f, 4)
        assert flag_chordal(truth, proto.flag) < 1e-6

    def test_scale_invariance(self):
        _, f1, f = _planted_support(seed=2)
        base = flag_prototype(f1, f, 4).flag
        scaled = flag_prototype(3.7 * f1, -0.2 * f, 4).flag
        assert flag_chordal(base, scaled) < 1e-8

    def test_single_shot_rejected(self):
        with pytest.raises(FlagTypeError):
            flag_prototype(np.ones((4, 1)), np.ones((4, 1)), 1)

    def test_identical_levels_degenerate(self):
        rng = np.random.default_rng(3)
        f = rng.standard_normal((10, 3))
        with pytest.raises(DegenerateBlock):
            flag_prototype(f, f, 3)


class TestFlagQueryDistance:
    def test_zero_when_query_in_blocks(self):
        truth, f1, f = _planted_support(seed=4)
        proto = flag_prototype(f1, f, 4)
        q1 = proto.flag.block(0) @ np.array([0.3, -0.7, 1.1])
        q2 = proto.flag.block(1) @ np.array([0.5, 0.5, -0.5])
        assert flag_query_distance(proto, q1, q2) < 1e-20

    def test_orthogonal_unit_queries_give_two(self):
        n = 10
        e = np.eye(n)
        f1 = np.column_stack([e[:, 0], e[:, 1]])
        f = np.column_stack([e[:, 2], e[:, 3]])
        proto = flag_prototype(f1, f, 2)
        span = proto.flag.coordinates
        q = e[:, 7]
        assert np.linalg.norm(span.T @ q) < 1e-12
        assert flag_query_distance(proto, q, q) == pytest.approx(2.0)

    def test_matches_explicit_projector_oracle(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            _, f1, f = _planted_support(seed=seed + 10, n=15, s=3)
            proto = flag_prototype(f1, f, 3)
            v1 = rng.standard_normal(15)
            v2 = rng.standard_normal(15)
            q1 = proto.flag.block(0)
            q2 = proto.flag.block(1)
            pi1 = np.eye(15) - q1 @ q1.T
            pi2 = np.eye(15) - q2 @ q2.T
            oracle = np.linalg.norm(pi1 @ v1) ** 2 + np.linalg.norm(pi2 @ v2) ** 2
            assert flag_query_distance(proto, v1, v2) == pytest.approx(oracle, abs=1e-12)

    def test_length_mismatch(self):
        _, f1, f = _planted_support(seed=6)
        proto = flag_prototype(f1, f, 4)
        with pytest.raises(ValueError):
            flag_query_distance(proto, np.ones(3), np.ones(12))


class TestEuclideanPrototype:
    def test_query_at_mean_is_zero(self):
        rng = np.random.default_rng(7)
        support = rng.standard_normal((6, 4))
        assert euclidean_prototype_distance(support, support.mean(axis=1)) < 1e-20

    def test_single_shot(self):
        shot = np.array([[1.0], [2.0]])
        assert euclidean_prototype_distance(shot, np.array([2.0, 2.0])) == pytest.approx(1.0)

    def test_symmetric_shots_cancel(self):
        v = np.array([1.0, -2.0, 0.5])
        support = np.column_stack([v, -v])
        assert euclidean_prototype_distance(support, np.zeros(3)) == pytest.approx(0.0)


class TestSubspacePrototype:
    def test_query_in_span_is_zero(self):
        rng = np.random.default_rng(8)
        support = rng.standard_normal((8, 3))
        basis = svd(support).left_vectors[:, :2]
        q = basis @ np.array([1.0, -2.0])
        assert subspace_prototype_distance(support, q, 3) < 1e-20

    def test_orthogonal_unit_query_is_one(self):
        e = np.eye(5)
        support = e[:, :3]  # top-2 directions inside first three axes
        q = e[:, 4]
        assert subspace_prototype_distance(support, q, 3) == pytest.approx(1.0)

    def test_matches_svd_projector_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            support = rng.standard_normal((7, 4))
            q = rng.standard_normal(7)
            basis = svd(support).left_vectors[:, :3]
            pi = np.eye(7) - basis @ basis.T
            oracle = float(np.linalg.norm(pi @ q) ** 2)
            assert subspace_prototype_distance(support, q, 4) == pytest.approx(oracle, abs=1e-12)


class TestClassifyEpisode:
    def test_queries_equal_to_support_are_perfect(self):
        rng = np.random.default_rng(10)
        ways, s, n = 3, 3, 20
        support = []
        queries = []
        for c in range(ways):
            f1 = rng.standard_normal((n, s))
            f = rng.standard_normal((n, s))
            support.append((f1, f))
            queries.append((f1[:, 0], f[:, 0], c))
        episode = FeatureEpisode(ways, s, tuple(support), tuple(queries))
        for method in ("flag", "euclidean", "subspace"):
            # a support shot is inside every prototype span of its own class
            accuracy = classify_episode(episode, method)
            assert accuracy == 1.0, method

    def test_orthogonal_classes_flag_and_subspace_perfect(self):
        episode = _orthogonal_class_episode()
        assert classify_episode(episode, "flag") == 1.0
        assert classify_episode(episode, "subspace") == 1.0
        assert classify_episode(episode, "euclidean") < 1.0

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(11)
        ways, s, n = 5, 3, 40
        trials = []
        total_queries = 0
        hits = {m: 0.0 for m in ("flag", "euclidean", "subspace")}
        for _ in range(40):
            support = tuple(
                (rng.standard_normal((n, s)), rng.standard_normal((n, s)))
                for _ in range(ways)
            )
            queries = tuple(
                (rng.standard_normal(n), rng.standard_normal(n), int(rng.integers(ways)))
                for _ in range(10)
            )
            episode = FeatureEpisode(ways, s, support, queries)
            total_queries += len(queries)
            for m in hits:
                hits[m] += classify_episode(episode, m) * len(queries)
        for m, total in hits.items():
            assert abs(total / total_queries - 0.2) < 0.08, m

    def test_normalized_mode_runs(self):
        episode = _orthogonal_class_episode()
        assert classify_episode(episode, "flag", normalize_queries=True) == 1.0

    def test_unstacked_baseline_mode(self):
        episode = _orthogonal_class_episode()
        assert classify_episode(episode, "subspace", stacked=False) == 1.0


class TestEvaluateEpisodes:
    def test_mean_and_std_over_trials(self):
        e_perfect = _orthogonal_class_episode()
        stats = evaluate_episodes([[e_perfect], [e_perfect]], "flag")
        assert stats.mean == 1.0
        assert stats.std == 0.0
        assert stats.per_trial == (1.0, 1.0)


class TestSampling:
    def _pools(self, n=16, per_class=8, classes=6, seed=12):
        rng = np.random.default_rng(seed)
        return [
            (rng.standard_normal((n, per_class)), rng.standard_normal((n, per_class)))
            for _ in range(classes)
        ]

    def test_sample_shapes(self):
        pools = self._pools()
        episodes = sample_episodes(pools, ways=5, shots=3, queries_per_task=10, tasks=4, rng=np.random.default_rng(0))
        assert len(episodes) == 4
        for ep in episodes:
            assert ep.ways == 5 and ep.shots == 3
            assert len(ep.queries) == 10

    def test_queries_not_in_support(self):
        pools = self._pools()
        episodes = sample_episodes(pools, 5, 3, 10, 3, np.random.default_rng(1))
        for ep in episodes:
            for f1, f, label in ep.queries:
                sup_f1, _ = ep.support[label]
                # query column differs from every support column
                assert all(
                    np.linalg.norm(f1 - sup_f1[:, j]) > 1e-12
                    for j in range(sup_f1.shape[1])
                )

    def test_pool_too_small(self):
        pools = self._pools(per_class=3)
        with pytest.raises(ValueError):
            sample_episodes(pools, 5, 3, 10, 1, np.random.default_rng(2))

    def test_manifest_round_trip(self, tmp_path):
        pools = self._pools(classes=5)
        entries = []
        for c, (f1, f) in enumerate(pools):
            save_matrix_csv(tmp_path / f"c{c}_l1.csv", f1)
            save_matrix_csv(tmp_path / f"c{c}_f.csv", f)
            entries.append(
                {"name": f"c{c}", "level1": f"c{c}_l1.csv", "final": f"c{c}_f.csv"}
            )
        manifest = {
            "schema": 1,
            "ways": 5,
            "shots": 3,
            "queries_per_task": 10,
            "tasks_per_trial": 2,
            "classes": entries,
        }
        path = tmp_path / "manifest.json"
        import json

        path.write_text(json.dumps(manifest))
        loaded_pools, loaded = load_feature_manifest(path)
        assert loaded["ways"] == 5
        assert len(loaded_pools) == 5
        assert np.array_equal(loaded_pools[0][0], pools[0][0])

    def test_manifest_schema_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"schema": 2, "ways": 5, "shots": 3, "classes": []}')
        with pytest.raises(ValueError):
            load_feature_manifest(path)
