"""
커널/그룹 복원 지표와 다음 이벤트 예측 지표 테스트
"""

import numpy as np
import pytest

from lowrank_hawkes.inference.errors import HawkesInputError
from lowrank_hawkes.inference.evaluate import (accuracy_at, aligned_l2_error, auc, evaluate_prediction,
                                               evaluate_recovery, kernel_curves, kernel_grid, naive_baseline,
                                               normalized_l2_error, predict_scores, recover_groups,
                                               score_events, summarize)
from lowrank_hawkes.inference.simulate import generate_synthetic_config, true_kernel_matrix
from lowrank_hawkes.inference.types import EventHistory, Hyperparams, LowRankModel, Network


class TestNormalizedL2:

    def test_identical_is_zero(self):
        grid = kernel_grid()
        g = np.exp(-grid)[:, None]
        assert normalized_l2_error(g, g, grid) == 0.0

    def test_zero_against_nonzero_is_one(self):
        grid = kernel_grid()
        g = np.exp(-grid)[:, None]
        assert normalized_l2_error(np.zeros_like(g), g, grid) == pytest.approx(1.0)

    def test_both_zero_contribute_zero(self):
        grid = kernel_grid(5.0, 50)
        zero = np.zeros((50, 2))
        assert normalized_l2_error(zero, zero, grid) == 0.0

    def test_symmetric_and_scale_invariant(self):
        grid = kernel_grid(10.0, 200)
        a = np.stack([np.exp(-grid), np.sin(grid) ** 2], axis=1)
        b = np.stack([np.exp(-2 * grid), np.cos(grid) ** 2], axis=1)
        err = normalized_l2_error(a, b, grid)
        assert 0.0 < err < 1.0
        assert normalized_l2_error(b, a, grid) == pytest.approx(err)
        assert normalized_l2_error(3 * a, 3 * b, grid) == pytest.approx(err)

    def test_shape_mismatch(self):
        grid = kernel_grid(1.0, 10)
        with pytest.raises(HawkesInputError):
            normalized_l2_error(np.zeros((10, 2)), np.zeros((10, 3)), grid)

    def test_invalid_grid(self):
        with pytest.raises(HawkesInputError):
            kernel_grid(0.0, 10)


class TestAlignment:

    def test_permuted_truth_aligned_exactly(self):
        cfg, _ = generate_synthetic_config(10, 0.3, seed=2, r_true=3)
        grid = kernel_grid(10.0, 100)
        truth = true_kernel_matrix(cfg, grid)
        perm = np.array([2, 0, 1])
        inverse = np.argsort(perm)
        shuffled = truth[:, inverse][:, :, inverse]
        err, found = aligned_l2_error(shuffled, truth, grid)
        assert err == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_array_equal(shuffled[:, found][:, :, found], truth)


class TestGroupRecovery:

    def test_two_points(self):
        P = np.array([[1.0, 0.0]] * 4 + [[0.0, 1.0]] * 3)
        assignment, centers = recover_groups(P, 2)
        assert len(set(assignment[:4])) == 1 and len(set(assignment[4:])) == 1
        assert assignment[0] != assignment[-1]
        assert centers.shape == (2, 2)

    def test_too_many_groups(self):
        with pytest.raises(HawkesInputError):
            recover_groups(np.ones((2, 2)), 3)

    def test_indicator_projection_recovers_groups(self):
        cfg, _ = generate_synthetic_config(12, 0.3, seed=1)
        r = cfg.r_true
        model = LowRankModel.from_parts(cfg.projection(), np.full((r, r, 3), 0.01), np.full((r, 4), 0.001))
        hp = Hyperparams(K=3, r=r)
        result = evaluate_recovery(model, hp, cfg, grid=kernel_grid(10.0, 100))
        if len(np.unique(cfg.group_of)) == r:
            assert result["groups_recovered"]
        assert 0.0 <= result["l2_error"] <= 1.0
        assert 0.0 <= result["baseline_error"] <= 1.0
        assert sorted(result["permutation"]) == list(range(r))

    def test_kernel_curves_table(self):
        cfg, _ = generate_synthetic_config(12, 0.3, seed=1)
        model = LowRankModel.from_parts(cfg.projection() + 0.1, np.full((2, 2, 2), 0.01), np.full((2, 3), 0.001))
        hp = Hyperparams(K=2, r=2)
        table = kernel_curves(model, hp, cfg, grid=kernel_grid(5.0, 20))
        assert list(table.columns) == ["t", "source_group", "target_group", "g_true", "g_inferred"]
        assert len(table) == 20 * 4
        assert table["g_true"].notna().all()
        bare = kernel_curves(model, hp, grid=kernel_grid(5.0, 20))
        assert bare["g_true"].isna().all()


class TestRankingMetrics:

    def test_auc_true_type_first(self):
        scores = np.array([[0.9, 0.1, 0.05], [0.2, 0.7, 0.1]])
        assert auc(scores, np.array([0, 1])) == 1.0

    def test_auc_all_ties(self):
        assert auc(np.ones((4, 5)), np.array([0, 1, 2, 3])) == 0.5

    def test_auc_random_scores(self):
        rng = np.random.default_rng(0)
        scores = rng.random((5000, 20))
        truth = rng.integers(0, 20, size=5000)
        assert auc(scores, truth) == pytest.approx(0.5, abs=0.02)

    def test_accuracy_full_fraction(self):
        rng = np.random.default_rng(1)
        scores = rng.random((100, 10))
        assert accuracy_at(scores, rng.integers(0, 10, size=100), fraction=1.0) == 1.0

    def test_accuracy_perfect_ranking(self):
        scores = np.eye(10)
        assert accuracy_at(scores, np.arange(10), fraction=0.1) == 1.0

    def test_accuracy_ties_count_against(self):
        assert accuracy_at(np.ones((3, 10)), np.array([0, 1, 2]), fraction=0.3) == 0.0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(2)
        scores = rng.random((200, 8))
        truth = rng.integers(0, 8, size=200)
        transformed = np.log(scores) * 3 + 1
        assert auc(transformed, truth) == auc(scores, truth)
        assert accuracy_at(transformed, truth) == accuracy_at(scores, truth)

    @pytest.mark.parametrize("fraction", [0.0, 1.5])
    def test_invalid_fraction(self, fraction):
        with pytest.raises(HawkesInputError):
            accuracy_at(np.ones((1, 3)), np.array([0]), fraction=fraction)

    def test_empty_scores_rejected(self):
        with pytest.raises(HawkesInputError):
            auc(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))


class TestNaiveBaseline:

    def test_ranking_by_counts(self):
        train = EventHistory.from_arrays(3, [(0.0, 10.0)],
                                         [[(float(t), u) for t, u in enumerate([0] * 5 + [1] * 3 + [2])]])
        counts = naive_baseline(train)
        np.testing.assert_array_equal(counts, [5.0, 3.0, 1.0])
        scores = np.broadcast_to(counts, (3, 3))
        assert auc(scores, np.array([0, 1, 2])) == pytest.approx((1.0 + 0.5 + 0.0) / 3)

    def test_uniform_counts_give_half(self):
        train = EventHistory.from_arrays(2, [(0.0, 4.0)], [[(1.0, 0), (2.0, 1)]])
        scores = np.broadcast_to(naive_baseline(train), (2, 2))
        assert auc(scores, np.array([0, 1])) == 0.5


class TestEventScores:

    def test_recurrence_matches_direct_scores(self, small_instance):
        history, network, hp, model = small_instance
        scores = score_events(model, hp, history, network)
        row = 0
        for h, real in enumerate(history.realizations):
            for t in real.times:
                np.testing.assert_allclose(scores[row], predict_scores(model, hp, history, network, h, t),
                                           rtol=1e-10)
                row += 1
        assert row == history.n

    def test_excitation_raises_target_score(self):
        hp = Hyperparams(K=1, r=2, delta=1.0)
        model = LowRankModel.from_parts(np.eye(2), np.array([[[0.0], [2.0]], [[0.0], [0.0]]]),
                                        np.full((2, 2), [0.1, 0.0]))
        history = EventHistory.from_arrays(2, [(0.0, 5.0)], [[(1.0, 0)]])
        network = Network.complete(2)
        before = predict_scores(model, hp, history, network, 0, 1.0)
        after = predict_scores(model, hp, history, network, 0, 1.5)
        assert after[1] > before[1]
        assert after[0] == pytest.approx(before[0])

    def test_evaluate_prediction_keys(self, small_instance):
        history, network, hp, model = small_instance
        train, test = history.subset([0, 1]), history.subset([2, 3])
        result = evaluate_prediction(model, hp, train, test, network)
        assert set(result) == {"auc", "accuracy", "naive_auc", "naive_accuracy", "test_events", "fraction"}
        assert result["test_events"] == test.n
        assert 0.0 <= result["auc"] <= 1.0

    def test_evaluate_prediction_requires_events(self, small_instance):
        history, network, hp, model = small_instance
        empty = EventHistory.from_arrays(history.d, [(0.0, 1.0)], [[]])
        with pytest.raises(HawkesInputError):
            evaluate_prediction(model, hp, history, empty, network)


def test_summarize():
    assert summarize([1.0, 2.0, 6.0]) == {"mean": 3.0, "min": 1.0, "max": 6.0}
