"""
도메인 타입과 기저 함수 테스트
"""

import math

import numpy as np
import pytest
from scipy import integrate

from lowrank_hawkes.inference.errors import HawkesInputError, IndexOutOfRange
from lowrank_hawkes.inference.types import (EventHistory, FitReport, Hyperparams, LowRankModel, Network,
                                            Realization, baseline_value, exp_integral, kernel_value)


class TestExpIntegral:
    """f_{kx}(t) = (1 - e^{-kxt}) / (kx)"""

    def test_k_zero_is_length(self):
        assert exp_integral(0, 0.5, 3.0) == 3.0

    def test_saturates_at_inverse_rate(self):
        assert exp_integral(1, 1.0, 1e9) == pytest.approx(1.0, abs=1e-12)

    def test_known_value(self):
        assert exp_integral(2, 0.5, 2.0) == pytest.approx(1.0 - math.exp(-2.0), rel=1e-14)

    def test_zero_length(self):
        assert exp_integral(3, 0.7, 0.0) == 0.0

    @pytest.mark.parametrize("k,x,t", [(1, 0.05, 10.0), (3, 0.5, 2.5), (6, 1.3, 0.01)])
    def test_matches_quadrature(self, k, x, t):
        expected, _ = integrate.quad(lambda s: math.exp(-k * x * s), 0.0, t)
        assert exp_integral(k, x, t) == pytest.approx(expected, rel=1e-10)

    def test_bounded_by_length(self):
        t = np.linspace(0.0, 50.0, 101)
        values = exp_integral(2, 0.3, t)
        assert np.all(values >= 0.0)
        assert np.all(values <= t + 1e-15)

    def test_tiny_rate_is_accurate(self):
        # expm1 로 계산하므로 kxt 가 매우 작아도 t 에 수렴
        assert exp_integral(1, 1e-12, 2.0) == pytest.approx(2.0, rel=1e-9)

    @pytest.mark.parametrize("k,x,t", [(-1, 0.5, 1.0), (1, 0.0, 1.0), (1, 0.5, -1.0)])
    def test_invalid_inputs(self, k, x, t):
        with pytest.raises(HawkesInputError):
            exp_integral(k, x, t)


def single_group_model(excitation, baseline) -> LowRankModel:
    excitation = np.asarray(excitation, dtype=float)
    return LowRankModel.from_parts(np.ones((1, 1)), excitation.reshape(1, 1, -1),
                                   np.asarray(baseline, dtype=float).reshape(1, -1))


class TestKernelValues:

    def test_zero_coefficients(self):
        model = single_group_model([0.0, 0.0], [0.0, 0.0, 0.0])
        hp = Hyperparams(K=2, r=1)
        assert kernel_value(model, hp, 0, 0, 1.5) == 0.0
        assert baseline_value(model, hp, 0, 1.5) == 0.0

    def test_value_at_zero_is_coefficient_sum(self):
        model = single_group_model([0.3, 0.2, 0.1], [1.0, 0.5, 0.25, 0.125])
        hp = Hyperparams(K=3, r=1, delta=0.9, gamma=0.2)
        assert kernel_value(model, hp, 0, 0, 0.0) == pytest.approx(0.6)
        assert baseline_value(model, hp, 0, 0.0) == pytest.approx(1.875)

    def test_single_exponential(self):
        model = single_group_model([2.0], [0.0, 0.0])
        hp = Hyperparams(K=1, r=1, delta=1.0)
        assert kernel_value(model, hp, 0, 0, math.log(2.0)) == pytest.approx(1.0, rel=1e-14)

    def test_baseline_constant_term(self):
        model = single_group_model([0.0], [0.4, 0.0])
        hp = Hyperparams(K=1, r=1)
        np.testing.assert_allclose(baseline_value(model, hp, 0, np.array([0.0, 5.0, 500.0])), 0.4)

    def test_group_out_of_range(self):
        model = single_group_model([1.0], [1.0, 0.0])
        hp = Hyperparams(K=1, r=1)
        with pytest.raises(IndexOutOfRange):
            kernel_value(model, hp, 0, 1, 0.5)
        with pytest.raises(IndexError):
            baseline_value(model, hp, 2, 0.5)


class TestLowRankModel:

    def test_from_parts_augmentation(self):
        rng = np.random.default_rng(0)
        model = LowRankModel.from_parts(rng.random((4, 2)), rng.random((2, 2, 3)), rng.random((2, 4)))
        assert (model.d, model.r, model.K) == (4, 2, 3)
        np.testing.assert_array_equal(model.P[4], [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(model.P[:4, 2], 0.0)
        np.testing.assert_array_equal(model.alpha[:, 2, :], 0.0)
        np.testing.assert_array_equal(model.alpha[:2, :2, 0], 0.0)

    def test_negative_projection_rejected(self):
        with pytest.raises(HawkesInputError):
            LowRankModel.from_parts(-np.ones((2, 1)), np.ones((1, 1, 1)), np.ones((1, 2)))

    def test_broken_augmented_row_rejected(self):
        P = np.array([[1.0, 0.0], [0.5, 1.0]])
        with pytest.raises(HawkesInputError):
            LowRankModel(P, np.zeros((2, 2, 2)))

    def test_target_augmented_slot_rejected(self):
        alpha = np.zeros((2, 2, 2))
        alpha[0, 1, 1] = 1.0
        with pytest.raises(HawkesInputError):
            LowRankModel(np.eye(2), alpha)

    def test_arrays_are_read_only(self):
        model = single_group_model([1.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            model.P[0, 0] = 2.0

    def test_with_projection_keeps_coefficients(self):
        model = single_group_model([1.0], [1.0, 0.5])
        moved = model.with_projection(np.array([[3.0]]))
        assert moved.P[0, 0] == 3.0
        np.testing.assert_array_equal(moved.alpha, model.alpha)


class TestNetwork:

    def test_complete_policy(self):
        assert Network.complete(3).adjacency.sum() == 9
        assert Network.complete(3, self_loops=False).adjacency.sum() == 6

    def test_from_edges(self):
        net = Network.from_edges(3, [(0, 1), (1, 2)], self_loops=False)
        assert net.adjacency[0, 1] == 1 and net.adjacency[1, 0] == 0
        assert net.max_out_degree == 1
        np.testing.assert_array_equal(net.sources[2], [1])

    def test_from_edges_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            Network.from_edges(3, [(0, 3)])

    def test_non_binary_rejected(self):
        with pytest.raises(HawkesInputError):
            Network(np.array([[0, 2], [1, 0]]))


class TestHistory:

    def test_realization_rejects_decreasing_times(self):
        with pytest.raises(HawkesInputError):
            Realization(0.0, 5.0, np.array([2.0, 1.0]), np.array([0, 0]))

    def test_realization_rejects_outside_window(self):
        with pytest.raises(HawkesInputError):
            Realization(0.0, 5.0, np.array([1.0, 6.0]), np.array([0, 0]))

    def test_ties_allowed(self, tie_history):
        assert tie_history.n == 3
        assert tie_history.sigma == 2
        np.testing.assert_array_equal(tie_history.type_counts(), [2, 1])

    def test_type_out_of_range(self):
        with pytest.raises(IndexOutOfRange):
            EventHistory.from_arrays(2, [(0.0, 1.0)], [[(0.5, 2)]])

    def test_empty_realizations(self):
        history = EventHistory.from_arrays(3, [(0.0, 1.0), (1.0, 4.0)], [[], []])
        assert history.n == 0
        assert history.sigma == 0
        assert history.realizations[1].length == 3.0

    def test_subset(self):
        history = EventHistory.from_arrays(2, [(0.0, 1.0), (0.0, 2.0)], [[(0.5, 0)], [(1.5, 1), (1.7, 1)]])
        sub = history.subset([1])
        assert sub.H == 1 and sub.n == 2


class TestHyperparams:

    def test_defaults(self):
        hp = Hyperparams()
        assert (hp.K, hp.r, hp.gamma, hp.delta, hp.epsilon) == (6, 2, 0.05, 0.5, 1e-3)
        assert hp.to_dict()["max_outer_iters"] == 50

    @pytest.mark.parametrize("kwargs", [{"K": 0}, {"r": 0}, {"gamma": 0.0}, {"delta": -1.0},
                                        {"epsilon": 0.0}, {"rel_tol": 0.0}, {"mm_sweeps": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(HawkesInputError):
            Hyperparams(**kwargs)


class TestFitReport:

    def test_p_step_monotone(self):
        report = FitReport()
        for phase, ll in [("init", -10.0), ("alpha", -5.0), ("p", -4.0), ("alpha", -4.5), ("p", -4.4)]:
            report.record(phase, ll)
        assert report.p_step_monotone()
        report.record("p", -6.0)
        assert not report.p_step_monotone()
