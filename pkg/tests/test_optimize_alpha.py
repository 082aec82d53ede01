"""
α 단계 (로그 장벽 뉴턴법) 테스트
"""

import numpy as np
import pytest

from conftest import random_instance, random_model
from lowrank_hawkes.inference.errors import HawkesInputError
from lowrank_hawkes.inference.likelihood import INFEASIBLE, log_likelihood_tensor
from lowrank_hawkes.inference.optimize_alpha import (ALPHA_FLOOR, barrier_objective, free_size, optimize_alpha,
                                                     pack_alpha, project_tensors, unpack_alpha)
from lowrank_hawkes.inference.tensors import build_tensors
from lowrank_hawkes.inference.types import (EventHistory, FitReport, Hyperparams, LowRankModel, Network,
                                            Realization)


def projected_oracle(P, tensors):
    """정의식 그대로의 c, b (조밀 텐서 사용)"""
    d, r = P.shape[0] - 1, P.shape[1] - 1
    D = tensors.dense_d()
    C = np.einsum("ei,vj,evk->ejik", P[tensors.event_type], P, D)
    c = np.hstack([C[:, :r, :r, 1:].reshape(tensors.n, -1), C[:, r, :r, :].reshape(tensors.n, -1)])
    B = tensors.dense_b()
    Bc = np.einsum("ui,vj,huvk->jik", P[:d], P, B)
    b = np.concatenate([Bc[:r, :r, 1:].ravel(), Bc[r, :r, :].ravel()])
    return c, b


class TestPacking:

    def test_pack_unpack_inverse(self):
        rng = np.random.default_rng(0)
        model = random_model(rng, 3, 2, 4)
        x = pack_alpha(model.alpha)
        assert x.size == free_size(2, 4)
        np.testing.assert_array_equal(unpack_alpha(x, 2, 4), model.alpha)


class TestProjection:

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_definition(self, seed):
        history, network, hp, model = random_instance(seed)
        tensors = build_tensors(history, network, hp)
        stats = project_tensors(model.P, tensors)
        c, b = projected_oracle(model.P, tensors)
        np.testing.assert_allclose(stats.c, c, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(stats.b, b, rtol=1e-10, atol=1e-14)

    def test_identity_projection_reads_tensors(self):
        history, network, hp, _ = random_instance(4, d_max=3)
        d = history.d
        model = LowRankModel.from_parts(np.eye(d), np.ones((d, d, hp.K)), np.ones((d, hp.K + 1)))
        tensors = build_tensors(history, network, hp)
        stats = project_tensors(model.P, tensors)
        D = tensors.dense_d()
        c_exc = stats.c[:, :d * d * hp.K].reshape(-1, d, d, hp.K)
        for e, u in enumerate(tensors.event_type):
            np.testing.assert_allclose(c_exc[e, :, u, :], D[e, :d, 1:])
            assert np.all(np.delete(c_exc[e], u, axis=1) == 0.0)

    def test_linear_forms_reproduce_likelihood(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        stats = project_tensors(model.P, tensors)
        value, _, _ = barrier_objective(pack_alpha(model.alpha), stats, 0.0, order=0)
        assert value == pytest.approx(log_likelihood_tensor(model, tensors), rel=1e-10)


class TestBarrierDerivatives:

    @pytest.fixture
    def setup(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        return project_tensors(model.P, tensors), hp

    def test_gradient_finite_difference(self, setup):
        stats, hp = setup
        rng = np.random.default_rng(1)
        h = 1e-6
        for _ in range(20):
            x = pack_alpha(random_model(rng, 5, 2, 2).alpha)
            _, grad, _ = barrier_objective(x, stats, hp.epsilon, order=1)
            fd = np.zeros_like(x)
            for a in range(x.size):
                step = np.zeros_like(x)
                step[a] = h
                hi, _, _ = barrier_objective(x + step, stats, hp.epsilon, order=0)
                lo, _, _ = barrier_objective(x - step, stats, hp.epsilon, order=0)
                fd[a] = (hi - lo) / (2 * h)
            assert np.linalg.norm(fd - grad) <= 1e-4 * np.linalg.norm(grad) + 1e-6

    def test_hessian_vector_products(self, setup):
        stats, hp = setup
        rng = np.random.default_rng(2)
        h = 1e-6
        for _ in range(20):
            x = pack_alpha(random_model(rng, 5, 2, 2).alpha)
            v = rng.standard_normal(x.size)
            v /= np.linalg.norm(v)
            _, _, hess = barrier_objective(x, stats, hp.epsilon, order=2)
            _, g_hi, _ = barrier_objective(x + h * v, stats, hp.epsilon, order=1)
            _, g_lo, _ = barrier_objective(x - h * v, stats, hp.epsilon, order=1)
            fd = (g_hi - g_lo) / (2 * h)
            assert np.linalg.norm(fd - hess @ v) <= 1e-3 * np.linalg.norm(hess @ v) + 1e-6

    def test_hessian_negative_semidefinite(self, setup):
        stats, hp = setup
        rng = np.random.default_rng(3)
        x = pack_alpha(random_model(rng, 5, 2, 2).alpha)
        _, _, hess = barrier_objective(x, stats, hp.epsilon, order=2)
        eigenvalues = np.linalg.eigvalsh((hess + hess.T) / 2)
        assert eigenvalues.max() <= 1e-8 * max(1.0, abs(eigenvalues.min()))

    def test_scaling_identity(self, setup):
        stats, hp = setup
        x = pack_alpha(random_model(np.random.default_rng(5), 5, 2, 2).alpha)
        s = 1.7
        base, _, _ = barrier_objective(x, stats, hp.epsilon, order=0)
        scaled, _, _ = barrier_objective(s * x, stats, hp.epsilon, order=0)
        n_barrier = stats.exc_rows.shape[0] * stats.r * stats.r + stats.base_rows.shape[0] * stats.r
        expected = (stats.n + hp.epsilon * n_barrier) * np.log(s) - (s - 1) * float(stats.b @ x)
        assert scaled - base == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_infeasible_point(self, setup):
        stats, hp = setup
        x = -pack_alpha(random_model(np.random.default_rng(6), 5, 2, 2).alpha)
        assert barrier_objective(x, stats, hp.epsilon)[0] == INFEASIBLE
        assert barrier_objective(x, stats, 0.0)[0] == INFEASIBLE


class TestOptimizeAlpha:

    def test_ascent(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        stats = project_tensors(model.P, tensors)
        report = FitReport()
        alpha = optimize_alpha(model.P, tensors, hp, model.alpha, report=report)
        before, _, _ = barrier_objective(pack_alpha(model.alpha), stats, hp.epsilon, order=0)
        after, _, _ = barrier_objective(pack_alpha(alpha), stats, hp.epsilon, order=0)
        assert after >= before
        assert len(report.newton_converged) == 1

    def test_quasi_newton_agrees_with_newton(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        stats = project_tensors(model.P, tensors)
        newton_hp = Hyperparams(K=hp.K, r=hp.r, gamma=hp.gamma, delta=hp.delta, max_newton_iters=200)
        newton = optimize_alpha(model.P, tensors, newton_hp, model.alpha)
        bfgs_hp = Hyperparams(K=hp.K, r=hp.r, gamma=hp.gamma, delta=hp.delta, quasi_newton=True,
                              max_newton_iters=500)
        bfgs = optimize_alpha(model.P, tensors, bfgs_hp, model.alpha)
        v_newton, _, _ = barrier_objective(pack_alpha(newton), stats, hp.epsilon, order=0)
        v_bfgs, _, _ = barrier_objective(pack_alpha(bfgs), stats, hp.epsilon, order=0)
        assert v_bfgs == pytest.approx(v_newton, rel=1e-5)

    def test_epsilon_refine_stays_feasible(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        refine_hp = Hyperparams(K=hp.K, r=hp.r, gamma=hp.gamma, delta=hp.delta, epsilon_refine=True)
        alpha = optimize_alpha(model.P, tensors, refine_hp, model.alpha)
        assert log_likelihood_tensor(LowRankModel(model.P, alpha), tensors) > INFEASIBLE

    def test_poisson_rate_recovered(self):
        rng = np.random.default_rng(42)
        T, H, rate = 100.0, 100, 1.0
        reals = []
        for _ in range(H):
            times = np.sort(rng.uniform(0.0, T, size=rng.poisson(rate * T)))
            reals.append(Realization(0.0, T, times, np.zeros(times.size, dtype=np.int64)))
        history = EventHistory(1, tuple(reals))
        network = Network(np.zeros((1, 1), dtype=np.int8))
        hp = Hyperparams(K=1, r=1, gamma=5.0)
        tensors = build_tensors(history, network, hp)
        P = np.eye(2)
        alpha = optimize_alpha(P, tensors, hp, unpack_alpha(np.full(3, 0.5), 1, 1))
        empirical = history.n / (H * T)
        assert alpha[1, 0, 0] == pytest.approx(empirical, rel=0.02)

    def test_no_events_floor(self):
        history = EventHistory.from_arrays(2, [(0.0, 3.0)], [[]])
        hp = Hyperparams(K=2, r=1)
        tensors = build_tensors(history, Network.complete(2), hp)
        model = random_model(np.random.default_rng(0), 2, 1, 2)
        alpha = optimize_alpha(model.P, tensors, hp, model.alpha)
        np.testing.assert_array_equal(pack_alpha(alpha), ALPHA_FLOOR)

    def test_infeasible_start_rejected(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        with pytest.raises(HawkesInputError):
            optimize_alpha(model.P, tensors, hp, np.zeros_like(model.alpha))

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("quasi_newton", [False, True])
    def test_iterates_stay_above_floor(self, seed, quasi_newton):
        history, network, hp, model = random_instance(seed)
        hp = Hyperparams(K=hp.K, r=hp.r, epsilon=hp.epsilon, quasi_newton=quasi_newton)
        tensors = build_tensors(history, network, hp)
        alpha = optimize_alpha(model.P, tensors, hp, model.alpha)
        assert pack_alpha(alpha).min() >= ALPHA_FLOOR
        assert log_likelihood_tensor(LowRankModel(model.P, alpha), tensors) != INFEASIBLE

    def test_tiny_start_lifted_to_floor(self, small_instance):
        history, network, hp, model = small_instance
        tensors = build_tensors(history, network, hp)
        x = pack_alpha(model.alpha)
        x[0] = 1e-300
        alpha = optimize_alpha(model.P, tensors, hp, unpack_alpha(x, hp.r, hp.K))
        assert pack_alpha(alpha).min() >= ALPHA_FLOOR
