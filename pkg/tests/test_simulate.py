"""
합성 설정 생성과 thinning 시뮬레이션 테스트
"""

import numpy as np
import pytest
from scipy import stats

from lowrank_hawkes.inference.errors import HawkesInputError, SimulationError
from lowrank_hawkes.inference.likelihood import intensity
from lowrank_hawkes.inference.simulate import (GroupKernelIntensity, LowRankIntensity, SyntheticConfig,
                                               generate_synthetic_config, simulate, true_kernel,
                                               true_kernel_matrix)
from lowrank_hawkes.inference.types import Hyperparams, LowRankModel, Network


def poisson_config(rate: float, d: int = 1) -> SyntheticConfig:
    """커널이 0 인 단일 그룹 설정 (유형별 상수 강도 rate)"""
    return SyntheticConfig(d=d, erdos_p=0.0, r_true=1, omega=np.array([[5.0]]), nu=np.array([[0.0]]),
                           mu_true=np.array([rate]), group_of=np.zeros(d, dtype=np.int64), seed=0)


class TestSyntheticConfig:

    def test_empty_graph(self):
        _, network = generate_synthetic_config(2, 0.0, seed=1, self_loops=False)
        assert network.adjacency.sum() == 0

    def test_complete_graph(self):
        _, with_loops = generate_synthetic_config(50, 1.0, seed=1)
        _, without = generate_synthetic_config(50, 1.0, seed=1, self_loops=False)
        assert with_loops.max_out_degree == 50
        assert without.max_out_degree == 49

    def test_mean_out_degree(self):
        _, network = generate_synthetic_config(100, 0.1, seed=0, self_loops=False)
        assert network.adjacency.sum() / 100 == pytest.approx(9.9, abs=1.5)

    def test_parameter_ranges(self):
        cfg, _ = generate_synthetic_config(40, 0.2, seed=3)
        assert np.all((cfg.omega >= 1.0) & (cfg.omega <= 10.0))
        assert np.all((cfg.nu >= 0.0) & (cfg.nu <= 1.0 / 50))
        assert np.all((cfg.mu_true >= 0.0) & (cfg.mu_true <= 0.01))
        assert set(np.unique(cfg.group_of)) <= {0, 1}

    def test_seeded(self):
        a, net_a = generate_synthetic_config(20, 0.3, seed=11)
        b, net_b = generate_synthetic_config(20, 0.3, seed=11)
        np.testing.assert_array_equal(a.nu, b.nu)
        np.testing.assert_array_equal(a.group_of, b.group_of)
        np.testing.assert_array_equal(net_a.adjacency, net_b.adjacency)

    def test_dict_round_trip(self):
        cfg, _ = generate_synthetic_config(6, 0.5, seed=2, r_true=3)
        again = SyntheticConfig.from_dict(cfg.to_dict())
        np.testing.assert_array_equal(again.omega, cfg.omega)
        np.testing.assert_array_equal(again.group_of, cfg.group_of)
        assert again.r_true == 3

    @pytest.mark.parametrize("d,p", [(1, 0.1), (5, 1.5), (5, -0.1)])
    def test_invalid(self, d, p):
        with pytest.raises(HawkesInputError):
            generate_synthetic_config(d, p, seed=0)


class TestTrueKernel:

    def test_value_at_zero_follows_phase(self):
        cfg, _ = generate_synthetic_config(4, 0.5, seed=0)
        for i in range(2):
            for j in range(2):
                factor = 2.0 / 3.0 if (i + j) % 2 == 0 else 1.0
                assert true_kernel(cfg, i, j, 0.0) == pytest.approx(factor * cfg.nu[i, j], rel=1e-12)

    def test_non_negative_and_decaying_envelope(self):
        cfg, _ = generate_synthetic_config(4, 0.5, seed=5)
        t = np.linspace(0.0, 50.0, 501)
        G = true_kernel_matrix(cfg, t)
        assert np.all(G >= 0.0)
        assert np.all(G <= cfg.nu / (t[:, None, None] + 1.0) ** 2 + 1e-15)

    def test_zero_amplitude(self):
        assert true_kernel(poisson_config(0.01), 0, 0, 3.0) == 0.0

    def test_invalid_arguments(self):
        cfg, _ = generate_synthetic_config(4, 0.5, seed=0)
        with pytest.raises(HawkesInputError):
            true_kernel(cfg, 2, 0, 1.0)
        with pytest.raises(HawkesInputError):
            true_kernel(cfg, 0, 0, -1.0)


class TestSimulate:

    def test_deterministic(self):
        cfg, network = generate_synthetic_config(10, 0.3, seed=4)
        a = simulate(cfg, network, (0.0, 200.0), 15, seed=8)
        b = simulate(cfg, network, (0.0, 200.0), 15, seed=8)
        for ra, rb in zip(a.realizations, b.realizations):
            np.testing.assert_array_equal(ra.times, rb.times)
            np.testing.assert_array_equal(ra.types, rb.types)

    def test_parallel_matches_serial(self):
        cfg, network = generate_synthetic_config(10, 0.3, seed=4)
        a = simulate(cfg, network, (0.0, 200.0), 12, seed=8)
        b = simulate(cfg, network, (0.0, 200.0), 12, seed=8, threads=2)
        for ra, rb in zip(a.realizations, b.realizations):
            np.testing.assert_array_equal(ra.times, rb.times)
            np.testing.assert_array_equal(ra.types, rb.types)

    def test_silent_process(self):
        cfg = poisson_config(0.0, d=3)
        history = simulate(cfg, Network.complete(3), (0.0, 100.0), 50, seed=0)
        assert history.n == 0 and history.H == 50

    def test_poisson_counts(self):
        history = simulate(poisson_config(0.01), Network.complete(1), (0.0, 100.0), 10000, seed=1)
        counts = np.array([real.n for real in history.realizations])
        assert counts.mean() == pytest.approx(1.0, abs=0.04)
        assert counts.var() == pytest.approx(1.0, rel=0.1)

    def test_poisson_times_uniform(self):
        history = simulate(poisson_config(1.0), Network.complete(1), (0.0, 10.0), 1000, seed=2)
        times = np.concatenate([real.times for real in history.realizations])
        assert stats.kstest(times / 10.0, "uniform").pvalue > 1e-3

    def test_histories_respect_window(self):
        cfg, network = generate_synthetic_config(8, 0.5, seed=1)
        history = simulate(cfg, network, (5.0, 105.0), 20, seed=3)
        for real in history.realizations:
            assert (real.t_minus, real.t_plus) == (5.0, 105.0)
            if real.n:
                assert real.times[0] >= 5.0 and real.times[-1] <= 105.0
                assert np.all(np.diff(real.times) >= 0)
                assert real.types.max() < 8

    def test_event_cap(self):
        with pytest.raises(SimulationError) as exc:
            simulate(poisson_config(10.0), Network.complete(1), (0.0, 100.0), 1, seed=0, max_events=5)
        assert exc.value.realization == 0
        assert exc.value.count == 6

    def test_invalid_window(self):
        with pytest.raises(HawkesInputError):
            simulate(poisson_config(0.1), Network.complete(1), (1.0, 0.0), 1, seed=0)

    def test_network_dimension_mismatch(self):
        with pytest.raises(HawkesInputError):
            simulate(poisson_config(0.1), Network.complete(2), (0.0, 1.0), 1, seed=0)


class TestIntensityModels:

    def test_low_rank_intensity_matches_likelihood(self, small_instance):
        history, network, hp, model = small_instance
        prepared = LowRankIntensity(model, hp).prepare(network)
        real = history.realizations[0]
        for t in np.linspace(real.t_minus, real.t_plus, 7):
            past = real.times < t
            lam = prepared.baseline(t - real.t_minus)
            if np.any(past):
                lam = lam + prepared.excitation(t - real.times[past], real.types[past])
            np.testing.assert_allclose(lam, intensity(model, hp, history, network, 0, t), rtol=1e-12)

    def test_envelopes_bound_intensity(self):
        cfg, network = generate_synthetic_config(6, 0.6, seed=9)
        prepared = GroupKernelIntensity(cfg).prepare(network)
        rng = np.random.default_rng(0)
        lags = rng.uniform(0.0, 20.0, size=30)
        sources = rng.integers(0, 6, size=30)
        assert prepared.excitation(lags, sources).sum() <= prepared.excitation_bound(lags, sources) + 1e-15
        assert prepared.baseline(0.0).sum() <= prepared.baseline_bound(0.0) + 1e-15

    def test_hyperparams_must_match_model(self):
        model = LowRankModel.from_parts(np.ones((1, 1)), np.ones((1, 1, 2)), np.ones((1, 3)))
        with pytest.raises(HawkesInputError):
            LowRankIntensity(model, Hyperparams(K=3, r=1)).prepare(Network.complete(1))

    @pytest.mark.slow
    def test_exponential_branching_mean_count(self):
        # μ=0.5, α/δ=0.5: E[N(T)] = μT + αμ/(δ-α)·(T - (1 - e^{-(δ-α)T})/(δ-α)) = 99
        model = LowRankModel.from_parts(np.ones((1, 1)), np.full((1, 1, 1), 0.5), np.array([[0.5, 0.0]]))
        hp = Hyperparams(K=1, r=1, delta=1.0)
        history = simulate(LowRankIntensity(model, hp), Network.complete(1), (0.0, 100.0), 1000, seed=6)
        counts = np.array([real.n for real in history.realizations])
        assert counts.mean() == pytest.approx(99.0, rel=0.05)
