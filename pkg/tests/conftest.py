"""공용 테스트 픽스처: 작은 무작위 이력, 네트워크, 모델"""

import numpy as np
import pytest

from lowrank_hawkes.inference.types import EventHistory, Hyperparams, LowRankModel, Network, Realization


def random_history(rng: np.random.Generator, d: int, H: int, max_events: int,
                   window=(0.0, 10.0)) -> EventHistory:
    reals = []
    for _ in range(H):
        n = int(rng.integers(0, max_events + 1))
        times = np.sort(rng.uniform(window[0], window[1], size=n))
        types = rng.integers(0, d, size=n)
        reals.append(Realization(window[0], window[1], times, types))
    return EventHistory(d, tuple(reals))


def random_network(rng: np.random.Generator, d: int, p: float = 0.5, self_loops: bool = True) -> Network:
    adjacency = (rng.random((d, d)) < p).astype(np.int8)
    np.fill_diagonal(adjacency, 1 if self_loops else 0)
    return Network(adjacency)


def random_model(rng: np.random.Generator, d: int, r: int, K: int,
                 low: float = 0.05, high: float = 1.0) -> LowRankModel:
    return LowRankModel.from_parts(
        rng.uniform(low, high, size=(d, r)),
        rng.uniform(low, high, size=(r, r, K)) / K,
        rng.uniform(low, high, size=(r, K + 1)) / K,
    )


def random_instance(seed: int, d_max: int = 10, H_max: int = 5, n_max: int = 50, K_max: int = 4, r_max: int = 3):
    """(history, network, hp, model) 무작위 소형 인스턴스"""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, d_max + 1))
    H = int(rng.integers(1, H_max + 1))
    K = int(rng.integers(1, K_max + 1))
    r = int(rng.integers(1, r_max + 1))
    hp = Hyperparams(K=K, r=r, gamma=float(rng.uniform(0.05, 1.0)), delta=float(rng.uniform(0.1, 2.0)))
    history = random_history(rng, d, H, n_max)
    network = random_network(rng, d, p=float(rng.uniform(0.1, 0.9)), self_loops=bool(rng.integers(0, 2)))
    model = random_model(rng, d, r, K)
    return history, network, hp, model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_instance():
    """이벤트가 충분한 d=5 인스턴스"""
    rng = np.random.default_rng(7)
    hp = Hyperparams(K=2, r=2, gamma=0.3, delta=0.8)
    history = random_history(rng, 5, 4, 40)
    while history.n < 40:
        history = random_history(rng, 5, 4, 40)
    network = random_network(rng, 5, p=0.6)
    model = random_model(rng, 5, 2, 2)
    return history, network, hp, model


@pytest.fixture
def tie_history():
    """같은 시각의 이벤트가 있는 실현 하나"""
    return EventHistory.from_arrays(2, [(0.0, 5.0)], [[(1.0, 0), (1.0, 1), (2.0, 0)]])
