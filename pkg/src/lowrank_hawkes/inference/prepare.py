"""
학습/평가용 데이터 준비 유틸리티
"""

import logging
from typing import Tuple

import numpy as np

from .errors import HawkesInputError
from .types import EventHistory, Network, Realization

logger = logging.getLogger(__name__)


def filter_rare_types(history: EventHistory, min_count: int) -> Tuple[EventHistory, np.ndarray]:
    """등장 횟수가 min_count 미만인 유형을 제거하고 남은 유형을 0..d'-1 로 다시 번호 매깁니다.

    Returns:
        Tuple[EventHistory, np.ndarray]: (새 이력, kept[새 번호] = 원래 번호)
    """
    counts = history.type_counts()
    kept = np.flatnonzero(counts >= min_count)
    if kept.size == 0:
        raise HawkesInputError(f"등장 횟수 {min_count} 이상인 유형이 없습니다.")
    remap = np.full(history.d, -1, dtype=np.int64)
    remap[kept] = np.arange(kept.size)
    reals = []
    for real in history.realizations:
        mask = remap[real.types] >= 0
        reals.append(Realization(real.t_minus, real.t_plus, real.times[mask], remap[real.types[mask]]))
    logger.info(f"희귀 유형 제거: {history.d} → {kept.size} 유형 (기준 {min_count}회)")
    return EventHistory(int(kept.size), tuple(reals)), kept


def time_split(history: EventHistory, cutoff: float) -> Tuple[EventHistory, EventHistory]:
    """시각 cutoff 기준 분할. 구간이 cutoff 를 걸치는 실현은 [T_-, cutoff] 과 [cutoff, T_+] 두 실현으로 나뉩니다.

    학습 이력은 cutoff 이전 이벤트, 테스트 이력은 cutoff 이후(포함) 이벤트만 가집니다.
    """
    train, test = [], []
    for real in history.realizations:
        if real.t_plus <= cutoff:
            train.append(real)
        elif real.t_minus >= cutoff:
            test.append(real)
        else:
            before = real.times < cutoff
            train.append(Realization(real.t_minus, cutoff, real.times[before], real.types[before]))
            test.append(Realization(cutoff, real.t_plus, real.times[~before], real.types[~before]))
    return EventHistory(history.d, tuple(train)), EventHistory(history.d, tuple(test))


def realization_split(history: EventHistory, test_fraction: float = 0.2,
                      seed: int = 0) -> Tuple[EventHistory, EventHistory]:
    """실현 단위 무작위 분할 (기본 20% 테스트)"""
    if not 0.0 < test_fraction < 1.0:
        raise HawkesInputError(f"test_fraction 은 (0, 1) 범위여야 합니다: {test_fraction}")
    order = np.random.default_rng(seed).permutation(history.H)
    n_test = int(round(test_fraction * history.H))
    test_idx = np.sort(order[:n_test])
    train_idx = np.sort(order[n_test:])
    return history.subset(train_idx), history.subset(test_idx)


def network_from_history(history: EventHistory, self_loops: bool = True) -> Network:
    """실현 안에서 유형 v 이벤트가 유형 u 이벤트보다 엄밀히 먼저 나온 적이 있으면 엣지 v → u 를 둡니다."""
    adjacency = np.zeros((history.d, history.d), dtype=np.int8)
    for real in history.realizations:
        if real.n < 2:
            continue
        # 각 유형의 첫 등장 시각보다 늦게 나온 유형은 그 유형의 후행 유형
        first = {}
        for t, u in zip(real.times, real.types):
            first.setdefault(int(u), t)
        for v, t_first in first.items():
            later = np.unique(real.types[real.times > t_first])
            adjacency[v, later] = 1
    if self_loops:
        np.fill_diagonal(adjacency, 1)
    else:
        np.fill_diagonal(adjacency, 0)
    logger.info(f"이력 기반 네트워크: 엣지 {int(adjacency.sum())}개")
    return Network(adjacency)
