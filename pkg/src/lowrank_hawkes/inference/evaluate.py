"""
평가 모듈

- 커널 복원: 정규화 L² 오차 (그룹 라벨 순열 정렬 후 최솟값)
- 그룹 복원: P 행에 대한 k-means
- 다음 이벤트 예측: 강도 점수, AUC, 상위 k 정확도, 빈도 기반 NAIVE 기준선
"""

import itertools
import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score

from .errors import HawkesInputError
from .likelihood import group_baselines, group_kernels, intensity
from .simulate import SyntheticConfig, true_kernel_matrix
from .types import EventHistory, Hyperparams, LowRankModel, Network

logger = logging.getLogger(__name__)

GRID_T_MAX = 10.0
GRID_POINTS = 1000
# 이 이하의 그룹 수는 모든 순열을, 초과하면 헝가리안 정렬을 사용
MAX_EXHAUSTIVE_GROUPS = 5


def kernel_grid(t_max: float = GRID_T_MAX, n_points: int = GRID_POINTS) -> np.ndarray:
    if not t_max > 0 or n_points < 2:
        raise HawkesInputError(f"잘못된 격자 설정: t_max={t_max}, n_points={n_points}")
    return np.linspace(0.0, t_max, n_points)


def _l2_norms(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.sqrt(trapezoid(values ** 2, grid, axis=0))


def normalized_l2_error(inferred: np.ndarray, truth: np.ndarray, grid: np.ndarray) -> float:
    """(1/#쌍) Σ ‖ĝ - g̃‖ / (‖ĝ‖ + ‖g̃‖). 두 커널이 모두 0 인 쌍은 0 을 기여합니다.

    Args:
        inferred (np.ndarray): 격자 위 추정 커널 (n_points, ...)
        truth (np.ndarray): 같은 모양의 정답 커널
        grid (np.ndarray): 격자 (n_points,)

    Returns:
        float: [0, 1] 범위의 오차
    """
    inferred = np.asarray(inferred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if inferred.shape != truth.shape or inferred.shape[0] != len(grid):
        raise HawkesInputError(f"커널 배열 모양이 맞지 않습니다: {inferred.shape} vs {truth.shape}, 격자 {len(grid)}")
    diff = _l2_norms(inferred - truth, grid)
    scale = _l2_norms(inferred, grid) + _l2_norms(truth, grid)
    ratio = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    return float(ratio.mean())


def recover_groups(P: np.ndarray, r: int, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """P 의 행(유형 임베딩)을 k-means 로 r 개 군집으로 나눕니다.

    Args:
        P (np.ndarray): 자유 블록 (d, r_fit)
        r (int): 군집 수
        seed (int): k-means 시드

    Returns:
        Tuple[np.ndarray, np.ndarray]: (유형별 군집 번호 (d,), 군집 중심 (r, r_fit))
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or r < 1 or r > P.shape[0]:
        raise HawkesInputError(f"군집 수 {r} 가 행 수 {P.shape[0]} 에 맞지 않습니다.")
    km = KMeans(n_clusters=r, n_init=10, random_state=seed)
    assignment = km.fit_predict(P)
    return assignment.astype(np.int64), km.cluster_centers_


def inferred_kernel_matrix(model: LowRankModel, hp: Hyperparams, grid: np.ndarray) -> np.ndarray:
    """임베딩 좌표의 ĝ, shape (n_points, r, r), [t, 출처 j, 목표 i]"""
    return group_kernels(model, hp, np.asarray(grid, dtype=float))


def group_kernel_matrix(model: LowRankModel, hp: Hyperparams, centers: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """군집 중심 좌표로 옮긴 커널: 그룹 b → a 커널 = c_b ĝ c_aᵀ"""
    G = inferred_kernel_matrix(model, hp, grid)
    return np.einsum("bj,tji,ai->tba", centers, G, centers)


def group_baseline_matrix(model: LowRankModel, hp: Hyperparams, centers: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """군집 중심 좌표의 기저율 c_a·μ̂(t), shape (n_points, r)"""
    return group_baselines(model, hp, np.asarray(grid, dtype=float)) @ centers.T


def _permutations(r: int, inferred: np.ndarray, truth: np.ndarray, grid: np.ndarray):
    if r <= MAX_EXHAUSTIVE_GROUPS:
        return [np.array(p) for p in itertools.permutations(range(r))]
    # 쌍별 오차의 대각 비용으로 하나의 순열만 고른다
    cost = np.zeros((r, r))
    for a in range(r):
        for b in range(r):
            cost[a, b] = normalized_l2_error(inferred[:, a, a], truth[:, b, b], grid)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(r, dtype=np.int64)
    perm[cols] = rows
    return [perm]


def aligned_l2_error(inferred: np.ndarray, truth: np.ndarray, grid: np.ndarray) -> Tuple[float, np.ndarray]:
    """그룹 라벨 순열에 대한 최소 정규화 L² 오차와 그 순열 (perm[정답 그룹] = 추정 그룹)"""
    r = truth.shape[1]
    best, best_perm = np.inf, np.arange(r)
    for perm in _permutations(r, inferred, truth, grid):
        err = normalized_l2_error(inferred[:, perm][:, :, perm], truth, grid)
        if err < best:
            best, best_perm = err, perm
    return best, best_perm


def baseline_error(inferred: np.ndarray, truth: np.ndarray, grid: np.ndarray) -> float:
    """그룹 기저율 곡선 (n_points, r) 의 정규화 L² 오차"""
    return normalized_l2_error(inferred, truth, grid)


def evaluate_recovery(model: LowRankModel, hp: Hyperparams, cfg: SyntheticConfig,
                      grid: Optional[np.ndarray] = None, seed: int = 0) -> Dict[str, object]:
    """합성 데이터의 정답과 비교한 커널/기저율/그룹 복원 지표

    Returns:
        dict: l2_error, baseline_error, adjusted_rand, groups_recovered, permutation, assignment
    """
    if model.d != cfg.d:
        raise HawkesInputError(f"모델 d({model.d})와 설정 d({cfg.d})가 다릅니다.")
    grid = kernel_grid() if grid is None else grid
    assignment, centers = recover_groups(model.projection, cfg.r_true, seed=seed)
    inferred = group_kernel_matrix(model, hp, centers, grid)
    truth = true_kernel_matrix(cfg, grid)
    l2, perm = aligned_l2_error(inferred, truth, grid)
    base_inferred = group_baseline_matrix(model, hp, centers, grid)[:, perm]
    base_truth = np.broadcast_to(cfg.mu_true, base_inferred.shape)
    ari = float(adjusted_rand_score(cfg.group_of, assignment))
    result = {
        "l2_error": l2,
        "baseline_error": baseline_error(base_inferred, base_truth, grid),
        "adjusted_rand": ari,
        "groups_recovered": bool(np.isclose(ari, 1.0)),
        "permutation": perm.tolist(),
        "assignment": assignment.tolist(),
    }
    logger.info(f"복원 평가: L2={l2:.4f}, 기저율 오차={result['baseline_error']:.4f}, ARI={ari:.4f}")
    return result


def kernel_curves(model: LowRankModel, hp: Hyperparams, cfg: Optional[SyntheticConfig] = None,
                  grid: Optional[np.ndarray] = None, seed: int = 0) -> pd.DataFrame:
    """(t, source_group, target_group, g_true, g_inferred) 표. cfg 가 없으면 임베딩 좌표 커널만 기록합니다."""
    grid = kernel_grid() if grid is None else grid
    if cfg is None:
        inferred = inferred_kernel_matrix(model, hp, grid)
        truth = np.full_like(inferred, np.nan)
    else:
        _, centers = recover_groups(model.projection, cfg.r_true, seed=seed)
        inferred = group_kernel_matrix(model, hp, centers, grid)
        truth = true_kernel_matrix(cfg, grid)
        _, perm = aligned_l2_error(inferred, truth, grid)
        inferred = inferred[:, perm][:, :, perm]
    n_points, r, _ = inferred.shape
    src, dst = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
    return pd.DataFrame({
        "t": np.repeat(grid, r * r),
        "source_group": np.tile(src.ravel(), n_points),
        "target_group": np.tile(dst.ravel(), n_points),
        "g_true": truth.reshape(-1),
        "g_inferred": inferred.reshape(-1),
    })


def predict_scores(model: LowRankModel, hp: Hyperparams, history: EventHistory, network: Network,
                   h: int, t: float) -> np.ndarray:
    """시각 t 직전까지의 이력으로 계산한 유형별 점수 λ_u(t)"""
    return intensity(model, hp, history, network, h, t)


def score_events(model: LowRankModel, hp: Hyperparams, history: EventHistory, network: Network) -> np.ndarray:
    """이력의 모든 이벤트 m 에 대해 λ(t_m⁻) 를 감쇠 누적 재귀식으로 계산합니다. O(n·d·K·r).

    Returns:
        np.ndarray: (n, d), 이벤트 순서는 실현 순서 후 실현 내 순서
    """
    if model.d != history.d or network.d != history.d:
        raise HawkesInputError("모델, 이력, 네트워크의 d 가 일치하지 않습니다.")
    d, K = model.d, model.K
    proj = model.projection
    adj_t = network.adjacency.T.astype(float)
    ks = np.arange(1, K + 1)
    out = np.zeros((history.n, d))
    row = 0
    for real in history.realizations:
        base = group_baselines(model, hp, real.times - real.t_minus) @ proj.T
        state = np.zeros((d, K))
        pending = []
        t_cur = real.t_minus
        for m in range(real.n):
            t_m = real.times[m]
            if t_m > t_cur:
                if pending:
                    np.add.at(state, np.asarray(pending), 1.0)
                    pending = []
                state *= np.exp(-hp.delta * (t_m - t_cur) * ks)
                t_cur = t_m
            # Q[v, i] = Σ_jk P_vj α_ji,k C_v^k, λ_u += Σ_v A_vu Σ_i P_ui Q[v, i]
            Q = np.einsum("vj,jik,vk->vi", proj, model.excitation, state)
            out[row] = base[m] + np.einsum("uv,vi,ui->u", adj_t, Q, proj)
            pending.append(real.types[m])
            row += 1
    return out


def event_types(history: EventHistory) -> np.ndarray:
    if history.n == 0:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([real.types for real in history.realizations])


def _check_scores(scores: np.ndarray, true_types: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=float)
    true_types = np.asarray(true_types, dtype=np.int64)
    if scores.ndim != 2 or scores.shape[0] != true_types.size or scores.shape[0] == 0:
        raise HawkesInputError(f"점수 행렬 {scores.shape} 와 정답 유형 {true_types.shape} 이 맞지 않습니다.")
    if np.any(true_types < 0) or np.any(true_types >= scores.shape[1]):
        raise HawkesInputError("정답 유형이 점수 열 범위를 벗어났습니다.")
    return scores, true_types


def _rank_counts(scores: np.ndarray, true_types: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    own = scores[np.arange(true_types.size), true_types][:, None]
    greater = (scores > own).sum(axis=1)
    lower = (scores < own).sum(axis=1)
    ties = (scores == own).sum(axis=1) - 1
    return greater, lower, ties


def auc(scores: np.ndarray, true_types: np.ndarray) -> float:
    """이벤트별 one-vs-rest AUC 의 평균: (정답보다 낮은 점수 수 + 0.5·동점 수) / (d - 1)"""
    scores, true_types = _check_scores(scores, true_types)
    d = scores.shape[1]
    if d < 2:
        return 0.5
    _, lower, ties = _rank_counts(scores, true_types)
    return float(((lower + 0.5 * ties) / (d - 1)).mean())


def accuracy_at(scores: np.ndarray, true_types: np.ndarray, fraction: float = 0.30) -> float:
    """정답 유형이 상위 ⌈fraction·d⌉ 후보 안에 드는 이벤트 비율. 동점은 정답에 불리하게 셉니다."""
    if not 0.0 < fraction <= 1.0:
        raise HawkesInputError(f"fraction 은 (0, 1] 범위여야 합니다: {fraction}")
    scores, true_types = _check_scores(scores, true_types)
    top = int(np.ceil(fraction * scores.shape[1] - 1e-12))
    greater, _, ties = _rank_counts(scores, true_types)
    return float((greater + ties < top).mean())


def naive_baseline(train: EventHistory) -> np.ndarray:
    """학습 이력의 유형별 등장 횟수 (시간에 무관한 점수)"""
    return train.type_counts().astype(float)


def evaluate_prediction(model: LowRankModel, hp: Hyperparams, train: EventHistory, test: EventHistory,
                        network: Network, fraction: float = 0.30) -> Dict[str, float]:
    """테스트 이벤트에 대한 모델과 NAIVE 기준선의 AUC, 정확도"""
    if test.n == 0:
        raise HawkesInputError("테스트 이력에 이벤트가 없습니다.")
    truth = event_types(test)
    scores = score_events(model, hp, test, network)
    naive = np.broadcast_to(naive_baseline(train), scores.shape)
    result = {
        "auc": auc(scores, truth),
        "accuracy": accuracy_at(scores, truth, fraction),
        "naive_auc": auc(naive, truth),
        "naive_accuracy": accuracy_at(naive, truth, fraction),
        "test_events": int(test.n),
        "fraction": fraction,
    }
    logger.info(f"예측 평가: AUC={result['auc']:.4f} (NAIVE {result['naive_auc']:.4f}), "
                f"정확도={result['accuracy']:.4f} (NAIVE {result['naive_accuracy']:.4f})")
    return result


def summarize(values: Sequence[float]) -> Dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "min": float(arr.min()), "max": float(arr.max())}
