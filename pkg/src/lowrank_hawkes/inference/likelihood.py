"""
강도 함수와 로그우도 계산

- 텐서 경로: B, D 를 P 로 투영해 O(nnz·r²) 에 계산 (학습용)
- 직접 경로: 과거 이벤트를 모두 더하는 O(n²) 계산 (검증용)
"""

import logging
import math

import numpy as np
from scipy import sparse

from .errors import HawkesInputError
from .types import EventHistory, Hyperparams, LowRankModel, Network, TensorPair, exp_integral

logger = logging.getLogger(__name__)

# 어떤 이벤트의 강도가 0 이하일 때 반환하는 값
INFEASIBLE = float("-inf")


def event_sum_matrix(tensors: TensorPair) -> sparse.csr_matrix:
    """D 행 → 이벤트 합산용 (n × D 행 수) 희소 행렬"""
    rows = tensors.d_event.size
    return sparse.csr_matrix((np.ones(rows), (tensors.d_event, np.arange(rows))), shape=(tensors.n, rows))


def projected_sources(P: np.ndarray, tensors: TensorPair) -> np.ndarray:
    """E[e, j, k] = Σ_v P_vj D_{e,v,k} (v ≤ d 부분), shape (n, r, K)"""
    d, r = P.shape[0] - 1, P.shape[1] - 1
    contrib = P[tensors.d_source, :r][:, :, None] * tensors.d_values[:, None, :]
    flat = event_sum_matrix(tensors) @ contrib.reshape(tensors.d_event.size, r * tensors.K)
    return np.asarray(flat).reshape(tensors.n, r, tensors.K)


def event_intensities(model: LowRankModel, tensors: TensorPair) -> np.ndarray:
    """각 이벤트의 λ_{u_m}(t_m) = Σ_{u,v,i,j,k} P_ui P_vj α_ji,k D_{h,m,u,v,k}"""
    if tensors.n == 0:
        return np.zeros(0)
    E = projected_sources(model.P, tensors)
    per_group = np.einsum("ejk,jik->ei", E, model.excitation) + tensors.d_baseline @ model.baseline.T
    return np.einsum("ei,ei->e", model.projection[tensors.event_type], per_group)


def compensator(model: LowRankModel, tensors: TensorPair) -> float:
    """Σ_{h,u,v,i,j,k} P_ui P_vj α_ji,k B_{h,u,v,k}"""
    proj = model.projection
    totals = tensors.source_totals()
    AP = tensors.adjacency @ proj
    exc = np.einsum("vj,vi,jik,vk->", proj, AP, model.excitation, totals)
    base = proj.sum(axis=0) @ model.baseline @ tensors.b_baseline.sum(axis=0)
    return float(exc + base)


def _log_sum(values: np.ndarray, reproducible: bool) -> float:
    if reproducible:
        return math.fsum(np.log(values))
    return float(np.log(values).sum())


def log_likelihood_tensor(model: LowRankModel, tensors: TensorPair, reproducible: bool = False) -> float:
    """텐서 형태의 로그우도. 강도가 0 이하인 이벤트가 있으면 INFEASIBLE(-inf) 를 반환합니다.

    Args:
        model (LowRankModel): 평가할 모델
        tensors (TensorPair): 같은 이력/네트워크/하이퍼파라미터로 만든 텐서
        reproducible (bool): 이벤트 합을 순서 무관한 정확 합산(fsum)으로 계산

    Returns:
        float: 로그우도 또는 -inf
    """
    if model.d != tensors.d or model.K != tensors.K:
        raise HawkesInputError(f"모델(d={model.d}, K={model.K})과 텐서(d={tensors.d}, K={tensors.K})의 차원이 다릅니다.")
    lam = event_intensities(model, tensors)
    if lam.size and not np.all(lam > 0):
        return INFEASIBLE
    return _log_sum(lam, reproducible) - compensator(model, tensors)


def group_kernels(model: LowRankModel, hp: Hyperparams, lags: np.ndarray) -> np.ndarray:
    """ĝ(lags): shape lags.shape + (r, r), [.., j, i]"""
    ks = np.arange(1, model.K + 1)
    basis = np.exp(-hp.delta * np.multiply.outer(lags, ks))
    return np.einsum("...k,jik->...ji", basis, model.excitation)


def group_baselines(model: LowRankModel, hp: Hyperparams, t: np.ndarray) -> np.ndarray:
    ks = np.arange(0, model.K + 1)
    return np.exp(-hp.gamma * np.multiply.outer(t, ks)) @ model.baseline.T


def intensity(model: LowRankModel, hp: Hyperparams, history: EventHistory, network: Network,
              h: int, t: float) -> np.ndarray:
    """실현 h 의 시각 t 에서 모든 유형의 강도 λ_u(t) (t 보다 엄밀히 앞선 이벤트만 반영)

    Returns:
        np.ndarray: 길이 d 벡터
    """
    if not 0 <= h < history.H:
        raise HawkesInputError(f"실현 인덱스 {h} 가 범위를 벗어났습니다 (H={history.H}).")
    real = history.realizations[h]
    if not real.t_minus <= t <= real.t_plus:
        raise HawkesInputError(f"시각 {t} 가 실현 {h} 의 관측 구간 [{real.t_minus}, {real.t_plus}] 밖입니다.")
    proj = model.projection
    lam = proj @ group_baselines(model, hp, np.asarray(t - real.t_minus))
    past = real.times < t
    if np.any(past):
        G = group_kernels(model, hp, t - real.times[past])
        src = real.types[past]
        # Σ_m A_{u_m u} Σ_{i,j} P_ui P_{u_m j} ĝ_ji
        per_source = np.einsum("mj,mji->mi", proj[src], G)
        lam = lam + np.einsum("mu,ui,mi->u", network.adjacency[src].astype(float), proj, per_source)
    return lam


def log_likelihood_direct(model: LowRankModel, hp: Hyperparams, history: EventHistory, network: Network,
                          reproducible: bool = False) -> float:
    """과거 이벤트 직접 합산으로 계산한 로그우도 (검증용, O(n²))"""
    if model.d != history.d or network.d != history.d:
        raise HawkesInputError("모델, 이력, 네트워크의 d 가 일치하지 않습니다.")
    proj = model.projection
    adj = network.adjacency.astype(float)
    ks = np.arange(1, model.K + 1)
    kernel_mass_rates = hp.delta * ks
    logs = []
    comp = 0.0
    for real in history.realizations:
        base_int = np.array([exp_integral(k, hp.gamma, real.length) for k in range(model.K + 1)])
        comp += float(proj.sum(axis=0) @ model.baseline @ base_int)
        if real.n == 0:
            continue
        lam = np.einsum("mi,mi->m", proj[real.types], group_baselines(model, hp, real.times - real.t_minus))
        lags = real.times[:, None] - real.times[None, :]
        strictly_before = lags > 0
        G = group_kernels(model, hp, np.where(strictly_before, lags, 0.0))
        # pair[m, l] = A_{u_l u_m} Σ_ij P_{u_m i} P_{u_l j} ĝ_ji(t_m - t_l)
        pair = np.einsum("lj,mlji,mi->ml", proj[real.types], G, proj[real.types])
        pair *= adj[real.types][:, real.types].T * strictly_before
        lam = lam + pair.sum(axis=1)
        logs.append(lam)
        # 각 이벤트 이후 관측 종료까지의 커널 적분
        tail = -np.expm1(-np.multiply.outer(real.t_plus - real.times, kernel_mass_rates)) / kernel_mass_rates
        mass = np.einsum("mk,jik->mji", tail, model.excitation)
        comp += float(np.einsum("mj,mji,mu,ui->", proj[real.types], mass, adj[real.types], proj))
    if not logs:
        return -comp
    lam_all = np.concatenate(logs)
    if not np.all(lam_all > 0):
        return INFEASIBLE
    return _log_sum(lam_all, reproducible) - comp
