"""
커널 계수 α 최적화 (교대 최적화의 α 단계)

텐서를 P 로 투영한 뒤 로그 장벽이 추가된 오목 목적함수
    Σ_{h,m} ln(c^{hm}·α) + ε Σ ln(장벽 항) - b·α
를 계수 하한 α ≥ ALPHA_FLOOR 아래에서 사영 뉴턴법(또는 BFGS)으로 최대화합니다.

변수 벡터 x 의 배치: [트리거링 계수 (j, i, k=1..K) 행 우선, 기저율 계수 (i, k=0..K) 행 우선]
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import HawkesInputError
from .likelihood import INFEASIBLE, projected_sources
from .types import FitReport, Hyperparams, TensorPair

logger = logging.getLogger(__name__)

ARMIJO = 0.01
SHRINK = 0.5
MIN_STEP = 1e-14
# 조밀 헤시안 분해를 사용할 최대 미지수 개수
DENSE_NEWTON_LIMIT = 2000
# 계수 하한 (반복값은 항상 이 값 이상, 이벤트가 없으면 이 값으로 내림)
ALPHA_FLOOR = 1e-12
# 하한과 이 간격 이내인 좌표는 하한에 붙은 것으로 봄
ACTIVE_GAP = 1e-10


def free_size(r: int, K: int) -> int:
    return r * r * K + r * (K + 1)


def pack_alpha(alpha: np.ndarray) -> np.ndarray:
    """증강 alpha ((r+1)×(r+1)×(K+1)) → 자유 변수 벡터"""
    r = alpha.shape[0] - 1
    return np.concatenate([alpha[:r, :r, 1:].ravel(), alpha[r, :r, :].ravel()])


def unpack_alpha(x: np.ndarray, r: int, K: int) -> np.ndarray:
    """자유 변수 벡터 → 증강 alpha"""
    n_exc = r * r * K
    alpha = np.zeros((r + 1, r + 1, K + 1))
    alpha[:r, :r, 1:] = x[:n_exc].reshape(r, r, K)
    alpha[r, :r, :] = x[n_exc:].reshape(r, K + 1)
    return alpha


@dataclass(frozen=True, eq=False)
class ProjectedStats:
    """P 로 투영한 통계량

    c: (n, 자유 변수 수) 이벤트별 선형 계수, λ_e = c[e]·x
    b: (자유 변수 수,) 보정항(compensator) 계수
    exc_rows: (D 행 수, K) 장벽 항 Σ_k α_ji,k D_{h,m,u,v,k} 의 D 값 (P 와 무관)
    base_rows: (n, K+1) 장벽 항 μ̂_i(t_m - T_-) 의 기저 값
    """
    c: np.ndarray
    b: np.ndarray
    exc_rows: np.ndarray
    base_rows: np.ndarray
    r: int
    K: int

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def n_exc(self) -> int:
        return self.r * self.r * self.K


def project_tensors(P: np.ndarray, tensors: TensorPair) -> ProjectedStats:
    """c^{hm}_{ijk} = Σ_{u,v} P_ui P_vj D_{h,m,u,v,k}, b_{ijk} = Σ_{u,v,h} P_ui P_vj B_{h,u,v,k}

    Args:
        P (np.ndarray): 증강 투영 행렬 ((d+1)×(r+1))
        tensors (TensorPair): B, D 텐서
    """
    d, r, K = P.shape[0] - 1, P.shape[1] - 1, tensors.K
    if d != tensors.d:
        raise HawkesInputError(f"P 의 d({d})와 텐서의 d({tensors.d})가 다릅니다.")
    proj = P[:d, :r]
    Pu = proj[tensors.event_type]
    E = projected_sources(P, tensors)
    c_exc = np.einsum("ejk,ei->ejik", E, Pu).reshape(tensors.n, r * r * K)
    c_base = np.einsum("ei,ek->eik", Pu, tensors.d_baseline).reshape(tensors.n, r * (K + 1))
    AP = tensors.adjacency @ proj
    b_exc = np.einsum("vj,vi,vk->jik", proj, AP, tensors.source_totals())
    b_base = np.outer(proj.sum(axis=0), tensors.b_baseline.sum(axis=0))
    exc_rows = tensors.d_values[np.any(tensors.d_values > 0, axis=1)]
    return ProjectedStats(
        c=np.hstack([c_exc, c_base]),
        b=np.concatenate([b_exc.ravel(), b_base.ravel()]),
        exc_rows=exc_rows,
        base_rows=tensors.d_baseline,
        r=r,
        K=K,
    )


def barrier_objective(x: np.ndarray, stats: ProjectedStats, epsilon: float,
                      order: int = 2) -> Tuple[float, Optional[np.ndarray], Optional[np.ndarray]]:
    """장벽 목적함수의 값, 기울기, 헤시안

    Args:
        x (np.ndarray): 자유 변수 벡터
        stats (ProjectedStats): 투영 통계량
        epsilon (float): 장벽 가중치 (0 이면 장벽 없는 목적함수)
        order (int): 0=값만, 1=값+기울기, 2=값+기울기+헤시안

    Returns:
        Tuple: (값, 기울기, 헤시안). 실행 불가능하면 (INFEASIBLE, None, None)
    """
    r, K, n_exc = stats.r, stats.K, stats.n_exc
    lam = stats.c @ x
    if lam.size and not np.all(lam > 0):
        return INFEASIBLE, None, None
    z_exc = z_base = None
    if epsilon > 0:
        z_exc = stats.exc_rows @ x[:n_exc].reshape(r * r, K).T
        z_base = stats.base_rows @ x[n_exc:].reshape(r, K + 1).T
        if (z_exc.size and not np.all(z_exc > 0)) or (z_base.size and not np.all(z_base > 0)):
            return INFEASIBLE, None, None

    value = float(np.log(lam).sum()) - float(stats.b @ x)
    if epsilon > 0:
        value += epsilon * (float(np.log(z_exc).sum()) + float(np.log(z_base).sum()))
    if order == 0:
        return value, None, None

    inv = 1.0 / lam
    grad = stats.c.T @ inv - stats.b
    if epsilon > 0:
        g_exc = (stats.exc_rows.T @ (1.0 / z_exc)).T.ravel()
        g_base = (stats.base_rows.T @ (1.0 / z_base)).T.ravel()
        grad = grad + epsilon * np.concatenate([g_exc, g_base])
    if order == 1:
        return value, grad, None

    weighted = stats.c * inv[:, None]
    hess = -(weighted.T @ weighted)
    if epsilon > 0:
        for p in range(r * r):
            rows = stats.exc_rows / z_exc[:, p:p + 1]
            hess[p * K:(p + 1) * K, p * K:(p + 1) * K] -= epsilon * (rows.T @ rows)
        for i in range(r):
            rows = stats.base_rows / z_base[:, i:i + 1]
            lo = n_exc + i * (K + 1)
            hess[lo:lo + K + 1, lo:lo + K + 1] -= epsilon * (rows.T @ rows)
    return value, grad, hess


def _newton_direction(grad: np.ndarray, hess: np.ndarray) -> np.ndarray:
    """-H Δ = g 를 풀어 상승 방향 Δ 를 구합니다. 특이 행렬이면 최소제곱 해를 사용합니다."""
    neg = -hess
    try:
        factor = scipy.linalg.cho_factor(neg, check_finite=False)
        return scipy.linalg.cho_solve(factor, grad, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        return scipy.linalg.lstsq(neg, grad, check_finite=False)[0]


def _bound_mask(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """하한에 붙어 있고 기울기가 하한 쪽을 가리키는 좌표 (이번 반복에서 고정)"""
    return (x - ALPHA_FLOOR <= ACTIVE_GAP) & (grad < 0)


def _line_search(x, value, grad, direction, stats, epsilon) -> Optional[Tuple[np.ndarray, float]]:
    """하한으로 사영한 점에서 실행 가능성을 먼저 확인하는 Armijo 역추적 탐색. (새 x, 새 값) 또는 None"""
    if float(grad @ direction) <= 0:
        return None
    step = 1.0
    while step >= MIN_STEP:
        x_trial = np.maximum(x + step * direction, ALPHA_FLOOR)
        gain = float(grad @ (x_trial - x))
        if gain > 0:
            new_value, _, _ = barrier_objective(x_trial, stats, epsilon, order=0)
            if new_value != INFEASIBLE and new_value >= value + ARMIJO * gain:
                return x_trial, new_value
        step *= SHRINK
    return None


def _solve(x: np.ndarray, stats: ProjectedStats, epsilon: float, hp: Hyperparams,
           quasi_newton: bool) -> Tuple[np.ndarray, bool, int]:
    """x ≥ ALPHA_FLOOR 영역에서 사영 뉴턴법 (또는 사영 BFGS) 으로 장벽 목적함수를 최대화합니다."""
    value, grad, hess = barrier_objective(x, stats, epsilon, order=1 if quasi_newton else 2)
    if value == INFEASIBLE:
        raise HawkesInputError("α 초기값이 실행 불가능합니다 (어떤 강도 또는 장벽 항이 0 이하).")
    inv_hess = None
    for it in range(1, hp.max_newton_iters + 1):
        free = ~_bound_mask(x, grad)
        direction = np.zeros_like(x)
        if quasi_newton:
            if inv_hess is None:
                inv_hess = np.eye(x.size) / max(1.0, float(np.abs(grad).max()))
            direction[free] = inv_hess[np.ix_(free, free)] @ grad[free]
        elif free.any():
            direction[free] = _newton_direction(grad[free], hess[np.ix_(free, free)])
        decrement = float(grad @ direction)
        if decrement / 2 <= hp.newton_tol * max(1.0, abs(value)) or not np.any(grad[free]):
            return x, True, it - 1
        found = _line_search(x, value, grad, direction, stats, epsilon)
        if found is None:
            logger.warning(f"α 단계: 반복 {it} 에서 상승 방향을 찾지 못했습니다 (값={value:.6f}).")
            return x, False, it
        x_new, _ = found
        value, grad_new, hess = barrier_objective(x_new, stats, epsilon, order=1 if quasi_newton else 2)
        if quasi_newton:
            s = x_new - x
            y = grad - grad_new
            sy = float(s @ y)
            if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
                if it == 1:
                    inv_hess = np.eye(x.size) * (sy / float(y @ y))
                rho = 1.0 / sy
                left = np.eye(x.size) - rho * np.outer(s, y)
                inv_hess = left @ inv_hess @ left.T + rho * np.outer(s, s)
        x, grad = x_new, grad_new
    return x, False, hp.max_newton_iters


def optimize_alpha(P: np.ndarray, tensors: TensorPair, hp: Hyperparams, alpha_init: np.ndarray,
                   report: Optional[FitReport] = None, stats: Optional[ProjectedStats] = None) -> np.ndarray:
    """α 단계: 장벽 목적함수를 최대화한 계수 텐서를 반환합니다.

    Args:
        P (np.ndarray): 고정된 증강 투영 행렬
        tensors (TensorPair): B, D 텐서
        hp (Hyperparams): epsilon, max_newton_iters, newton_tol, quasi_newton, epsilon_refine 사용
        alpha_init (np.ndarray): 엄밀히 실행 가능한 초기값 (증강 형태)
        report (FitReport, optional): 수렴 여부를 기록할 보고서
        stats (ProjectedStats, optional): 미리 계산한 투영 통계량

    Returns:
        np.ndarray: 증강 형태의 새 alpha (항상 실행 가능, 자유 계수는 모두 ALPHA_FLOOR 이상)
    """
    r, K = P.shape[1] - 1, tensors.K
    x = pack_alpha(alpha_init)
    if tensors.n == 0:
        logger.info("이벤트가 없어 α 를 하한값으로 내립니다.")
        return unpack_alpha(np.full_like(x, ALPHA_FLOOR), r, K)
    if stats is None:
        stats = project_tensors(P, tensors)
    if barrier_objective(x, stats, hp.epsilon, order=0)[0] == INFEASIBLE:
        raise HawkesInputError("α 초기값이 실행 불가능합니다 (어떤 강도 또는 장벽 항이 0 이하).")
    # c, D 가 음이 아니므로 하한으로 올려도 실행 가능성은 유지된다
    x = np.maximum(x, ALPHA_FLOOR)
    quasi = hp.quasi_newton or x.size > DENSE_NEWTON_LIMIT
    x, converged, iters = _solve(x, stats, hp.epsilon, hp, quasi)
    if hp.epsilon_refine:
        x, converged, more = _solve(x, stats, hp.epsilon / 10, hp, quasi)
        iters += more
    method = "BFGS" if quasi else "Newton"
    if converged:
        logger.info(f"α 단계 수렴 ({method}, 반복 {iters}회)")
    else:
        logger.warning(f"α 단계 미수렴 ({method}, 반복 {iters}회)")
    if report is not None:
        report.newton_converged.append(converged)
        if not converged:
            report.warnings.append(f"alpha step not converged after {iters} iterations")
    return unpack_alpha(x, r, K)
