"""
학습 드라이버 - α 단계와 P 단계를 번갈아 수행합니다.

    1. B, D 텐서를 한 번 생성
    2. 반복: α ← argmax (장벽 뉴턴), P ← MM 스윕 mm_sweeps 회
    3. 외부 반복 한 번의 상대 로그우도 개선이 rel_tol 미만이면 종료
"""

import logging
import time
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import HawkesInputError
from .likelihood import INFEASIBLE, log_likelihood_tensor
from .optimize_alpha import optimize_alpha, project_tensors
from .optimize_p import build_quadforms, mm_update
from .tensors import build_tensors
from .types import EventHistory, FitReport, Hyperparams, LowRankModel, Network, TensorPair

logger = logging.getLogger(__name__)

INIT_LOW = 0.1
INIT_HIGH = 1.0

ProgressCallback = Callable[[int, float], None]


def init_params(d: int, hp: Hyperparams, seed: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """초기 (P0, alpha0). 자유 좌표는 모두 양수이므로 초기 로그우도가 유한합니다.

    Args:
        d (int): 이벤트 유형 수
        hp (Hyperparams): r, K 사용
        seed (int, optional): 지정하지 않으면 hp.seed

    Returns:
        Tuple[np.ndarray, np.ndarray]: 증강 P ((d+1)×(r+1)), 증강 alpha ((r+1)×(r+1)×(K+1))
    """
    if d < 1:
        raise HawkesInputError(f"d 는 양수여야 합니다: {d}")
    rng = np.random.default_rng(hp.seed if seed is None else seed)
    scale = 1.0 / (hp.K * hp.r)
    projection = rng.uniform(INIT_LOW, INIT_HIGH, size=(d, hp.r))
    excitation = rng.uniform(INIT_LOW, INIT_HIGH, size=(hp.r, hp.r, hp.K)) * scale
    baseline = rng.uniform(INIT_LOW, INIT_HIGH, size=(hp.r, hp.K + 1)) * scale
    model = LowRankModel.from_parts(projection, excitation, baseline)
    return model.P.copy(), model.alpha.copy()


def _reinit_rows(P: np.ndarray, quad, tensors: TensorPair, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """강도가 0 인 이벤트의 유형 행을 다시 무작위로 초기화합니다."""
    lam = quad.event_values(P)
    bad_types = np.unique(tensors.event_type[~(lam > 0)])
    if bad_types.size:
        P = P.copy()
        P[bad_types, :-1] = rng.uniform(INIT_LOW, INIT_HIGH, size=(bad_types.size, P.shape[1] - 1))
    return P, bad_types


def fit(history: EventHistory, network: Network, hp: Hyperparams,
        init: Optional[Tuple[np.ndarray, np.ndarray]] = None,
        progress_callback: Optional[ProgressCallback] = None,
        threads: int = 1, reproducible: bool = False,
        tensors: Optional[TensorPair] = None) -> Tuple[LowRankModel, FitReport]:
    """교대 최적화로 저랭크 Hawkes 모델을 학습합니다.

    Args:
        history (EventHistory): 학습 이력 (n ≥ 1)
        network (Network): 자극 허용 그래프
        hp (Hyperparams): 하이퍼파라미터
        init (tuple, optional): (P0, alpha0). 없으면 init_params(d, hp, hp.seed)
        progress_callback (callable, optional): 외부 반복마다 (반복 번호, 로그우도) 로 호출
        threads (int): 텐서 생성 병렬 프로세스 수
        reproducible (bool): 로그우도 합을 순서 무관 정확 합산으로 계산
        tensors (TensorPair, optional): 이미 만든 텐서 (재사용 시)

    Returns:
        Tuple[LowRankModel, FitReport]: 학습된 모델과 학습 기록
    """
    if history.n < 1:
        raise HawkesInputError("학습 이력에 이벤트가 하나 이상 있어야 합니다.")
    report = FitReport()

    if tensors is None:
        t0 = time.time()
        tensors = build_tensors(history, network, hp, threads=threads)
        report.add_time("build_tensors", time.time() - t0)

    P, alpha = init if init is not None else init_params(history.d, hp)
    model = LowRankModel(P, alpha)
    if model.d != history.d or model.r != hp.r or model.K != hp.K:
        raise HawkesInputError(f"초기값 차원(d={model.d}, r={model.r}, K={model.K})이 설정과 다릅니다.")
    ll = log_likelihood_tensor(model, tensors, reproducible)
    if ll == INFEASIBLE:
        raise HawkesInputError("초기 모델에서 강도가 0 이하인 이벤트가 있습니다.")
    report.record("init", ll)
    logger.info(f"학습 시작: d={history.d}, n={history.n}, H={history.H}, r={hp.r}, K={hp.K}, 초기 LL={ll:.6f}")

    rng = np.random.default_rng([hp.seed, 1])
    retries = 0
    # 마지막으로 강도가 모두 양수였던 (모델, 로그우도)
    feasible = (model, ll)
    for it in range(1, hp.max_outer_iters + 1):
        ll_start = ll

        t0 = time.time()
        stats = project_tensors(model.P, tensors)
        alpha = optimize_alpha(model.P, tensors, hp, model.alpha, report=report, stats=stats)
        model = LowRankModel(model.P, alpha)
        ll = log_likelihood_tensor(model, tensors, reproducible)
        report.record("alpha", ll)
        report.add_time("alpha", time.time() - t0)
        feasible = (model, ll)

        t0 = time.time()
        quad = build_quadforms(model.alpha, tensors)
        P = model.P
        for _ in range(hp.mm_sweeps):
            P = mm_update(P, quad)
        P, bad_types = _reinit_rows(P, quad, tensors, rng)
        model = LowRankModel(P, model.alpha)
        ll = log_likelihood_tensor(model, tensors, reproducible)
        report.add_time("p", time.time() - t0)
        report.outer_iters_used = it
        if bad_types.size:
            retries += 1
            message = f"rows {bad_types.tolist()} of P re-randomized (retry {retries}/{hp.reinit_retries})"
            logger.warning(f"반복 {it}: 강도가 0 인 이벤트가 있어 P 의 행 {bad_types.tolist()} 을 재초기화합니다.")
            report.warnings.append(message)
            report.record("reinit", ll)
            if retries > hp.reinit_retries or ll == INFEASIBLE:
                model, ll = feasible
                report.record("restored", ll)
                logger.warning(f"반복 {it}: 재초기화를 포기하고 마지막 실행 가능 모델 (LL={ll:.6f}) 로 되돌립니다.")
                report.warnings.append("giving up after repeated infeasible projections; restored last feasible model")
                break
            feasible = (model, ll)
            continue
        report.record("p", ll)
        feasible = (model, ll)
        logger.info(f"반복 {it}: LL={ll:.6f} (α 단계 후 {report.loglik_trace[-2]:.6f})")

        if progress_callback:
            progress_callback(it, ll)

        improvement = (ll - ll_start) / max(abs(ll_start), 1e-300)
        if improvement < hp.rel_tol:
            report.converged = True
            break

    if not report.converged:
        logger.warning(f"최대 반복 {hp.max_outer_iters}회 안에 수렴하지 않았습니다.")
        report.warnings.append(f"outer loop not converged after {report.outer_iters_used} iterations")
    logger.info(f"학습 종료: LL={ll:.6f}, 반복 {report.outer_iters_used}회, 수렴={report.converged}")
    return model, report
