"""
저랭크 다변량 Hawkes 모델의 공통 도메인 타입

인덱스 규칙:
    - 문서의 유형 1..d, 그룹 1..r 은 코드에서 0..d-1, 0..r-1 로 사용합니다.
    - 증강 슬롯은 코드 기준으로 유형 d, 그룹 r 입니다.
    - 커널 인덱스 k 는 0..K 이며, 기저율은 k=0(상수항)부터, 트리거링 커널은 k=1 부터 사용합니다.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import HawkesInputError, IndexOutOfRange

logger = logging.getLogger(__name__)


def exp_integral(k: int, x: float, t):
    """지수 기저 함수의 적분 f_{kx}(t) = (1 - e^{-kxt}) / (kx)

    Args:
        k (int): 기저 인덱스 (k >= 0). k=0 이면 극한값 t 를 반환합니다.
        x (float): 감쇠율 (gamma 또는 delta, > 0)
        t (float | np.ndarray): 적분 구간 길이 (>= 0)

    Returns:
        float | np.ndarray: 0 이상 t 이하의 값
    """
    if k < 0:
        raise HawkesInputError(f"k 는 0 이상이어야 합니다: {k}")
    if not x > 0:
        raise HawkesInputError(f"감쇠율은 양수여야 합니다: {x}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise HawkesInputError(f"적분 구간은 0 이상이어야 합니다: {t}")
    if k == 0:
        out = t_arr.copy()
    else:
        rate = k * x
        out = -np.expm1(-rate * t_arr) / rate
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Network:
    """d 개 이벤트 유형 사이의 방향 그래프. adjacency[v, u] = 1 이면 v 유형이 u 유형을 자극합니다."""
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise HawkesInputError(f"인접 행렬은 d×d 정방 행렬이어야 합니다: shape={adj.shape}")
        if not np.all((adj == 0) | (adj == 1)):
            raise HawkesInputError("인접 행렬의 원소는 0 또는 1 이어야 합니다.")
        adj = adj.astype(np.int8)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def d(self) -> int:
        return int(self.adjacency.shape[0])

    @cached_property
    def max_out_degree(self) -> int:
        """Δ = max_v |{u : A_vu = 1}|"""
        return int(self.adjacency.sum(axis=1).max())

    @cached_property
    def sources(self) -> Tuple[np.ndarray, ...]:
        """유형 u 를 자극할 수 있는 유형 목록 (A_vu = 1 인 v)"""
        return tuple(np.flatnonzero(self.adjacency[:, u]) for u in range(self.d))

    @classmethod
    def complete(cls, d: int, self_loops: bool = True) -> "Network":
        """네트워크가 주어지지 않은 경우의 기본값: 모든 u≠v 에 대해 A_uv = 1"""
        adj = np.ones((d, d), dtype=np.int8)
        if not self_loops:
            np.fill_diagonal(adj, 0)
        return cls(adj)

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[Tuple[int, int]], self_loops: bool = True) -> "Network":
        """엣지 리스트 (src, dst) 로부터 네트워크 생성. 대각 성분은 self_loops 정책을 따릅니다."""
        adj = np.zeros((d, d), dtype=np.int8)
        for src, dst in edges:
            if not (0 <= src < d and 0 <= dst < d):
                raise IndexOutOfRange(f"알 수 없는 노드 ID: ({src}, {dst}), d={d}")
            adj[src, dst] = 1
        if self_loops:
            np.fill_diagonal(adj, 1)
        return cls(adj)


@dataclass(frozen=True, eq=False)
class Realization:
    """관측 구간 [t_minus, t_plus] 에서의 단일 실현"""
    t_minus: float
    t_plus: float
    times: np.ndarray
    types: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        types = np.asarray(self.types, dtype=np.int64).reshape(-1)
        if times.shape != types.shape:
            raise HawkesInputError("times 와 types 의 길이가 다릅니다.")
        if not self.t_plus >= self.t_minus:
            raise HawkesInputError(f"관측 구간이 잘못되었습니다: [{self.t_minus}, {self.t_plus}]")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise HawkesInputError("이벤트 시간이 비감소 순서가 아닙니다.")
            if times[0] < self.t_minus or times[-1] > self.t_plus:
                raise HawkesInputError(
                    f"관측 구간 밖의 이벤트가 있습니다: [{times[0]}, {times[-1]}] ⊄ [{self.t_minus}, {self.t_plus}]")
        times.setflags(write=False)
        types.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "t_minus", float(self.t_minus))
        object.__setattr__(self, "t_plus", float(self.t_plus))

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def length(self) -> float:
        return self.t_plus - self.t_minus


@dataclass(frozen=True, eq=False)
class EventHistory:
    """H 개의 독립 실현으로 이루어진 이벤트 이력"""
    d: int
    realizations: Tuple[Realization, ...]

    def __post_init__(self):
        if self.d < 1:
            raise HawkesInputError(f"이벤트 유형 수 d 는 양수여야 합니다: {self.d}")
        reals = tuple(self.realizations)
        for h, real in enumerate(reals):
            if real.n and (real.types.min() < 0 or real.types.max() >= self.d):
                raise IndexOutOfRange(f"실현 {h}: 이벤트 유형이 0..{self.d - 1} 범위를 벗어났습니다.")
        object.__setattr__(self, "realizations", reals)

    @property
    def H(self) -> int:
        return len(self.realizations)

    @cached_property
    def n(self) -> int:
        return int(sum(real.n for real in self.realizations))

    @cached_property
    def sigma(self) -> int:
        """실현별 서로 다른 유형 수의 최댓값"""
        return max((int(np.unique(real.types).size) for real in self.realizations), default=0)

    def type_counts(self) -> np.ndarray:
        counts = np.zeros(self.d, dtype=np.int64)
        for real in self.realizations:
            counts += np.bincount(real.types, minlength=self.d)
        return counts

    def subset(self, indices: Sequence[int]) -> "EventHistory":
        return EventHistory(self.d, tuple(self.realizations[h] for h in indices))

    @classmethod
    def from_arrays(cls, d: int, windows: Sequence[Tuple[float, float]],
                    events: Sequence[Sequence[Tuple[float, int]]]) -> "EventHistory":
        """(t_minus, t_plus) 목록과 실현별 (time, type) 목록으로 이력 생성"""
        reals = []
        for (t_minus, t_plus), evs in zip(windows, events):
            evs = list(evs)
            times = np.array([e[0] for e in evs], dtype=float)
            types = np.array([e[1] for e in evs], dtype=np.int64)
            reals.append(Realization(t_minus, t_plus, times, types))
        return cls(d, tuple(reals))


@dataclass(frozen=True)
class Hyperparams:
    """추론 하이퍼파라미터"""
    K: int = 6
    r: int = 2
    gamma: float = 0.05
    delta: float = 0.5
    epsilon: float = 1e-3
    max_outer_iters: int = 50
    max_newton_iters: int = 50
    rel_tol: float = 1e-6
    seed: int = 0
    mm_sweeps: int = 5
    newton_tol: float = 1e-8
    epsilon_refine: bool = False
    quasi_newton: bool = False
    reinit_retries: int = 3
    max_events_per_realization: int = 10 ** 6

    def __post_init__(self):
        if self.K < 1 or self.r < 1:
            raise HawkesInputError(f"K 와 r 은 1 이상이어야 합니다: K={self.K}, r={self.r}")
        if not (self.gamma > 0 and self.delta > 0 and self.epsilon > 0):
            raise HawkesInputError(
                f"gamma, delta, epsilon 은 양수여야 합니다: "
                f"gamma={self.gamma}, delta={self.delta}, epsilon={self.epsilon}")
        if not self.rel_tol > 0:
            raise HawkesInputError(f"rel_tol 은 양수여야 합니다: {self.rel_tol}")
        if self.max_outer_iters < 1 or self.max_newton_iters < 1 or self.mm_sweeps < 1:
            raise HawkesInputError("반복 횟수 설정은 1 이상이어야 합니다.")

    def to_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class LowRankModel:
    """증강 투영 행렬 P ((d+1)×(r+1)) 와 계수 텐서 alpha ((r+1)×(r+1)×(K+1))

    alpha[j, i, k] (j, i < r, k >= 1) 는 그룹 j → 그룹 i 트리거링 커널의 계수,
    alpha[r, i, k] (k >= 0) 는 그룹 i 의 기저율 계수 β_{i,k} 입니다.
    """
    P: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        alpha = np.array(self.alpha, dtype=float)
        if P.ndim != 2 or alpha.ndim != 3:
            raise HawkesInputError("P 는 2차원, alpha 는 3차원 배열이어야 합니다.")
        d, r = P.shape[0] - 1, P.shape[1] - 1
        if d < 1 or r < 1 or alpha.shape[:2] != (r + 1, r + 1) or alpha.shape[2] < 2:
            raise HawkesInputError(f"차원이 맞지 않습니다: P={P.shape}, alpha={alpha.shape}")
        if np.any(P < 0):
            raise HawkesInputError("P 의 원소는 0 이상이어야 합니다.")
        aug_row = np.zeros(r + 1)
        aug_row[r] = 1.0
        if not np.array_equal(P[d], aug_row) or np.any(P[:d, r] != 0):
            raise HawkesInputError("P 의 증강 행/열이 규칙과 다릅니다.")
        if np.any(alpha[:, r, :] != 0) or np.any(alpha[:r, :r, 0] != 0):
            raise HawkesInputError("alpha 의 증강 규칙 위반: alpha[:, r, :] 와 alpha[:r, :r, 0] 은 0 이어야 합니다.")
        P.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self) -> int:
        return self.P.shape[0] - 1

    @property
    def r(self) -> int:
        return self.P.shape[1] - 1

    @property
    def K(self) -> int:
        return self.alpha.shape[2] - 1

    @property
    def projection(self) -> np.ndarray:
        """자유 블록 P[:d, :r]"""
        return self.P[:self.d, :self.r]

    @property
    def excitation(self) -> np.ndarray:
        """트리거링 계수 (r, r, K), [j, i, k-1]"""
        return self.alpha[:self.r, :self.r, 1:]

    @property
    def baseline(self) -> np.ndarray:
        """기저율 계수 β (r, K+1)"""
        return self.alpha[self.r, :self.r, :]

    @classmethod
    def from_parts(cls, projection: np.ndarray, excitation: np.ndarray, baseline: np.ndarray) -> "LowRankModel":
        """자유 블록으로부터 증강 규칙을 적용해 모델 생성

        Args:
            projection: (d, r) 비음수 행렬
            excitation: (r, r, K) 트리거링 계수
            baseline: (r, K+1) 기저율 계수
        """
        projection = np.asarray(projection, dtype=float)
        excitation = np.asarray(excitation, dtype=float)
        baseline = np.asarray(baseline, dtype=float)
        d, r = projection.shape
        K = excitation.shape[2]
        if excitation.shape != (r, r, K) or baseline.shape != (r, K + 1):
            raise HawkesInputError(
                f"계수 차원이 맞지 않습니다: excitation={excitation.shape}, baseline={baseline.shape}, r={r}")
        P = np.zeros((d + 1, r + 1))
        P[:d, :r] = projection
        P[d, r] = 1.0
        alpha = np.zeros((r + 1, r + 1, K + 1))
        alpha[:r, :r, 1:] = excitation
        alpha[r, :r, :] = baseline
        return cls(P, alpha)

    def with_projection(self, projection: np.ndarray) -> "LowRankModel":
        return LowRankModel.from_parts(projection, self.excitation, self.baseline)

    def with_coefficients(self, excitation: np.ndarray, baseline: np.ndarray) -> "LowRankModel":
        return LowRankModel.from_parts(self.projection, excitation, baseline)


def _check_group(model: LowRankModel, *groups: int):
    for g in groups:
        if not 0 <= g < model.r:
            raise IndexOutOfRange(f"그룹 인덱스 {g} 가 0..{model.r - 1} 범위를 벗어났습니다.")


def kernel_value(model: LowRankModel, hp: Hyperparams, j: int, i: int, t):
    """그룹 j → 그룹 i 트리거링 커널 ĝ_ji(t) = Σ_{k=1..K} α_{ji,k} e^{-kδt}"""
    _check_group(model, j, i)
    t = np.asarray(t, dtype=float)
    ks = np.arange(1, model.K + 1)
    out = np.exp(-hp.delta * np.multiply.outer(t, ks)) @ model.excitation[j, i]
    return float(out) if out.ndim == 0 else out


def baseline_value(model: LowRankModel, hp: Hyperparams, i: int, t):
    """그룹 i 의 기저율 μ̂_i(t) = Σ_{k=0..K} β_{i,k} e^{-kγt}"""
    _check_group(model, i)
    t = np.asarray(t, dtype=float)
    ks = np.arange(0, model.K + 1)
    out = np.exp(-hp.gamma * np.multiply.outer(t, ks)) @ model.baseline[i]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class TensorPair:
    """B, D 희소 텐서

    D (이벤트별, u = u_m 은 암묵적):
        d_event[ρ], d_source[ρ] = v (< d), d_values[ρ, k-1] = D_{h,m,u_m,v,k} (k=1..K)
        d_baseline[e, k] = D_{h,m,u_m,d+1,k} = e^{-kγ(t_m - T_-)} (k=0..K)
    B (실현별, A 마스크는 투영 시점에 적용):
        b_realization[ρ], b_source[ρ] = v, b_values[ρ, k-1] = Σ_m 1{u_m=v} f_{kδ}(T_+ - t_m)
        b_baseline[h, k] = f_{kγ}(T_+ - T_-)
        따라서 B_{h,u,v,k} = A_vu · b_values, B_{h,u,d+1,k} = b_baseline[h, k] (u < d)
    """
    d: int
    K: int
    adjacency: np.ndarray
    event_realization: np.ndarray
    event_type: np.ndarray
    event_time: np.ndarray
    d_event: np.ndarray
    d_source: np.ndarray
    d_values: np.ndarray
    d_baseline: np.ndarray
    b_realization: np.ndarray
    b_source: np.ndarray
    b_values: np.ndarray
    b_baseline: np.ndarray

    @property
    def n(self) -> int:
        return int(self.event_type.size)

    @property
    def H(self) -> int:
        return int(self.b_baseline.shape[0])

    @property
    def nnz_d(self) -> int:
        return int(np.count_nonzero(self.d_values) + np.count_nonzero(self.d_baseline))

    @property
    def nnz_b(self) -> int:
        """A 마스크 적용 후의 B 비영 원소 수"""
        fan_out = self.adjacency.sum(axis=1)[self.b_source]
        exc = int((np.count_nonzero(self.b_values, axis=1) * fan_out).sum())
        return exc + int(np.count_nonzero(self.b_baseline)) * self.d

    def realization_slice(self, h: int) -> Tuple[np.ndarray, np.ndarray]:
        """실현 h 에 속하는 (이벤트 인덱스, D 행 인덱스)"""
        events = np.flatnonzero(self.event_realization == h)
        rows = np.flatnonzero(np.isin(self.d_event, events))
        return events, rows

    def dense_d(self) -> np.ndarray:
        """테스트용 조밀 D: (n, d+1, K+1), [e, v, k]"""
        out = np.zeros((self.n, self.d + 1, self.K + 1))
        out[self.d_event, self.d_source, 1:] = self.d_values
        out[:, self.d, :] = self.d_baseline
        return out

    def dense_b(self) -> np.ndarray:
        """테스트용 조밀 B: (H, d, d+1, K+1), [h, u, v, k]"""
        out = np.zeros((self.H, self.d, self.d + 1, self.K + 1))
        for h, v, vals in zip(self.b_realization, self.b_source, self.b_values):
            targets = np.flatnonzero(self.adjacency[v])
            out[h, targets, v, 1:] += vals
        out[:, :, self.d, :] = self.b_baseline[:, None, :]
        return out

    def source_totals(self) -> np.ndarray:
        """Σ_h B'_{h,v,k}: (d, K)"""
        totals = np.zeros((self.d, self.K))
        np.add.at(totals, self.b_source, self.b_values)
        return totals


@dataclass
class FitReport:
    """학습 과정 기록"""
    loglik_trace: List[float] = field(default_factory=list)
    phase_trace: List[str] = field(default_factory=list)
    wall_times: Dict[str, float] = field(default_factory=dict)
    converged: bool = False
    outer_iters_used: int = 0
    newton_converged: List[bool] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def record(self, phase: str, loglik: float):
        self.phase_trace.append(phase)
        self.loglik_trace.append(float(loglik))

    def add_time(self, phase: str, seconds: float):
        self.wall_times[phase] = self.wall_times.get(phase, 0.0) + seconds

    def p_step_monotone(self, rel: float = 1e-9) -> bool:
        """P 갱신으로 생성된 기록이 직전 값보다 감소하지 않았는지"""
        for prev, cur, phase in zip(self.loglik_trace, self.loglik_trace[1:], self.phase_trace[1:]):
            if phase == "p" and cur < prev - rel * abs(prev):
                return False
        return True

    def to_dict(self) -> Dict[str, object]:
        return {
            "loglik_trace": self.loglik_trace,
            "phase_trace": self.phase_trace,
            "wall_times": self.wall_times,
            "converged": self.converged,
            "outer_iters_used": self.outer_iters_used,
            "newton_converged": self.newton_converged,
            "warnings": self.warnings,
        }
