"""
Hawkes 과정 시뮬레이션 (Ogata thinning)

- GroupKernelIntensity: 두 그룹 합성 실험의 정답 커널 (진동하는 (t+1)^-2 감쇠 커널, 상수 기저율)
- LowRankIntensity: 학습된 LowRankModel

두 강도 모두 시간에 대해 비증가하는 포락선(envelope)을 제공하며, 같은 thinning 루프를 공유합니다.
"""

import dataclasses
import logging
import multiprocessing
import time
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import HawkesInputError, SimulationError
from .types import EventHistory, Hyperparams, LowRankModel, Network, Realization

logger = logging.getLogger(__name__)

DEFAULT_MAX_EVENTS = 10 ** 6


@dataclass(frozen=True, eq=False)
class SyntheticConfig:
    """두 그룹 합성 실험 설정

    omega[i, j], nu[i, j]: 그룹 i → 그룹 j 커널의 주기와 진폭
    mu_true[i]: 그룹 i 의 상수 기저율
    group_of[u]: 유형 u 의 그룹
    """
    d: int
    erdos_p: float
    r_true: int
    omega: np.ndarray
    nu: np.ndarray
    mu_true: np.ndarray
    group_of: np.ndarray
    seed: int
    self_loops: bool = True

    def __post_init__(self):
        r = self.r_true
        if np.shape(self.omega) != (r, r) or np.shape(self.nu) != (r, r) or np.shape(self.mu_true) != (r,):
            raise HawkesInputError(f"그룹 파라미터의 모양이 r_true={r} 와 맞지 않습니다.")
        if np.shape(self.group_of) != (self.d,):
            raise HawkesInputError("group_of 의 길이가 d 와 다릅니다.")
        for name, value in (("omega", self.omega), ("nu", self.nu), ("mu_true", self.mu_true)):
            arr = np.array(value, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        groups = np.array(self.group_of, dtype=np.int64)
        if groups.size and (groups.min() < 0 or groups.max() >= r):
            raise HawkesInputError(f"group_of 의 값은 0..{r - 1} 범위여야 합니다.")
        groups.setflags(write=False)
        object.__setattr__(self, "group_of", groups)

    def projection(self) -> np.ndarray:
        """그룹 지시 행렬 (d, r_true): P_ui = 1 iff group_of(u) = i"""
        out = np.zeros((self.d, self.r_true))
        out[np.arange(self.d), self.group_of] = 1.0
        return out

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "erdos_p": self.erdos_p,
            "r_true": self.r_true,
            "omega": self.omega.tolist(),
            "nu": self.nu.tolist(),
            "mu_true": self.mu_true.tolist(),
            "group_of": self.group_of.tolist(),
            "seed": self.seed,
            "self_loops": self.self_loops,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticConfig":
        return cls(
            d=int(data["d"]),
            erdos_p=float(data["erdos_p"]),
            r_true=int(data["r_true"]),
            omega=np.asarray(data["omega"], dtype=float),
            nu=np.asarray(data["nu"], dtype=float),
            mu_true=np.asarray(data["mu_true"], dtype=float),
            group_of=np.asarray(data["group_of"], dtype=np.int64),
            seed=int(data["seed"]),
            self_loops=bool(data.get("self_loops", True)),
        )


def generate_synthetic_config(d: int, erdos_p: float, seed: int, r_true: int = 2,
                              self_loops: bool = True) -> Tuple[SyntheticConfig, Network]:
    """Erdős–Rényi 방향 그래프와 그룹 커널 파라미터를 생성합니다.

    Args:
        d (int): 이벤트 유형 수 (≥ 2)
        erdos_p (float): 비대각 엣지 확률
        seed (int): 난수 시드
        r_true (int): 그룹 수
        self_loops (bool): 대각 성분(자기 자극) 포함 여부

    Returns:
        Tuple[SyntheticConfig, Network]
    """
    if d < 2:
        raise HawkesInputError(f"d 는 2 이상이어야 합니다: {d}")
    if not 0.0 <= erdos_p <= 1.0:
        raise HawkesInputError(f"erdos_p 는 [0, 1] 범위여야 합니다: {erdos_p}")
    if r_true < 1:
        raise HawkesInputError(f"r_true 는 1 이상이어야 합니다: {r_true}")
    rng = np.random.default_rng(seed)
    adjacency = (rng.random((d, d)) < erdos_p).astype(np.int8)
    np.fill_diagonal(adjacency, 1 if self_loops else 0)
    cfg = SyntheticConfig(
        d=d,
        erdos_p=erdos_p,
        r_true=r_true,
        omega=rng.uniform(1.0, 10.0, size=(r_true, r_true)),
        nu=rng.uniform(0.0, 1.0 / 50, size=(r_true, r_true)),
        mu_true=rng.uniform(0.0, 0.01, size=r_true),
        group_of=rng.integers(0, r_true, size=d),
        seed=seed,
        self_loops=self_loops,
    )
    network = Network(adjacency)
    logger.info(f"합성 설정 생성: d={d}, p={erdos_p}, 평균 출차수={adjacency.sum() / d:.2f}, Δ={network.max_out_degree}")
    return cfg, network


def true_kernel_matrix(cfg: SyntheticConfig, t) -> np.ndarray:
    """모든 그룹 쌍의 정답 커널, shape t.shape + (r, r), [.., 출처 그룹, 목표 그룹]"""
    t = np.asarray(t, dtype=float)
    idx = np.arange(cfg.r_true)
    phase = (np.pi / 2) * ((idx[:, None] + idx[None, :]) % 2)
    tt = t[..., None, None]
    wave = np.sin(2 * np.pi * tt / cfg.omega + phase) + 2.0
    return cfg.nu * wave / (3.0 * (tt + 1.0) ** 2)


def true_kernel(cfg: SyntheticConfig, i: int, j: int, t):
    """그룹 i → 그룹 j 정답 커널 ν_ij (sin(2πt/ω_ij + (π/2)((i+j) mod 2)) + 2) / (3(t+1)²)"""
    if not (0 <= i < cfg.r_true and 0 <= j < cfg.r_true):
        raise HawkesInputError(f"그룹 인덱스 ({i}, {j}) 가 범위를 벗어났습니다 (r={cfg.r_true}).")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise HawkesInputError("t 는 0 이상이어야 합니다.")
    out = true_kernel_matrix(cfg, t)[..., i, j]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class GroupKernelIntensity:
    """합성 정답 강도 λ_u(t) = μ̃_{g(u)} + Σ_{t_m<t} A_{u_m u} g̃_{g(u_m) g(u)}(t - t_m)"""
    cfg: SyntheticConfig
    network: Optional[Network] = None

    @property
    def d(self) -> int:
        return self.cfg.d

    def prepare(self, network: Network) -> "GroupKernelIntensity":
        if network.d != self.cfg.d:
            raise HawkesInputError(f"네트워크 d({network.d})와 설정 d({self.cfg.d})가 다릅니다.")
        return dataclasses.replace(self, network=network)

    @cached_property
    def _fanout(self) -> np.ndarray:
        # 유형 v 이벤트 하나가 모든 목표에 더하는 포락선 진폭 Σ_u A_vu ν_{g(v) g(u)}
        groups = self.cfg.group_of
        return (self.network.adjacency * self.cfg.nu[groups][:, groups]).sum(axis=1)

    def baseline(self, s: float) -> np.ndarray:
        return self.cfg.mu_true[self.cfg.group_of]

    def baseline_bound(self, s: float) -> float:
        return float(self.cfg.mu_true[self.cfg.group_of].sum())

    def excitation(self, lags: np.ndarray, sources: np.ndarray) -> np.ndarray:
        groups = self.cfg.group_of
        G = true_kernel_matrix(self.cfg, lags)[np.arange(lags.size), groups[sources]]
        return (G[:, groups] * self.network.adjacency[sources]).sum(axis=0)

    def excitation_bound(self, lags: np.ndarray, sources: np.ndarray) -> float:
        return float((self._fanout[sources] / (lags + 1.0) ** 2).sum())


@dataclass(frozen=True, eq=False)
class LowRankIntensity:
    """학습된 모델의 강도 (likelihood.intensity 와 같은 식)"""
    model: LowRankModel
    hp: Hyperparams
    network: Optional[Network] = None

    @property
    def d(self) -> int:
        return self.model.d

    def prepare(self, network: Network) -> "LowRankIntensity":
        if network.d != self.model.d:
            raise HawkesInputError(f"네트워크 d({network.d})와 모델 d({self.model.d})가 다릅니다.")
        if self.hp.K != self.model.K:
            raise HawkesInputError(f"하이퍼파라미터 K({self.hp.K})와 모델 K({self.model.K})가 다릅니다.")
        return dataclasses.replace(self, network=network)

    def _decay(self, rate: float, lags, start: int) -> np.ndarray:
        ks = np.arange(start, self.model.K + 1)
        return np.exp(-rate * np.multiply.outer(np.asarray(lags, dtype=float), ks))

    def baseline(self, s: float) -> np.ndarray:
        return self.model.projection @ (self.model.baseline @ self._decay(self.hp.gamma, s, 0))

    def baseline_bound(self, s: float) -> float:
        env = np.abs(self.model.baseline) @ self._decay(self.hp.gamma, s, 0)
        return float(self.model.projection.sum(axis=0) @ env)

    def excitation(self, lags: np.ndarray, sources: np.ndarray) -> np.ndarray:
        proj = self.model.projection
        G = np.einsum("mk,jik->mji", self._decay(self.hp.delta, lags, 1), self.model.excitation)
        per_source = np.einsum("mj,mji->mi", proj[sources], G)
        return np.einsum("mu,ui,mi->u", self.network.adjacency[sources].astype(float), proj, per_source)

    @cached_property
    def _weights(self) -> np.ndarray:
        proj = self.model.projection
        AP = self.network.adjacency @ proj
        # 유형 v 별 Σ_u A_vu Σ_ij P_vj P_ui |α_ji,k|
        return np.einsum("vj,vi,jik->vk", proj, AP, np.abs(self.model.excitation))

    def excitation_bound(self, lags: np.ndarray, sources: np.ndarray) -> float:
        return float(np.einsum("mk,mk->", self._weights[sources], self._decay(self.hp.delta, lags, 1)))


Intensity = Union[GroupKernelIntensity, LowRankIntensity]


def _thinning(intensity: Intensity, t_minus: float, t_plus: float, rng: np.random.Generator,
              max_events: int, h: int) -> Realization:
    """단일 실현 thinning. 포락선은 다음 이벤트 전까지 비증가이므로 현재 시각의 값이 상한입니다."""
    times, types = [], []
    t = t_minus
    d = intensity.d
    while True:
        past_t = np.asarray(times)
        past_u = np.asarray(types, dtype=np.int64)
        bound = intensity.baseline_bound(t - t_minus)
        if past_t.size:
            bound += intensity.excitation_bound(t - past_t, past_u)
        if bound <= 0:
            break
        t = t + rng.exponential(1.0 / bound)
        if t > t_plus:
            break
        lam = intensity.baseline(t - t_minus)
        if past_t.size:
            lam = lam + intensity.excitation(t - past_t, past_u)
        lam = np.clip(lam, 0.0, None)
        total = float(lam.sum())
        if rng.random() * bound <= total and total > 0:
            times.append(t)
            types.append(int(rng.choice(d, p=lam / total)))
            if len(times) > max_events:
                raise SimulationError(
                    f"실현 {h}: 이벤트 수가 상한 {max_events} 를 넘었습니다 (폭발 가능성).",
                    realization=h, count=len(times))
    return Realization(t_minus, t_plus, np.asarray(times, dtype=float), np.asarray(types, dtype=np.int64))


def _simulate_one(args) -> Realization:
    intensity, t_minus, t_plus, seed, h, max_events = args
    rng = np.random.default_rng([seed, h])
    return _thinning(intensity, t_minus, t_plus, rng, max_events, h)


def simulate(intensity_spec: Union[Intensity, SyntheticConfig], network: Network,
             window: Sequence[float], H: int, seed: int, threads: int = 1,
             max_events: int = DEFAULT_MAX_EVENTS) -> EventHistory:
    """H 개의 독립 실현을 생성합니다. 실현 h 의 난수는 (seed, h) 로부터 파생되어 병렬 여부와 무관합니다.

    Args:
        intensity_spec: GroupKernelIntensity, LowRankIntensity 또는 SyntheticConfig
        network (Network): 자극 허용 그래프
        window: (t_minus, t_plus)
        H (int): 실현 수
        seed (int): 난수 시드
        threads (int): 병렬 프로세스 수
        max_events (int): 실현당 이벤트 수 상한

    Returns:
        EventHistory: 생성된 이력
    """
    if isinstance(intensity_spec, SyntheticConfig):
        intensity_spec = GroupKernelIntensity(intensity_spec)
    t_minus, t_plus = float(window[0]), float(window[1])
    if not t_plus >= t_minus:
        raise HawkesInputError(f"관측 구간이 잘못되었습니다: [{t_minus}, {t_plus}]")
    if H < 0:
        raise HawkesInputError(f"실현 수는 0 이상이어야 합니다: {H}")
    intensity = intensity_spec.prepare(network)
    jobs = [(intensity, t_minus, t_plus, seed, h, max_events) for h in range(H)]
    t0 = time.time()
    if threads > 1 and H > 1:
        with multiprocessing.Pool(processes=threads) as pool:
            reals = pool.map(_simulate_one, jobs, chunksize=max(1, H // (4 * threads)))
    else:
        reals = [_simulate_one(job) for job in jobs]
    history = EventHistory(network.d, tuple(reals))
    logger.info(f"시뮬레이션 완료: H={H}, n={history.n}, 구간=[{t_minus}, {t_plus}] ({time.time() - t0:.2f}초)")
    return history
