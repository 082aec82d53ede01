"""
투영 행렬 P 최적화 (교대 최적화의 P 단계)

α 를 고정하면 로그우도는 p (P 의 행 우선 펼침) 에 대해
    Σ_{h,m} ln(pᵀ Ξ^{hm} p) - pᵀ Ψ p
형태가 되며, 보조함수 기반 곱셈 갱신(MM)으로 단조 증가시킵니다.

Ξ^{hm} 는 이벤트마다 조밀 행렬로 만들지 않고 D 행 단위 블록 W_ρ[i, j] = Σ_k α_ji,k D_ρ,k 로
저장합니다. 행 ρ 는 (목표 유형 u_m, 출처 유형 v) 쌍이며 기저율 행은 v = d (증강 슬롯) 입니다.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import HawkesInputError
from .types import TensorPair

logger = logging.getLogger(__name__)

# (Ψp)_ui 가 이 값보다 작은 좌표는 해당 스윕에서 고정
PSI_FLOOR = 1e-12
# pᵀΞp 가 이 값보다 작은 이벤트는 분자 합에서 제외
EVENT_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class QuadForms:
    """Ξ^{hm} (행 블록) 와 Ψ (희소 행렬)

    rows_event, rows_target, rows_source: 블록 ρ 의 이벤트 인덱스, 목표 유형 u, 출처 유형 v
    rows_weight: (R, r+1, r+1) 블록 W_ρ. pᵀΞ^e p = Σ_{ρ∈e} P[u_ρ]ᵀ W_ρ P[v_ρ]
    psi: ((d+1)(r+1))² 대칭 희소 행렬

    증강 P 는 항상 P[d, :r] = 0, P[:d, r] = 0 이므로 이 좌표와 곱해지는 항
    (출처 v < d 와 기저율 열 r 의 쌍, 증강 슬롯 v = d 와 그룹 열 j < r 의 쌍) 은 저장하지 않습니다.
    따라서 Ξ, Ψ 는 (u < d, i < r) 와 (d, r) 좌표가 이루는 부분공간에서만 정의식과 같고,
    모든 메서드는 이 조건을 어기는 P 를 거부합니다.
    """
    d: int
    r: int
    n: int
    rows_event: np.ndarray
    rows_target: np.ndarray
    rows_source: np.ndarray
    rows_weight: np.ndarray
    psi: sparse.csr_matrix

    @property
    def shape(self):
        return (self.d + 1, self.r + 1)

    @property
    def size(self) -> int:
        return (self.d + 1) * (self.r + 1)

    def free_mask(self) -> np.ndarray:
        """갱신 대상 좌표 (u < d, i < r)"""
        mask = np.zeros(self.shape, dtype=bool)
        mask[:self.d, :self.r] = True
        return mask

    def event_values(self, P: np.ndarray) -> np.ndarray:
        """pᵀΞ^e p (= 이벤트 강도 λ_e), 길이 n"""
        P = self._as_matrix(P)
        per_row = np.einsum("ri,rij,rj->r", P[self.rows_target], self.rows_weight, P[self.rows_source])
        return np.bincount(self.rows_event, weights=per_row, minlength=self.n)

    def compensator(self, P: np.ndarray) -> float:
        p = self._as_matrix(P).ravel()
        return float(p @ (self.psi @ p))

    def numerator(self, P: np.ndarray, event_weights: np.ndarray) -> np.ndarray:
        """Σ_e w_e (Ξ^e p), P 와 같은 모양"""
        P = self._as_matrix(P)
        w = event_weights[self.rows_event][:, None]
        # (Ξ^e p)_{u c} 은 목표 쪽 W[c, :]·P[v] 와 출처 쪽 P[u]·W[:, c] 의 절반 합
        to_target = np.einsum("rcj,rj->rc", self.rows_weight, P[self.rows_source]) * w
        to_source = np.einsum("ri,ric->rc", P[self.rows_target], self.rows_weight) * w
        out = np.zeros(self.shape)
        np.add.at(out, self.rows_target, to_target)
        np.add.at(out, self.rows_source, to_source)
        return 0.5 * out

    def psi_product(self, P: np.ndarray) -> np.ndarray:
        p = self._as_matrix(P).ravel()
        return np.asarray(self.psi @ p).reshape(self.shape)

    def xi_dense(self, e: int) -> np.ndarray:
        """테스트용 조밀 Ξ^e"""
        if not 0 <= e < self.n:
            raise HawkesInputError(f"이벤트 인덱스 {e} 가 범위를 벗어났습니다 (n={self.n}).")
        R1 = self.r + 1
        out = np.zeros((self.size, self.size))
        for rho in np.flatnonzero(self.rows_event == e):
            u, v = self.rows_target[rho], self.rows_source[rho]
            out[u * R1:(u + 1) * R1, v * R1:(v + 1) * R1] += 0.5 * self.rows_weight[rho]
            out[v * R1:(v + 1) * R1, u * R1:(u + 1) * R1] += 0.5 * self.rows_weight[rho].T
        return out

    def psi_dense(self) -> np.ndarray:
        return self.psi.toarray()

    def _as_matrix(self, P: np.ndarray) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        if P.shape == (self.size,):
            P = P.reshape(self.shape)
        if P.shape != self.shape:
            raise HawkesInputError(f"P 의 모양 {P.shape} 이 {self.shape} 과 다릅니다.")
        if np.any(P[self.d, :self.r] != 0) or np.any(P[:self.d, self.r] != 0):
            raise HawkesInputError("증강 좌표 P[d, :r], P[:d, r] 는 0 이어야 합니다.")
        return P


def _pair_blocks(u: np.ndarray, v: np.ndarray, blocks: np.ndarray, r: int):
    """블록 (u, v, Y) 목록 → COO (행, 열, 값) 배열. 대칭화를 위해 전치 블록을 함께 넣습니다."""
    R1 = r + 1
    ii, jj = np.meshgrid(np.arange(R1), np.arange(R1), indexing="ij")
    rows = (u[:, None, None] * R1 + ii).ravel()
    cols = (v[:, None, None] * R1 + jj).ravel()
    vals = 0.5 * blocks.ravel()
    return np.concatenate([rows, cols]), np.concatenate([cols, rows]), np.concatenate([vals, vals])


def build_quadforms(alpha: np.ndarray, tensors: TensorPair) -> QuadForms:
    """α 와 텐서로부터 Ξ^{hm} 블록과 Ψ 를 만듭니다. O(nKΔr²).

    Args:
        alpha (np.ndarray): 증강 계수 텐서 ((r+1)×(r+1)×(K+1))
        tensors (TensorPair): B, D 텐서

    Returns:
        QuadForms: 이차형식 묶음
    """
    alpha = np.asarray(alpha, dtype=float)
    r, K, d = alpha.shape[0] - 1, tensors.K, tensors.d
    if alpha.shape != (r + 1, r + 1, K + 1):
        raise HawkesInputError(f"alpha 의 모양 {alpha.shape} 이 K={K} 와 맞지 않습니다.")
    exc = alpha[:r, :r, 1:]
    beta = alpha[r, :r, :]

    n_exc_rows = tensors.d_event.size
    weights = np.zeros((n_exc_rows + tensors.n, r + 1, r + 1))
    # W[i, j] = Σ_k α_{j i, k} D_k
    weights[:n_exc_rows, :r, :r] = np.einsum("rk,jik->rij", tensors.d_values, exc)
    weights[n_exc_rows:, :r, r] = tensors.d_baseline @ beta.T
    rows_event = np.concatenate([tensors.d_event, np.arange(tensors.n)])
    rows_target = tensors.event_type[rows_event]
    rows_source = np.concatenate([tensors.d_source, np.full(tensors.n, d, dtype=np.int64)])

    # Ψ: 엣지 쌍 (u, v) 는 A_vu·B'_v, 기저율 쌍 (u, d) 는 Σ_h f_{kγ}
    totals = tensors.source_totals()
    per_source = np.zeros((d, r + 1, r + 1))
    per_source[:, :r, :r] = np.einsum("vk,jik->vij", totals, exc)
    src, dst = np.nonzero(tensors.adjacency)
    keep = np.any(per_source[src] != 0, axis=(1, 2))
    src, dst = src[keep], dst[keep]
    base_block = np.zeros((r + 1, r + 1))
    base_block[:r, r] = beta @ tensors.b_baseline.sum(axis=0)
    pair_u = np.concatenate([dst, np.arange(d)])
    pair_v = np.concatenate([src, np.full(d, d, dtype=np.int64)])
    blocks = np.concatenate([per_source[src], np.broadcast_to(base_block, (d, r + 1, r + 1))])
    size = (d + 1) * (r + 1)
    rows, cols, vals = _pair_blocks(pair_u, pair_v, blocks, r)
    psi = sparse.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    psi.eliminate_zeros()

    return QuadForms(
        d=d,
        r=r,
        n=tensors.n,
        rows_event=rows_event.astype(np.int64),
        rows_target=rows_target.astype(np.int64),
        rows_source=rows_source.astype(np.int64),
        rows_weight=weights,
        psi=psi,
    )


def negated_loglik(P: np.ndarray, quad: QuadForms) -> float:
    """f(p) = -Σ ln(pᵀΞ^e p) + pᵀΨp. 강도가 0 이하인 이벤트가 있으면 +inf"""
    lam = quad.event_values(P)
    if lam.size and not np.all(lam > 0):
        return float("inf")
    return -float(np.log(lam).sum()) + quad.compensator(P)


def _event_weights(lam: np.ndarray) -> np.ndarray:
    weights = np.zeros_like(lam)
    ok = lam >= EVENT_FLOOR
    weights[ok] = 1.0 / lam[ok]
    if not np.all(ok):
        logger.warning(f"P 단계: 강도가 {EVENT_FLOOR:g} 미만인 이벤트 {int((~ok).sum())}개를 분자 합에서 제외합니다.")
    return weights


def mm_update(P: np.ndarray, quad: QuadForms) -> np.ndarray:
    """한 번의 곱셈 갱신 p'_ui = p_ui (Σ_e (Ξ^e p)_ui / (pᵀΞ^e p · (Ψp)_ui))^{1/2}

    Args:
        P (np.ndarray): 현재 증강 투영 행렬 (자유 좌표는 0 이상)
        quad (QuadForms): 현재 α 에서 만든 이차형식

    Returns:
        np.ndarray: 갱신된 증강 투영 행렬 (증강 좌표는 변경 없음)
    """
    P = quad._as_matrix(P)
    if np.any(P < 0):
        raise HawkesInputError("P 의 원소는 0 이상이어야 합니다.")
    numer = quad.numerator(P, _event_weights(quad.event_values(P)))
    denom = quad.psi_product(P)
    update = quad.free_mask() & (denom >= PSI_FLOOR)
    frozen = int(quad.free_mask().sum() - update.sum())
    if frozen:
        logger.debug(f"P 단계: (Ψp) 가 {PSI_FLOOR:g} 미만인 좌표 {frozen}개를 고정합니다.")
    out = P.copy()
    out[update] = P[update] * np.sqrt(numer[update] / denom[update])
    return out


def auxiliary_value(P: np.ndarray, Q: np.ndarray, quad: QuadForms) -> float:
    """보조함수 g(p, q) = -2 Σ_a N_a(q) q_a ln(p_a/q_a) - Σ_e ln(qᵀΞ^e q) + Σ_a (Ψq)_a p_a²/q_a

    N_a(q) = Σ_e (Ξ^e q)_a / (qᵀΞ^e q). q_a = 0 인 좌표(증강 좌표 포함)는 p_a = 0 이어야 하며 0 을 기여합니다.
    g(p, q) ≥ f(p), g(q, q) = f(q) 를 만족합니다.
    """
    P = quad._as_matrix(P)
    Q = quad._as_matrix(Q)
    if np.any(P < 0) or np.any(Q < 0):
        raise HawkesInputError("p, q 의 원소는 0 이상이어야 합니다.")
    active = Q > 0
    if np.any(P[~active] != 0) or np.any(P[active] <= 0):
        raise HawkesInputError("p 와 q 의 양수 좌표가 일치해야 합니다.")
    lam = quad.event_values(Q)
    if lam.size and not np.all(lam > 0):
        raise HawkesInputError("q 에서 강도가 0 이하인 이벤트가 있습니다.")
    numer = quad.numerator(Q, 1.0 / lam)
    psi_q = quad.psi_product(Q)
    log_ratio = np.log(P[active] / Q[active])
    value = -2.0 * float((numer[active] * Q[active] * log_ratio).sum())
    value -= float(np.log(lam).sum())
    value += float((psi_q[active] * P[active] ** 2 / Q[active]).sum())
    return value
