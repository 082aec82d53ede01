"""
성능/민감도 측정 모듈

- scaling_run: 이벤트 수 n 에 따른 텐서 생성 + 외부 반복 1회 시간 (중앙값)
- rank_sweep: 랭크 r 별 예측/복원 지표
- recovery_run: 여러 합성 데이터셋에서의 커널 복원 오차 요약
"""

import dataclasses
import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from .inference.evaluate import evaluate_prediction, evaluate_recovery, summarize
from .inference.fit import fit
from .inference.simulate import SyntheticConfig, generate_synthetic_config, simulate
from .inference.tensors import build_tensors
from .inference.types import EventHistory, Hyperparams, Network

logger = logging.getLogger(__name__)

SCALING_COLUMNS = ["n", "d", "H", "build_time", "iter_time", "total_time", "rss_mb"]
MIN_REPEATS = 3
PILOT_REALIZATIONS = 200


def _rss_mb() -> float:
    return psutil.Process().memory_info().rss / (1024 * 1024)


def _time_once(history: EventHistory, network: Network, hp: Hyperparams, threads: int) -> Tuple[float, float]:
    t0 = time.perf_counter()
    tensors = build_tensors(history, network, hp, threads=threads)
    build = time.perf_counter() - t0
    one_iter = dataclasses.replace(hp, max_outer_iters=1)
    t0 = time.perf_counter()
    fit(history, network, one_iter, tensors=tensors)
    return build, time.perf_counter() - t0


def realizations_for(target_n: int, cfg: SyntheticConfig, network: Network, window: Sequence[float],
                     seed: int) -> int:
    """시범 시뮬레이션의 실현당 평균 이벤트 수로 목표 n 에 필요한 실현 수를 추정합니다."""
    pilot = simulate(cfg, network, window, PILOT_REALIZATIONS, seed=seed + 1_000_003)
    per_real = max(pilot.n / PILOT_REALIZATIONS, 1e-9)
    return max(1, math.ceil(target_n / per_real))


def scaling_run(sizes: Sequence[int], cfg: SyntheticConfig, network: Network, hp: Hyperparams,
                window: Sequence[float] = (0.0, 100.0), repeats: int = MIN_REPEATS, seed: int = 0,
                threads: int = 1) -> pd.DataFrame:
    """n 목표값마다 이력을 생성해 텐서 생성 시간과 외부 반복 1회 시간을 잽니다.

    각 크기에서 예열 1회는 제외하고, repeats 회 (최소 3회) 측정의 중앙값을 기록합니다.

    Returns:
        pd.DataFrame: n, d, H, build_time, iter_time, total_time, rss_mb
    """
    repeats = max(repeats, MIN_REPEATS)
    rows: List[Dict[str, float]] = []
    if not sizes:
        return pd.DataFrame(columns=SCALING_COLUMNS)
    per_h = realizations_for(int(sizes[0]), cfg, network, window, seed) / float(sizes[0])
    for target in sizes:
        H = max(1, math.ceil(per_h * target))
        history = simulate(cfg, network, window, H, seed=seed, threads=threads)
        _time_once(history, network, hp, threads)
        builds, iters = [], []
        for _ in range(repeats):
            build, one_iter = _time_once(history, network, hp, threads)
            builds.append(build)
            iters.append(one_iter)
        row = {
            "n": history.n,
            "d": history.d,
            "H": H,
            "build_time": float(np.median(builds)),
            "iter_time": float(np.median(iters)),
            "total_time": float(np.median(np.add(builds, iters))),
            "rss_mb": _rss_mb(),
        }
        logger.info(f"스케일링: n={row['n']}, 생성 {row['build_time']:.3f}초, 반복 {row['iter_time']:.3f}초")
        rows.append(row)
    return pd.DataFrame(rows, columns=SCALING_COLUMNS)


def time_ratios(table: pd.DataFrame, column: str = "total_time") -> List[float]:
    values = table[column].to_numpy(dtype=float)
    return [float(b / a) for a, b in zip(values, values[1:])]


def rank_sweep(history: EventHistory, network: Network, hp: Hyperparams, ranks: Sequence[int],
               test: Optional[EventHistory] = None, cfg: Optional[SyntheticConfig] = None,
               threads: int = 1) -> pd.DataFrame:
    """랭크별로 같은 시드로 학습하고 지표를 표로 만듭니다. 텐서는 한 번만 생성해 공유합니다."""
    columns = ["r", "loglik", "converged", "accuracy", "auc", "naive_accuracy", "naive_auc", "l2_error"]
    if not ranks:
        return pd.DataFrame(columns=columns)
    tensors = build_tensors(history, network, hp, threads=threads)
    rows = []
    for r in ranks:
        hp_r = dataclasses.replace(hp, r=int(r))
        model, report = fit(history, network, hp_r, tensors=tensors)
        row = {"r": int(r), "loglik": report.loglik_trace[-1], "converged": report.converged,
               "accuracy": np.nan, "auc": np.nan, "naive_accuracy": np.nan, "naive_auc": np.nan,
               "l2_error": np.nan}
        if test is not None and test.n:
            metrics = evaluate_prediction(model, hp_r, history, test, network)
            row.update({key: metrics[key] for key in ("accuracy", "auc", "naive_accuracy", "naive_auc")})
        if cfg is not None:
            row["l2_error"] = evaluate_recovery(model, hp_r, cfg, seed=hp.seed)["l2_error"]
        logger.info(f"랭크 {r}: {row}")
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def recovery_run(seeds: Sequence[int], d: int, erdos_p: float, H: int, hp: Hyperparams,
                 window: Sequence[float] = (0.0, 100.0), threads: int = 1) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """시드마다 합성 데이터를 만들어 학습하고 복원 오차를 모읍니다.

    Returns:
        Tuple[pd.DataFrame, dict]: 시드별 표와 l2_error 의 mean/min/max
    """
    rows = []
    for seed in seeds:
        cfg, network = generate_synthetic_config(d, erdos_p, seed)
        history = simulate(cfg, network, window, H, seed=seed, threads=threads)
        model, report = fit(history, network, dataclasses.replace(hp, seed=seed), threads=threads)
        metrics = evaluate_recovery(model, hp, cfg, seed=seed)
        rows.append({
            "seed": seed,
            "n": history.n,
            "l2_error": metrics["l2_error"],
            "baseline_error": metrics["baseline_error"],
            "adjusted_rand": metrics["adjusted_rand"],
            "groups_recovered": metrics["groups_recovered"],
            "converged": report.converged,
        })
    table = pd.DataFrame(rows, columns=["seed", "n", "l2_error", "baseline_error", "adjusted_rand",
                                        "groups_recovered", "converged"])
    summary = summarize(table["l2_error"]) if rows else {}
    return table, summary
