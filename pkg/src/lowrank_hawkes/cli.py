#!/usr/bin/env python
"""
lowrank-hawkes 명령행 인터페이스

    lowrank-hawkes simulate      합성 설정과 이력 생성
    lowrank-hawkes fit           이벤트 + 네트워크 → 모델 + 학습 기록
    lowrank-hawkes predict       모델 + 테스트 이벤트 → 이벤트별 유형 점수
    lowrank-hawkes evaluate      L², AUC, 정확도, 그룹 복원 지표
    lowrank-hawkes kernels       커널 곡선 CSV
    lowrank-hawkes split         학습/테스트 분할
    lowrank-hawkes bench         스케일링 / 랭크 민감도 / 복원 반복 측정
    lowrank-hawkes dump-tensors  B, D 텐서 디버그 덤프
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from . import bench, formats
from .inference.errors import EventFileError, HawkesInputError
from .inference.evaluate import (accuracy_at, auc, evaluate_prediction, evaluate_recovery, event_types,
                                 kernel_curves, kernel_grid, score_events)
from .inference.fit import fit
from .inference.prepare import filter_rare_types, network_from_history, realization_split, time_split
from .inference.simulate import LowRankIntensity, generate_synthetic_config, simulate, true_kernel_matrix
from .inference.tensors import build_tensors
from .inference.types import Hyperparams

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def build_hparams(args: argparse.Namespace) -> Hyperparams:
    """명령행 인자로 하이퍼파라미터를 만듭니다."""
    return Hyperparams(
        K=args.kernels,
        r=args.rank,
        gamma=args.gamma,
        delta=args.delta,
        epsilon=args.epsilon,
        max_outer_iters=args.iters,
        max_newton_iters=args.newton_iters,
        rel_tol=args.tol,
        seed=args.seed,
        mm_sweeps=args.mm_sweeps,
        epsilon_refine=args.epsilon_refine,
        quasi_newton=args.quasi_newton,
    )


def _add_hparam_args(parser: argparse.ArgumentParser):
    defaults = Hyperparams()
    group = parser.add_argument_group("하이퍼파라미터")
    group.add_argument("--rank", type=int, default=defaults.r, help=f"임베딩 랭크 r (기본값: {defaults.r})")
    group.add_argument("--kernels", type=int, default=defaults.K, help=f"지수 기저 수 K (기본값: {defaults.K})")
    group.add_argument("--gamma", type=float, default=defaults.gamma, help="기저율 감쇠율")
    group.add_argument("--delta", type=float, default=defaults.delta, help="트리거링 커널 감쇠율")
    group.add_argument("--epsilon", type=float, default=defaults.epsilon, help="장벽 가중치")
    group.add_argument("--iters", type=int, default=defaults.max_outer_iters, help="최대 외부 반복 수")
    group.add_argument("--newton-iters", type=int, default=defaults.max_newton_iters, help="최대 뉴턴 반복 수")
    group.add_argument("--tol", type=float, default=defaults.rel_tol, help="상대 로그우도 수렴 기준")
    group.add_argument("--mm-sweeps", type=int, default=defaults.mm_sweeps, help="외부 반복당 MM 스윕 수")
    group.add_argument("--epsilon-refine", action="store_true", help="ε/10 으로 한 번 더 α 단계를 풉니다")
    group.add_argument("--quasi-newton", action="store_true", help="α 단계에 BFGS 사용")


def _add_common_args(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, default=0, help="난수 시드")
    parser.add_argument("--threads", type=int, default=1, help="계산 병렬 프로세스 수")
    parser.add_argument("--reproducible", action="store_true", help="실행 시간 등 비결정적 값을 출력에서 제외")


def _add_network_args(parser: argparse.ArgumentParser):
    parser.add_argument("--network", help="엣지 리스트 CSV (src,dst)")
    parser.add_argument("--complete", action="store_true", help="모든 u≠v 엣지를 사용")
    parser.add_argument("--from-history", action="store_true", help="학습 이력의 선후 관계로 엣지 생성")
    parser.add_argument("--self-loops", choices=["on", "off"], default="on", help="자기 자극 허용 (기본값: on)")


def _add_events_args(parser: argparse.ArgumentParser, prefix: str = ""):
    dash = f"{prefix}-" if prefix else ""
    parser.add_argument(f"--{dash}events", required=True, help="이벤트 CSV (realization,type,time)")
    parser.add_argument(f"--{dash}windows", required=True, help="관측 구간 CSV (realization,t_minus,t_plus)")


def _load_network(args, history, d: int):
    self_loops = args.self_loops == "on"
    if getattr(args, "from_history", False) and history is not None:
        return network_from_history(history, self_loops=self_loops)
    return formats.load_network(args.network, d, self_loops=self_loops, complete=args.complete)


def _report_dict(report, reproducible: bool) -> dict:
    data = report.to_dict()
    if reproducible:
        data.pop("wall_times", None)
    return data


def cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    window = (0.0, args.window_length)
    if args.model:
        model, hp = formats.load_model(args.model)
        network = formats.load_network(args.network, model.d, self_loops=args.self_loops == "on",
                                       complete=args.complete)
        history = simulate(LowRankIntensity(model, hp), network, window, args.realizations, args.seed,
                           threads=args.threads, max_events=args.max_events)
    else:
        cfg, network = generate_synthetic_config(args.d, args.erdos_p, args.seed, r_true=args.groups,
                                                 self_loops=args.self_loops == "on")
        formats.save_config(cfg, out / "config.json")
        history = simulate(cfg, network, window, args.realizations, args.seed,
                           threads=args.threads, max_events=args.max_events)
    formats.save_network(network, out / "network.csv")
    formats.save_events(history, out / "events.csv", out / "windows.csv")
    print(json.dumps({"out_dir": str(out), "d": history.d, "H": history.H, "n": history.n}))
    return 0


def cmd_fit(args) -> int:
    hp = build_hparams(args)
    history = formats.load_events(args.events, args.windows, d=args.d)
    network = _load_network(args, history, history.d)
    init = None
    if args.init:
        init_model, _ = formats.load_model(args.init)
        init = (init_model.P, init_model.alpha)
    model, report = fit(history, network, hp, init=init, threads=args.threads, reproducible=args.reproducible)
    report_data = _report_dict(report, args.reproducible)
    formats.save_model(model, hp, args.model_out, report=report_data)
    if args.report_out:
        formats.save_json({"report": report_data}, args.report_out, kind="fit-report")
    print(json.dumps({"model": str(args.model_out), "loglik": report.loglik_trace[-1],
                      "converged": report.converged, "outer_iters_used": report.outer_iters_used}))
    return 0


def cmd_predict(args) -> int:
    model, hp = formats.load_model(args.model)
    history = formats.load_events(args.events, args.windows, d=model.d)
    network = _load_network(args, None, model.d)
    scores = score_events(model, hp, history, network)
    reals = np.repeat(np.arange(history.H), [real.n for real in history.realizations])
    table = pd.DataFrame(scores, columns=[f"score_{u}" for u in range(model.d)])
    table.insert(0, "type", event_types(history))
    table.insert(0, "realization", reals)
    formats.save_table(table, args.out, kind="scores")
    print(json.dumps({"scores": str(args.out), "events": int(history.n)}))
    return 0


def cmd_evaluate(args) -> int:
    model, hp = formats.load_model(args.model)
    metrics = {}
    grid = kernel_grid(args.grid_max, args.grid_points)
    if args.config:
        cfg = formats.load_config(args.config)
        metrics["recovery"] = evaluate_recovery(model, hp, cfg, grid=grid, seed=args.seed)
    if args.test_events:
        test = formats.load_events(args.test_events, args.test_windows, d=model.d)
        network = _load_network(args, None, model.d)
        if args.train_events:
            train = formats.load_events(args.train_events, args.train_windows, d=model.d)
            metrics["prediction"] = evaluate_prediction(model, hp, train, test, network, fraction=args.fraction)
        else:
            truth = event_types(test)
            scores = score_events(model, hp, test, network)
            metrics["prediction"] = {"auc": auc(scores, truth),
                                     "accuracy": accuracy_at(scores, truth, args.fraction),
                                     "test_events": int(test.n), "fraction": args.fraction}
    if not metrics:
        raise HawkesInputError("--config 또는 --test-events 중 하나 이상이 필요합니다.")
    formats.save_json({"metrics": metrics}, args.out, kind="metrics")
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_kernels(args) -> int:
    grid = kernel_grid(args.grid_max, args.grid_points)
    cfg = formats.load_config(args.config) if args.config else None
    if args.model:
        model, hp = formats.load_model(args.model)
        table = kernel_curves(model, hp, cfg, grid=grid, seed=args.seed)
    elif cfg is not None:
        truth = true_kernel_matrix(cfg, grid)
        r = cfg.r_true
        src, dst = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
        table = pd.DataFrame({
            "t": np.repeat(grid, r * r),
            "source_group": np.tile(src.ravel(), grid.size),
            "target_group": np.tile(dst.ravel(), grid.size),
            "g_true": truth.reshape(-1),
            "g_inferred": np.nan,
        })
    else:
        raise HawkesInputError("--model 또는 --config 가 필요합니다.")
    formats.save_table(table, args.out, kind="kernel-curves")
    print(json.dumps({"curves": str(args.out), "rows": int(len(table))}))
    return 0


def cmd_split(args) -> int:
    history = formats.load_events(args.events, args.windows, d=args.d)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = {}
    if args.min_count:
        history, kept = filter_rare_types(history, args.min_count)
        pd.DataFrame({"new_type": np.arange(kept.size), "original_type": kept}).to_csv(out / "types.csv", index=False)
        result["kept_types"] = int(kept.size)
    if args.cutoff is not None:
        train, test = time_split(history, args.cutoff)
    else:
        train, test = realization_split(history, args.test_fraction, seed=args.seed)
    formats.save_events(train, out / "train_events.csv", out / "train_windows.csv")
    formats.save_events(test, out / "test_events.csv", out / "test_windows.csv")
    result.update({"train_events": train.n, "test_events": test.n, "d": history.d})
    print(json.dumps(result))
    return 0


def cmd_bench(args) -> int:
    hp = build_hparams(args)
    window = (0.0, args.window_length)
    if args.mode == "scaling":
        cfg, network = generate_synthetic_config(args.d, args.erdos_p, args.seed)
        table = bench.scaling_run(args.sizes, cfg, network, hp, window=window, repeats=args.repeats,
                                  seed=args.seed, threads=args.threads)
        summary = {"ratios": bench.time_ratios(table)} if len(table) > 1 else {}
    elif args.mode == "ranks":
        cfg, network = generate_synthetic_config(args.d, args.erdos_p, args.seed)
        history = simulate(cfg, network, window, args.realizations, args.seed, threads=args.threads)
        train, test = realization_split(history, 0.2, seed=args.seed)
        table = bench.rank_sweep(train, network, hp, args.ranks, test=test, cfg=cfg, threads=args.threads)
        summary = {}
    else:
        table, summary = bench.recovery_run(args.seeds, args.d, args.erdos_p, args.realizations, hp,
                                            window=window, threads=args.threads)
    if args.reproducible:
        table = table.drop(columns=[c for c in ("build_time", "iter_time", "total_time", "rss_mb") if c in table])
    formats.save_table(table, args.out, kind=f"bench-{args.mode}")
    print(json.dumps({"table": str(args.out), "rows": int(len(table)), **summary}))
    return 0


def cmd_dump_tensors(args) -> int:
    hp = build_hparams(args)
    history = formats.load_events(args.events, args.windows, d=args.d)
    network = _load_network(args, history, history.d)
    tensors = build_tensors(history, network, hp, threads=args.threads)
    d_table, b_table = formats.tensor_tables(tensors)
    formats.save_table(d_table, args.out, kind="tensor-d")
    if args.b_out:
        formats.save_table(b_table, args.b_out, kind="tensor-b")
    print(json.dumps({"d_rows": int(len(d_table)), "b_rows": int(len(b_table)),
                      "nnz_d": tensors.nnz_d, "nnz_b": tensors.nnz_b}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lowrank-hawkes", description="저랭크 다변량 Hawkes 과정 도구")
    parser.add_argument("--log-level", default="INFO", help="로그 레벨 (기본값: INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="합성 설정과 이력 생성")
    p.add_argument("--d", type=int, default=50, help="이벤트 유형 수")
    p.add_argument("--erdos-p", type=float, default=0.1, help="Erdős–Rényi 엣지 확률")
    p.add_argument("--groups", type=int, default=2, help="정답 그룹 수")
    p.add_argument("--realizations", type=int, default=1000, help="실현 수 H")
    p.add_argument("--window-length", type=float, default=100.0, help="관측 구간 길이")
    p.add_argument("--max-events", type=int, default=10 ** 6, help="실현당 이벤트 수 상한")
    p.add_argument("--model", help="합성 설정 대신 학습된 모델 문서로 시뮬레이션")
    p.add_argument("--out-dir", required=True, help="출력 디렉토리")
    _add_network_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="모델 학습")
    _add_events_args(p)
    p.add_argument("--d", type=int, help="이벤트 유형 수 (기본값: 파일 헤더)")
    p.add_argument("--init", help="초기값으로 사용할 모델 문서")
    p.add_argument("--model-out", required=True, help="모델 문서 출력 경로")
    p.add_argument("--report-out", help="학습 기록 JSON 출력 경로")
    _add_network_args(p)
    _add_hparam_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="이벤트별 유형 점수")
    p.add_argument("--model", required=True, help="모델 문서")
    _add_events_args(p)
    p.add_argument("--out", required=True, help="점수 CSV 출력 경로")
    _add_network_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="평가 지표 계산")
    p.add_argument("--model", required=True, help="모델 문서")
    p.add_argument("--config", help="합성 설정 JSON (복원 지표)")
    p.add_argument("--test-events", help="테스트 이벤트 CSV")
    p.add_argument("--test-windows", help="테스트 구간 CSV")
    p.add_argument("--train-events", help="학습 이벤트 CSV (NAIVE 기준선)")
    p.add_argument("--train-windows", help="학습 구간 CSV")
    p.add_argument("--fraction", type=float, default=0.30, help="정확도 후보 비율 (기본값: 0.30)")
    p.add_argument("--grid-max", type=float, default=10.0, help="커널 비교 구간 끝")
    p.add_argument("--grid-points", type=int, default=1000, help="커널 비교 격자 점 수")
    p.add_argument("--out", required=True, help="지표 JSON 출력 경로")
    _add_network_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("kernels", help="커널 곡선 CSV")
    p.add_argument("--model", help="모델 문서")
    p.add_argument("--config", help="합성 설정 JSON")
    p.add_argument("--grid-max", type=float, default=10.0, help="격자 끝")
    p.add_argument("--grid-points", type=int, default=1000, help="격자 점 수")
    p.add_argument("--out", required=True, help="곡선 CSV 출력 경로")
    _add_common_args(p)
    p.set_defaults(func=cmd_kernels)

    p = sub.add_parser("split", help="학습/테스트 분할")
    _add_events_args(p)
    p.add_argument("--d", type=int, help="이벤트 유형 수")
    p.add_argument("--test-fraction", type=float, default=0.2, help="테스트 실현 비율")
    p.add_argument("--cutoff", type=float, help="시간 기준 분할 시각")
    p.add_argument("--min-count", type=int, default=0, help="이 횟수 미만으로 등장한 유형 제거")
    p.add_argument("--out-dir", required=True, help="출력 디렉토리")
    _add_common_args(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("bench", help="성능/민감도 측정")
    p.add_argument("--mode", choices=["scaling", "ranks", "recovery"], default="scaling")
    p.add_argument("--sizes", type=int, nargs="*", default=[10_000, 20_000, 40_000], help="목표 이벤트 수 목록")
    p.add_argument("--ranks", type=int, nargs="*", default=[1, 2, 3, 4], help="랭크 목록")
    p.add_argument("--seeds", type=int, nargs="*", default=list(range(8)), help="복원 반복 시드 목록")
    p.add_argument("--repeats", type=int, default=3, help="측정 반복 수 (최소 3)")
    p.add_argument("--d", type=int, default=50, help="이벤트 유형 수")
    p.add_argument("--erdos-p", type=float, default=0.1, help="Erdős–Rényi 엣지 확률")
    p.add_argument("--realizations", type=int, default=20_000, help="실현 수 (ranks, recovery)")
    p.add_argument("--window-length", type=float, default=100.0, help="관측 구간 길이")
    p.add_argument("--out", required=True, help="결과 CSV 출력 경로")
    _add_hparam_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("dump-tensors", help="B, D 텐서 CSV 덤프")
    _add_events_args(p)
    p.add_argument("--d", type=int, help="이벤트 유형 수")
    p.add_argument("--out", required=True, help="D 텐서 CSV 출력 경로")
    p.add_argument("--b-out", help="B 텐서 CSV 출력 경로")
    _add_network_args(p)
    _add_hparam_args(p)
    _add_common_args(p)
    p.set_defaults(func=cmd_dump_tensors)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """메인 함수 - 명령행 인터페이스"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        payload = {"error": type(e).__name__, "message": str(e)}
        if isinstance(e, EventFileError):
            payload["issues"] = [issue.to_dict() for issue in e.issues]
        print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.error(f"처리 중 예상치 못한 오류 발생: {str(e)}", exc_info=True)
        print(json.dumps({"error": type(e).__name__, "message": str(e)}, ensure_ascii=False), file=sys.stderr)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
