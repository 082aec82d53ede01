"""
학습/시뮬레이션 작업 처리 모듈 - RQ 워커가 실행하는 작업을 정의합니다.
"""

import json
import logging
import os
import shutil
import tempfile
import time
import uuid
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional

from . import formats
from .inference.fit import fit
from .inference.simulate import generate_synthetic_config, simulate
from .inference.types import Hyperparams
from .redis_client import get_redis_connection

logger = logging.getLogger(__name__)

# 임시 파일 저장 디렉토리
TEMP_DIR = Path(tempfile.gettempdir()) / "lowrank_hawkes_tasks"
TEMP_DIR.mkdir(exist_ok=True)

# Redis 작업 메타데이터 키 접두사
JOB_META_PREFIX = "lowrank_hawkes:job_meta:"

# 학습 진행률 구간: 텐서 생성까지 10%, 외부 반복은 10-90%
FIT_PROGRESS_START = 10
FIT_PROGRESS_END = 90


def update_job_progress(job_id: str, progress: int, message: str, meta: Optional[Dict[str, Any]] = None) -> bool:
    """
    작업 진행 상태를 업데이트합니다.

    Args:
        job_id (str): 작업 ID
        progress (int): 진행률 (0-100, 실패 시 -1)
        message (str): 상태 메시지
        meta (dict, optional): 추가 메타데이터

    Returns:
        bool: 저장 성공 여부
    """
    from redis.exceptions import ConnectionError, TimeoutError
    from rq.job import Job

    try:
        redis_conn = get_redis_connection()
        redis_conn.ping()

        job = Job.fetch(job_id, connection=redis_conn)
        job_meta = job.meta or {}
        job_meta.update({
            'progress': progress,
            'message': message,
            'updated_at': time.time()
        })
        if meta:
            job_meta.update(meta)
        job.meta = job_meta
        job.save_meta()

        # 상태 조회용 요약 키 (24시간 보관)
        status_key = f"{JOB_META_PREFIX}{job_id}"
        redis_conn.set(status_key, json.dumps({
            'id': job_id,
            'progress': progress,
            'message': message,
            'status': job.get_status(),
            'updated_at': time.time()
        }))
        redis_conn.expire(status_key, 86400)

        logger.info(f"작업 진행 상태 업데이트: {job_id} - {progress}%, {message}")
        return True

    except (ConnectionError, TimeoutError) as e:
        logger.error(f"Redis 연결 오류로 인한 작업 진행 상태 업데이트 실패: {str(e)}")
        return False
    except Exception as e:
        logger.error(f"작업 진행 상태 업데이트 실패: {str(e)}")
        return False


def _current_job_id() -> Optional[str]:
    from rq import get_current_job
    job = get_current_job()
    return job.id if job else None


def fit_progress(iteration: int, max_iters: int) -> int:
    """외부 반복 번호를 10-90% 진행률로 변환합니다."""
    span = FIT_PROGRESS_END - FIT_PROGRESS_START
    return FIT_PROGRESS_START + int(span * min(iteration, max_iters) / max(max_iters, 1))


def process_fit_task(events_path: str, windows_path: str, network_path: Optional[str], output_path: str,
                     params: Optional[Dict[str, Any]] = None, complete: bool = False, self_loops: bool = True):
    """
    업로드된 이벤트로 모델을 학습하고 모델 문서를 저장합니다.

    Args:
        events_path (str): 이벤트 CSV 경로
        windows_path (str): 관측 구간 CSV 경로
        network_path (str, optional): 엣지 리스트 경로 (없으면 complete 네트워크)
        output_path (str): 모델 문서 저장 경로
        params (dict, optional): Hyperparams 필드 값
        complete (bool): 모든 u≠v 엣지 사용
        self_loops (bool): 자기 자극 허용

    Returns:
        str: 저장된 모델 문서 경로
    """
    job_id = _current_job_id()
    start_time = time.time()
    stage_times: Dict[str, float] = {}
    logger.info(f"학습 작업 시작: {events_path}, 파라미터={params}")

    def report_progress(progress: int, message: str, meta: Optional[Dict[str, Any]] = None):
        if job_id:
            elapsed_time = time.time() - start_time
            update_job_progress(job_id, progress, f"{message} (경과: {elapsed_time:.1f}초)", meta)

    try:
        if job_id:
            update_job_progress(job_id, 0, "학습 작업이 시작되었습니다.", {"start_time": start_time})
        hp = Hyperparams(**(params or {}))

        report_progress(5, "이벤트 파일 검증 중...")
        t_load = time.time()
        history = formats.load_events(events_path, windows_path)
        network = formats.load_network(network_path, history.d, self_loops=self_loops, complete=complete)
        stage_times["load_inputs"] = time.time() - t_load

        report_progress(FIT_PROGRESS_START, f"학습 중... (d={history.d}, n={history.n})")

        def on_iteration(iteration: int, loglik: float):
            report_progress(fit_progress(iteration, hp.max_outer_iters),
                            f"외부 반복 {iteration}/{hp.max_outer_iters}, LL={loglik:.4f}")

        t_fit = time.time()
        model, report = fit(history, network, hp, progress_callback=on_iteration)
        stage_times.update(report.wall_times)
        stage_times["fit_total"] = time.time() - t_fit

        report_progress(95, "모델 문서 저장 중...")
        t_save = time.time()
        formats.save_model(model, hp, output_path, report=report.to_dict())
        stage_times["save_model"] = time.time() - t_save

        total_time = time.time() - start_time
        if job_id:
            update_job_progress(job_id, 100, f"학습 작업이 완료되었습니다. (총 소요시간: {total_time:.1f}초)", {
                "output_path": output_path,
                "total_time": total_time,
                "elapsed_time": total_time,
                "stage_times": stage_times,
                "metrics": {
                    "loglik": report.loglik_trace[-1],
                    "converged": report.converged,
                    "outer_iters_used": report.outer_iters_used,
                    "warnings": list(report.warnings),
                },
            })
        return output_path

    except ValueError as e:
        error_msg = f"입력 데이터 오류: {str(e)}"
        logger.error(error_msg)
        if job_id:
            update_job_progress(job_id, -1, error_msg, {"elapsed_time": time.time() - start_time})
        raise
    except Exception as e:
        error_msg = f"학습 작업 중 예상치 못한 오류 발생: {str(e)}"
        logger.error(error_msg, exc_info=True)
        if job_id:
            update_job_progress(job_id, -1, error_msg, {"elapsed_time": time.time() - start_time})
        raise
    finally:
        for path in (events_path, windows_path, network_path):
            if path and os.path.exists(path) and Path(path).parent == TEMP_DIR:
                os.remove(path)


def zip_directory(source_dir: Path, output_path: str):
    with zipfile.ZipFile(output_path, "w", zipfile.ZIP_DEFLATED) as zipf:
        for path in sorted(source_dir.iterdir()):
            zipf.write(path, path.name)


def cleanup_temp_files(output_dir: Path):
    """임시 파일들을 정리합니다."""
    try:
        if output_dir.exists():
            shutil.rmtree(output_dir)
            logger.info(f"임시 출력 디렉토리 삭제: {output_dir}")
    except Exception as e:
        logger.error(f"임시 파일 정리 중 오류 발생: {str(e)}", exc_info=True)


def process_simulate_task(output_path: str, d: int = 50, erdos_p: float = 0.1, realizations: int = 1000,
                          window_length: float = 100.0, seed: int = 0, groups: int = 2, self_loops: bool = True):
    """
    합성 설정을 만들고 이력을 생성해 config/events/windows/network 를 ZIP 으로 묶습니다.

    Returns:
        str: 생성된 ZIP 파일 경로
    """
    job_id = _current_job_id()
    start_time = time.time()
    stage_times: Dict[str, float] = {}
    output_dir = TEMP_DIR / f"simulate_{uuid.uuid4()}"
    logger.info(f"시뮬레이션 작업 시작: d={d}, p={erdos_p}, H={realizations}, seed={seed}")

    try:
        if job_id:
            update_job_progress(job_id, 0, "시뮬레이션 작업이 시작되었습니다.", {"start_time": start_time})
        output_dir.mkdir(parents=True)

        t_config = time.time()
        cfg, network = generate_synthetic_config(d, erdos_p, seed, r_true=groups, self_loops=self_loops)
        stage_times["config"] = time.time() - t_config
        if job_id:
            update_job_progress(job_id, 10, "이벤트 생성 중...")

        t_sim = time.time()
        history = simulate(cfg, network, (0.0, window_length), realizations, seed)
        stage_times["simulate"] = time.time() - t_sim
        if job_id:
            update_job_progress(job_id, 80, f"이벤트 {history.n}개 생성 완료, 파일 저장 중...")

        t_save = time.time()
        formats.save_config(cfg, output_dir / "config.json")
        formats.save_network(network, output_dir / "network.csv")
        formats.save_events(history, output_dir / "events.csv", output_dir / "windows.csv")
        zip_directory(output_dir, output_path)
        stage_times["save"] = time.time() - t_save

        total_time = time.time() - start_time
        if job_id:
            update_job_progress(job_id, 100, f"시뮬레이션 작업이 완료되었습니다. (총 소요시간: {total_time:.1f}초)", {
                "output_path": output_path,
                "total_time": total_time,
                "elapsed_time": total_time,
                "stage_times": stage_times,
                "metrics": {"n": history.n, "H": history.H, "d": history.d},
            })
        return output_path

    except Exception as e:
        error_msg = f"시뮬레이션 작업 중 오류 발생: {str(e)}"
        logger.error(error_msg, exc_info=not isinstance(e, ValueError))
        if job_id:
            update_job_progress(job_id, -1, error_msg, {"elapsed_time": time.time() - start_time})
        raise
    finally:
        cleanup_temp_files(output_dir)
