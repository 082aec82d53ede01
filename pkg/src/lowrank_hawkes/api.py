import logging
import os
import shutil
import tempfile
import time
import uuid
from pathlib import Path
from typing import Any, Dict, Optional

import psutil
import redis
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.params import Path as FastAPIPath
from fastapi.responses import FileResponse
from rq import Queue
from rq.job import Job, NoSuchJobError
from rq.worker import Worker

from .inference.errors import HawkesInputError
from .inference.types import Hyperparams
from .redis_client import get_redis_connection
from .tasks import process_fit_task, process_simulate_task

logger = logging.getLogger(__name__)

app = FastAPI(
    title="lowrank-hawkes API",
    description="저랭크 다변량 Hawkes 모델 학습/시뮬레이션 작업 API",
    version="0.1.0"
)

QUEUE_NAME = os.environ.get('QUEUE_NAME', 'hawkes_queue')
# 큰 이력의 학습은 수십 분이 걸릴 수 있음
JOB_TIMEOUT = int(os.environ.get('HAWKES_JOB_TIMEOUT', 6 * 3600))

# 업로드 임시 디렉토리 (워커와 공유 볼륨이어야 함)
TEMP_DIR = Path(tempfile.gettempdir()) / "lowrank_hawkes_tasks"
TEMP_DIR.mkdir(exist_ok=True)

# 결과 저장 디렉토리
RESULTS_DIR = Path(os.environ.get('HAWKES_RESULTS_DIR', Path(tempfile.gettempdir()) / "lowrank_hawkes_results"))
RESULTS_DIR.mkdir(parents=True, exist_ok=True)

RESULT_SUFFIXES = {"fit": ".xml", "simulate": ".zip"}


def _ping_or_503(conn: redis.Redis):
    try:
        conn.ping()
    except redis.ConnectionError as e:
        logger.error(f"Redis 연결 실패: {str(e)}")
        raise HTTPException(status_code=503, detail=f"Redis 서버에 연결할 수 없습니다: {str(e)}")


def get_queue() -> Queue:
    """RQ 큐를 생성하고 반환합니다."""
    conn = get_redis_connection()
    _ping_or_503(conn)
    return Queue(QUEUE_NAME, connection=conn)


def _save_upload(upload: Optional[UploadFile], path: Path) -> Optional[str]:
    if upload is None:
        return None
    if not upload.filename.lower().endswith(('.csv', '.txt')):
        raise HTTPException(status_code=400, detail=f"CSV 파일만 업로드 가능합니다: {upload.filename}")
    with open(path, "wb") as buffer:
        shutil.copyfileobj(upload.file, buffer)
    return str(path)


def _enqueue(func, task_id: str, kind: str, kwargs: Dict[str, Any]) -> Dict[str, Any]:
    queue = get_queue()
    queue.enqueue(func, kwargs=kwargs, job_id=task_id, job_timeout=JOB_TIMEOUT,
                  result_ttl=86400, meta={"kind": kind, "progress": 0, "message": "대기 중"})
    logger.info(f"{kind} 작업이 큐에 추가됨: {task_id}")
    return {"task_id": task_id, "status": "queued",
            "message": "작업이 큐에 추가되었습니다. 상태 조회 API를 사용하여 작업 상태를 확인하세요."}


@app.post("/fit")
async def submit_fit(
    events: UploadFile = File(...),
    windows: UploadFile = File(...),
    network: Optional[UploadFile] = File(None),
    complete: bool = Form(False),
    self_loops: bool = Form(True),
    rank: int = Form(Hyperparams.r),
    kernels: int = Form(Hyperparams.K),
    gamma: float = Form(Hyperparams.gamma),
    delta: float = Form(Hyperparams.delta),
    epsilon: float = Form(Hyperparams.epsilon),
    iters: int = Form(Hyperparams.max_outer_iters),
    tol: float = Form(Hyperparams.rel_tol),
    seed: int = Form(Hyperparams.seed),
):
    """
    이벤트/구간 CSV (및 선택적 엣지 리스트) 를 업로드해 학습 작업을 등록합니다.

    - **events**: realization,type,time CSV
    - **windows**: realization,t_minus,t_plus CSV
    - **network**: src,dst 엣지 리스트 (없으면 complete)
    """
    params = {"r": rank, "K": kernels, "gamma": gamma, "delta": delta, "epsilon": epsilon,
              "max_outer_iters": iters, "rel_tol": tol, "seed": seed}
    try:
        Hyperparams(**params)
    except HawkesInputError as e:
        raise HTTPException(status_code=400, detail=str(e))

    task_id = str(uuid.uuid4())
    paths = []
    try:
        events_path = _save_upload(events, TEMP_DIR / f"{task_id}_events.csv")
        windows_path = _save_upload(windows, TEMP_DIR / f"{task_id}_windows.csv")
        network_path = _save_upload(network, TEMP_DIR / f"{task_id}_network.csv")
        paths = [p for p in (events_path, windows_path, network_path) if p]
        return _enqueue(process_fit_task, task_id, "fit", {
            "events_path": events_path,
            "windows_path": windows_path,
            "network_path": network_path,
            "output_path": str(RESULTS_DIR / f"{task_id}{RESULT_SUFFIXES['fit']}"),
            "params": params,
            "complete": complete or network_path is None,
            "self_loops": self_loops,
        })
    except HTTPException:
        for p in paths:
            Path(p).unlink(missing_ok=True)
        raise
    except redis.ConnectionError as e:
        for p in paths:
            Path(p).unlink(missing_ok=True)
        raise HTTPException(status_code=503, detail=f"Redis 서버에 연결할 수 없어 학습 작업을 등록할 수 없습니다: {str(e)}")
    except Exception as e:
        logger.error(f"학습 작업 등록 중 오류 발생: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"학습 작업 등록 중 오류가 발생했습니다: {str(e)}")


@app.post("/simulate")
async def submit_simulate(
    d: int = Form(50),
    erdos_p: float = Form(0.1),
    realizations: int = Form(1000),
    window_length: float = Form(100.0),
    groups: int = Form(2),
    seed: int = Form(0),
    self_loops: bool = Form(True),
):
    """합성 설정으로 이력 생성 작업을 등록합니다. 결과는 config/events/windows/network ZIP 입니다."""
    # 합성 설정 생성과 같은 조건 (d ≥ 2) 을 큐 등록 전에 확인
    if d < 2:
        raise HTTPException(status_code=400, detail=f"d 는 2 이상이어야 합니다: {d}")
    if realizations < 0 or not 0.0 <= erdos_p <= 1.0 or window_length < 0 or groups < 1:
        raise HTTPException(status_code=400, detail="시뮬레이션 파라미터가 잘못되었습니다.")
    task_id = str(uuid.uuid4())
    try:
        return _enqueue(process_simulate_task, task_id, "simulate", {
            "output_path": str(RESULTS_DIR / f"{task_id}{RESULT_SUFFIXES['simulate']}"),
            "d": d, "erdos_p": erdos_p, "realizations": realizations, "window_length": window_length,
            "seed": seed, "groups": groups, "self_loops": self_loops,
        })
    except HTTPException:
        raise
    except redis.ConnectionError as e:
        raise HTTPException(status_code=503, detail=f"Redis 서버에 연결할 수 없어 작업을 등록할 수 없습니다: {str(e)}")
    except Exception as e:
        logger.error(f"시뮬레이션 작업 등록 중 오류 발생: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"시뮬레이션 작업 등록 중 오류가 발생했습니다: {str(e)}")


def job_status_response(job: Job) -> Dict[str, Any]:
    """작업 상태와 메타데이터 (진행률, 단계별 시간, 지표) 를 응답 형태로 정리합니다."""
    status = job.get_status()
    response: Dict[str, Any] = {"task_id": job.id, "status": status}
    job_meta = job.meta or {}
    response.update({
        "kind": job_meta.get("kind"),
        "progress": job_meta.get("progress", 0),
        "message": job_meta.get("message", ""),
        "updated_at": job_meta.get("updated_at"),
    })
    for key in ("stage_times", "metrics", "total_time", "elapsed_time"):
        if job_meta.get(key) is not None:
            response[key] = job_meta[key]
    start_time = job_meta.get("start_time")
    if start_time:
        response["start_time"] = start_time
        response["current_elapsed_time"] = time.time() - start_time
    if job.exc_info:
        response["error"] = job.exc_info
        response["error_type"] = "job_execution_error"
    return response


@app.get("/task/{task_id}")
async def get_task_status(task_id: str = FastAPIPath(..., description="작업 ID")):
    """주어진 작업 ID 의 상태를 반환합니다."""
    try:
        redis_conn = get_redis_connection()
        _ping_or_503(redis_conn)
        job = Job.fetch(task_id, connection=redis_conn)
        return job_status_response(job)
    except NoSuchJobError:
        raise HTTPException(status_code=404, detail=f"작업 ID {task_id}를 찾을 수 없습니다.")
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"작업 상태 조회 중 오류 발생: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"작업 상태 조회 중 오류가 발생했습니다: {str(e)}")


@app.get("/download/{task_id}")
async def download_result(task_id: str = FastAPIPath(..., description="다운로드할 작업 ID")):
    """학습된 모델 문서 (XML) 또는 시뮬레이션 결과 (ZIP) 를 다운로드합니다."""
    for kind, suffix in RESULT_SUFFIXES.items():
        path = RESULTS_DIR / f"{task_id}{suffix}"
        if path.exists():
            media_type = "application/xml" if suffix == ".xml" else "application/zip"
            logger.info(f"결과 다운로드: {path}")
            return FileResponse(path=str(path), filename=f"{kind}_{task_id}{suffix}", media_type=media_type)
    raise HTTPException(status_code=404, detail="결과 파일을 찾을 수 없습니다.")


@app.get("/queue/status")
async def get_queue_status():
    """현재 큐와 워커, 호스트 자원 상태를 반환합니다."""
    try:
        redis_conn = get_redis_connection()
        _ping_or_503(redis_conn)
        queue = Queue(QUEUE_NAME, connection=redis_conn)
        workers = Worker.all(connection=redis_conn)
        return {
            "queue_name": QUEUE_NAME,
            "pending_jobs": len(queue),
            "workers": [{
                "name": worker.name,
                "state": worker.state,
                "current_job": worker.get_current_job_id(),
            } for worker in workers],
            "system": {
                "cpu_percent": psutil.cpu_percent(interval=1),
                "memory_percent": psutil.virtual_memory().percent,
                "disk_usage": psutil.disk_usage(str(RESULTS_DIR)).percent,
            },
        }
    except HTTPException:
        raise
    except Exception as e:
        logger.error(f"큐 상태 조회 중 오류 발생: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"큐 상태 조회 중 오류가 발생했습니다: {str(e)}")
