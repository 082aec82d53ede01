#!/usr/bin/env python
"""
lowrank-hawkes 워커 스크립트 - Redis 큐에서 학습/시뮬레이션 작업을 처리합니다.
"""

import argparse
import logging
import multiprocessing
import os
import time
import uuid
from typing import Optional

import redis
from rq import Queue, Worker

from .redis_client import get_blocking_redis_connection

logger = logging.getLogger(__name__)

QUEUE_NAME = os.environ.get('QUEUE_NAME', 'hawkes_queue')
MAX_WORKERS = int(os.environ.get('MAX_WORKERS', 4))
MAX_RETRIES = 3
RETRY_DELAY = 5


def worker_name(index: Optional[int] = None) -> str:
    """컨테이너 ID, 프로세스/순번, 타임스탬프를 조합한 고유한 워커 이름"""
    container_id = os.environ.get('HOSTNAME', 'unknown')
    slot = index if index is not None else os.getpid()
    return f"hawkes_worker_{container_id}_{slot}_{int(time.time())}_{str(uuid.uuid4())[:8]}"


def start_worker(name: Optional[str] = None):
    """RQ 워커를 시작합니다. Redis 연결 실패는 MAX_RETRIES 회까지 재시도합니다."""
    retry_count = 0
    while True:
        try:
            redis_conn = get_blocking_redis_connection()
            redis_conn.ping()
            logger.info(f"Redis 연결 성공, 큐: {QUEUE_NAME}")

            name = name or worker_name()
            logger.info(f"워커 시작: {name}")
            # 수치 계산이 무거우므로 작업 시간 제한은 큐에 등록할 때 정합니다.
            w = Worker([Queue(QUEUE_NAME, connection=redis_conn)], connection=redis_conn, name=name)
            w.work(logging_level=logging.INFO, with_scheduler=False)
            return
        except (redis.ConnectionError, redis.TimeoutError) as e:
            retry_count += 1
            logger.error(f"Redis 연결 오류 (시도 {retry_count}/{MAX_RETRIES}): {str(e)}")
            if retry_count >= MAX_RETRIES:
                logger.error("Redis 연결 실패. 최대 재시도 횟수 초과.")
                raise
            time.sleep(RETRY_DELAY)
        except Exception as e:
            logger.error(f"워커 실행 중 오류 발생: {str(e)}")
            raise


def start_worker_pool(num_workers: Optional[int] = None):
    """여러 워커를 별도 프로세스로 시작합니다."""
    if num_workers is None:
        num_workers = min(multiprocessing.cpu_count(), MAX_WORKERS)
    logger.info(f"워커 풀 시작: {num_workers}개의 워커")

    processes = []
    for i in range(num_workers):
        name = worker_name(i + 1)
        p = multiprocessing.Process(target=start_worker, args=(name,), name=name)
        p.start()
        processes.append(p)
        logger.info(f"워커 프로세스 시작: {name} (PID: {p.pid})")
        # Redis 연결 부하 분산
        time.sleep(2)

    try:
        for p in processes:
            p.join()
    except KeyboardInterrupt:
        logger.info("워커 풀 종료 요청됨")
        for p in processes:
            p.terminate()
            p.join()
        logger.info("워커 풀 종료 완료")


def main():
    """워커 스크립트 메인 함수"""
    parser = argparse.ArgumentParser(description='lowrank-hawkes 워커')
    parser.add_argument('--workers', type=int, default=1, help='시작할 워커 수 (--pool 과 함께)')
    parser.add_argument('--pool', action='store_true', help='워커 풀 모드로 실행')
    parser.add_argument('--auto-scale', action='store_true', help='CPU 코어 수에 따라 자동 스케일링')
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO,
                        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    logger.info(f"lowrank-hawkes 워커 시작 - 큐: {QUEUE_NAME}")

    if args.auto_scale:
        start_worker_pool(None)
    elif args.pool:
        start_worker_pool(args.workers)
    else:
        start_worker()


if __name__ == "__main__":
    main()
