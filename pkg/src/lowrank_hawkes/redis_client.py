import os
from functools import lru_cache

import redis

# Redis 환경 변수
REDIS_HOST = os.environ.get('REDIS_HOST', 'localhost')
REDIS_PORT = int(os.environ.get('REDIS_PORT', 6379))
REDIS_DB = int(os.environ.get('REDIS_DB', 0))
REDIS_PASSWORD = os.environ.get('REDIS_PASSWORD', None)
REDIS_MAX_CONNECTIONS = int(os.environ.get('REDIS_MAX_CONNECTIONS', 20))


def _pool(blocking: bool) -> redis.ConnectionPool:
    return redis.ConnectionPool(
        host=os.environ.get('REDIS_HOST', REDIS_HOST),
        port=int(os.environ.get('REDIS_PORT', REDIS_PORT)),
        db=int(os.environ.get('REDIS_DB', REDIS_DB)),
        password=os.environ.get('REDIS_PASSWORD', REDIS_PASSWORD),
        max_connections=REDIS_MAX_CONNECTIONS,
        socket_connect_timeout=10,
        # 블로킹 작업 (워커의 BLPOP) 에선 읽기 타임아웃 없음
        socket_timeout=None if blocking else 10,
        retry_on_timeout=True,
        health_check_interval=30,
        decode_responses=False,
    )


@lru_cache(maxsize=None)
def get_connection_pool(blocking: bool = False) -> redis.ConnectionPool:
    """프로세스 단위 공유 ConnectionPool (첫 호출 시점의 환경 변수로 생성)"""
    return _pool(blocking)


def get_redis_connection() -> redis.Redis:
    """공유 ConnectionPool을 사용하는 Redis 클라이언트 반환"""
    return redis.Redis(connection_pool=get_connection_pool())


def get_blocking_redis_connection() -> redis.Redis:
    """워커의 장시간 대기를 위한 Redis 클라이언트 반환"""
    return redis.Redis(connection_pool=get_connection_pool(blocking=True), socket_keepalive=True)
