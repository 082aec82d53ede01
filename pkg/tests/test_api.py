"""
작업 API 테스트 - Redis 대신 가짜 큐를 사용합니다.
"""

import uuid

import pytest
import redis
from fastapi.testclient import TestClient

from lowrank_hawkes import api

EVENTS = b"realization,type,time\n0,0,1.0\n0,1,2.5\n"
WINDOWS = b"realization,t_minus,t_plus\n0,0,10\n"


class FakeQueue:

    def __init__(self):
        self.jobs = []

    def enqueue(self, func, **kwargs):
        self.jobs.append((func, kwargs))


class FakeJob:
    id = "job-1"
    meta = {"kind": "fit", "progress": 40, "message": "외부 반복 20/50", "stage_times": {"alpha": 1.5}}
    exc_info = None

    def get_status(self):
        return "started"


class DeadRedis:

    def ping(self):
        raise redis.ConnectionError("connection refused")


@pytest.fixture
def client():
    return TestClient(api.app)


@pytest.fixture
def queue(monkeypatch):
    fake = FakeQueue()
    monkeypatch.setattr(api, "get_queue", lambda: fake)
    return fake


def uploads(events_name="events.csv"):
    return {"events": (events_name, EVENTS, "text/csv"), "windows": ("windows.csv", WINDOWS, "text/csv")}


class TestSubmitFit:

    def test_queued(self, client, queue):
        response = client.post("/fit", files=uploads(), data={"rank": "3", "kernels": "2"})
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "queued"
        func, kwargs = queue.jobs[0]
        assert func is api.process_fit_task
        assert kwargs["job_id"] == body["task_id"]
        assert kwargs["meta"]["kind"] == "fit"
        job_kwargs = kwargs["kwargs"]
        assert job_kwargs["params"]["r"] == 3 and job_kwargs["params"]["K"] == 2
        assert job_kwargs["complete"] is True and job_kwargs["network_path"] is None
        for key in ("events_path", "windows_path"):
            with open(job_kwargs[key], "rb") as f:
                assert f.read() in (EVENTS, WINDOWS)
            api.TEMP_DIR.joinpath(job_kwargs[key]).unlink()

    def test_invalid_hyperparams(self, client, queue):
        response = client.post("/fit", files=uploads(), data={"rank": "0"})
        assert response.status_code == 400
        assert not queue.jobs

    def test_non_csv_upload(self, client, queue):
        response = client.post("/fit", files=uploads("events.json"))
        assert response.status_code == 400
        assert not queue.jobs

    def test_redis_down(self, client, monkeypatch):
        monkeypatch.setattr(api, "get_redis_connection", lambda: DeadRedis())
        response = client.post("/fit", files=uploads())
        assert response.status_code == 503


class TestSubmitSimulate:

    def test_queued(self, client, queue):
        response = client.post("/simulate", data={"d": "8", "erdos_p": "0.2", "realizations": "10"})
        assert response.status_code == 200
        func, kwargs = queue.jobs[0]
        assert func is api.process_simulate_task
        assert kwargs["kwargs"]["d"] == 8
        assert kwargs["kwargs"]["output_path"].endswith(".zip")

    @pytest.mark.parametrize("field,value", [("d", "0"), ("d", "1"), ("erdos_p", "1.5"), ("realizations", "-1")])
    def test_invalid(self, client, queue, field, value):
        assert client.post("/simulate", data={field: value}).status_code == 400
        assert not queue.jobs

    def test_single_type_rejected_before_queueing(self, client, queue):
        response = client.post("/simulate", data={"d": "1"})
        assert response.status_code == 400
        assert "2 이상" in response.json()["detail"]
        assert not queue.jobs


class TestStatusAndDownload:

    def test_status_response(self):
        response = api.job_status_response(FakeJob())
        assert response["status"] == "started"
        assert response["progress"] == 40
        assert response["stage_times"] == {"alpha": 1.5}
        assert "error" not in response

    def test_status_redis_down(self, client, monkeypatch):
        monkeypatch.setattr(api, "get_redis_connection", lambda: DeadRedis())
        assert client.get("/task/abc").status_code == 503

    def test_download_missing(self, client):
        assert client.get(f"/download/{uuid.uuid4()}").status_code == 404

    def test_download_model(self, client):
        task_id = str(uuid.uuid4())
        path = api.RESULTS_DIR / f"{task_id}.xml"
        path.write_text("<lowrank-hawkes-model/>", encoding="utf-8")
        try:
            response = client.get(f"/download/{task_id}")
            assert response.status_code == 200
            assert response.headers["content-type"].startswith("application/xml")
        finally:
            path.unlink()
