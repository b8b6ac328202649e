"""HTTP surface of the mock device.

Data-plane routes mirror the upstream API the gateway proxies:

    POST /jobs/{type}/circuit    submit a job
    GET  /jobs/{id}              poll status / results
    GET  /calibration/latest     current calibration snapshot
    GET  /health

Admin routes (never proxied by the gateway) steer the mock from tests:

    POST /calibration            replace calibration metrics
    POST /fault                  set fault mode
    POST /tick                   advance the queue N ticks
"""

from __future__ import annotations

import asyncio
import contextlib
import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from qpu_gatekeeper.mockdevice.engine import (
    FaultMode,
    JobState,
    MalformedSubmission,
    MockDeviceEngine,
    MockJob,
)
from qpu_gatekeeper.timeutil import to_iso

ADMIN_PATHS = ("/fault", "/tick", "/calibration")


def job_view(job: MockJob) -> dict:
    """The device's job representation; also the schema the vendor plugin parses."""
    view = {
        "id": job.job_id,
        "type": job.job_type,
        "status": job.state.value,
        "enqueue_position": job.enqueue_position,
        "created_at": to_iso(job.created_at),
        "shots": job.shots,
        "num_circuits": job.num_circuits,
    }
    if job.state in (JobState.READY, JobState.FAILED):
        view["qpu_time_ms"] = job.qpu_time_ms
        view["timeline"] = {
            "created_at": to_iso(job.created_at),
            "started_at": to_iso(job.started_at) if job.started_at else None,
            "completed_at": to_iso(job.completed_at) if job.completed_at else None,
        }
    if job.state is JobState.READY:
        view["measurements"] = job.results
    if job.state is JobState.FAILED:
        view["error"] = "job failed on device"
    return view


class _TraceAndFault:
    """Raw ASGI wrapper: records each request and applies the fault mode.

    Deliberately not a framework middleware; this runs on every proxied
    request and must cost microseconds.
    """

    def __init__(self, app, engine: MockDeviceEngine):
        self.app = app
        self.engine = engine

    async def __call__(self, scope, receive, send):
        if scope["type"] != "http":
            await self.app(scope, receive, send)
            return
        authorization = None
        for key, value in scope["headers"]:
            if key == b"authorization":
                authorization = value.decode("latin-1")
                break
        path = scope["path"]
        method = scope["method"]
        self.engine.trace.append(
            {"method": method, "path": path, "authorization": authorization}
        )
        if not (method == "POST" and path.startswith(ADMIN_PATHS)):
            mode = self.engine.config.fault_mode
            if mode is FaultMode.DROP_CONNECTION:
                raise ConnectionError("mock device dropped the connection")
            if mode is FaultMode.SLOW:
                await asyncio.sleep(self.engine.config.slow_delay_ms / 1000.0)
        await self.app(scope, receive, send)


def build_app(engine: MockDeviceEngine) -> _TraceAndFault:
    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = None
        interval = engine.config.auto_advance_interval_ms
        if interval is not None:

            async def loop() -> None:
                while True:
                    await asyncio.sleep(interval / 1000.0)
                    engine.advance()

            task = asyncio.create_task(loop())
        yield
        if task is not None:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="mock-device", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.engine = engine

    @app.post("/jobs/{job_type}/circuit")
    async def submit(job_type: str, request: Request):
        if engine.config.fault_mode is FaultMode.REJECT_ALL:
            return JSONResponse({"error": "device rejecting submissions"}, status_code=503)
        body = await request.body()
        try:
            payload = json.loads(body)
        except (ValueError, UnicodeDecodeError):
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(payload, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        try:
            job = engine.submit(job_type, payload)
        except MalformedSubmission as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        return JSONResponse({"id": job.job_id})

    @app.get("/jobs/{job_id}")
    async def status(job_id: str):
        try:
            job = engine.get(job_id)
        except KeyError:
            return JSONResponse({"error": f"unknown job {job_id}"}, status_code=404)
        return JSONResponse(job_view(job))

    @app.get("/calibration/latest")
    async def calibration_latest():
        ts, metrics = engine.calibration_latest()
        return JSONResponse({"timestamp": to_iso(ts), "metrics": metrics})

    @app.get("/health")
    async def health():
        return JSONResponse({"status": "up", "jobs": engine.job_count()})

    @app.post("/calibration")
    async def calibration_set(request: Request):
        payload = await request.json()
        ts = engine.calibration_set(payload.get("metrics") or {})
        return JSONResponse({"timestamp": to_iso(ts)})

    @app.post("/fault")
    async def set_fault(request: Request):
        payload = await request.json()
        try:
            mode = FaultMode(payload.get("mode", "none"))
        except ValueError:
            return JSONResponse(
                {"error": f"unknown fault mode {payload.get('mode')!r}"}, status_code=400
            )
        engine.set_fault(mode, payload.get("slow_delay_ms"))
        return Response(status_code=204)

    @app.post("/tick")
    async def tick(request: Request):
        body = await request.body()
        count = 1
        if body:
            count = int(json.loads(body).get("count", 1))
        engine.advance(count)
        return Response(status_code=204)

    return _TraceAndFault(app, engine)
