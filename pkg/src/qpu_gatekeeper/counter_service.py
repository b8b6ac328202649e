"""Minimal external counter service.

The production shape of the fairness store: bare atomic
increment-and-get / decrement-and-get over HTTP, consumed by
HttpCounterStore. State is in-memory; run one instance.
"""

from __future__ import annotations

import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse


def build_app() -> FastAPI:
    app = FastAPI(title="counter-service", docs_url=None, redoc_url=None)
    values: dict[str, int] = {}
    lock = threading.Lock()

    async def _apply(request: Request, sign: int) -> JSONResponse:
        payload = await request.json()
        key = payload["key"]
        delta = int(payload["delta"]) * sign
        with lock:
            values[key] = values.get(key, 0) + delta
            return JSONResponse({"key": key, "value": values[key]})

    @app.post("/incr")
    async def incr(request: Request):
        return await _apply(request, 1)

    @app.post("/decr")
    async def decr(request: Request):
        return await _apply(request, -1)

    @app.get("/value")
    async def value(key: str):
        with lock:
            return JSONResponse({"key": key, "value": values.get(key, 0)})

    @app.get("/health")
    async def health():
        return JSONResponse({"status": "up"})

    return app
