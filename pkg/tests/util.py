"""Shared test helpers."""

from __future__ import annotations

import contextlib
import socket
import threading
import time

import httpx
import uvicorn


class FaultableTransport(httpx.AsyncBaseTransport):
    """Wraps a transport; when ``down`` it refuses connections."""

    def __init__(self, inner: httpx.AsyncBaseTransport):
        self.inner = inner
        self.down = False

    async def handle_async_request(self, request):
        if self.down:
            raise httpx.ConnectError("service down (injected)", request=request)
        return await self.inner.handle_async_request(request)


@contextlib.contextmanager
def run_server(app, host: str = "127.0.0.1"):
    """Serve an ASGI app on an ephemeral port in a thread; yields the base URL."""
    with socket.socket() as probe:
        probe.bind((host, 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(app, host=host, port=port, log_level="warning", lifespan="on")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start in time")
        time.sleep(0.01)
    try:
        yield f"http://{host}:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=10)


def submission_payload(num_circuits: int = 1, shots: int = 1000, project: str | None = None) -> dict:
    payload = {
        "circuits": [{"name": f"c{i}", "ops": ["h 0", "measure"]} for i in range(num_circuits)],
        "shots": shots,
    }
    if project is not None:
        payload["metadata"] = {"project": project}
    return payload
