"""In-process ASGI client for single-node wiring.

When every service runs in one process, the gateway's hops to its
siblings do not need a real HTTP client; this invokes the ASGI app
directly with a fraction of the overhead. It exposes the small client
surface the gateway and plugins use (request/get/post, response
status_code/headers/content/json/raise_for_status) so it is
interchangeable with an httpx.AsyncClient bound to a real URL, and its
errors derive from httpx.HTTPError so callers' failure handling is
identical in both wirings.
"""

from __future__ import annotations

import json as jsonlib
from urllib.parse import urlsplit

import httpx


class InProcessHTTPError(httpx.HTTPError):
    pass


class InProcessResponse:
    def __init__(self, status_code: int, raw_headers: list[tuple[bytes, bytes]], content: bytes):
        self.status_code = status_code
        self.content = content
        self.headers = {k.decode("latin-1"): v.decode("latin-1") for k, v in raw_headers}

    @property
    def text(self) -> str:
        return self.content.decode("utf-8", errors="replace")

    @property
    def ok(self) -> bool:
        return self.status_code < 400

    def json(self):
        return jsonlib.loads(self.content)

    def raise_for_status(self) -> "InProcessResponse":
        if self.status_code >= 400:
            raise InProcessHTTPError(f"status {self.status_code}: {self.text[:200]}")
        return self


class InProcessClient:
    def __init__(self, app, base_url: str = "http://in-process.local"):
        self.app = app
        self.base_url = base_url.rstrip("/")
        split = urlsplit(self.base_url)
        self._host = split.netloc or "in-process.local"
        self.headers: dict[str, str] = {}

    async def request(
        self,
        method: str,
        path: str,
        *,
        content: bytes | None = None,
        headers: dict[str, str] | None = None,
        params: str | bytes | None = None,
        json=None,
        timeout=None,
    ) -> InProcessResponse:
        if json is not None:
            content = jsonlib.dumps(json, separators=(",", ":")).encode()
        body = content or b""
        merged = dict(self.headers)
        if headers:
            merged.update(headers)
        if json is not None:
            merged.setdefault("content-type", "application/json")
        raw_headers = [(b"host", self._host.encode("latin-1"))]
        raw_headers += [
            (k.lower().encode("latin-1"), v.encode("latin-1")) for k, v in merged.items()
        ]
        raw_headers.append((b"content-length", str(len(body)).encode()))
        if isinstance(params, bytes):
            query = params
        elif isinstance(params, str):
            query = params.encode()
        else:
            query = b""
        scope = {
            "type": "http",
            "asgi": {"version": "3.0", "spec_version": "2.3"},
            "http_version": "1.1",
            "method": method.upper(),
            "scheme": "http",
            "path": path,
            "raw_path": path.encode(),
            "query_string": query,
            "root_path": "",
            "headers": raw_headers,
            "client": ("127.0.0.1", 0),
            "server": (self._host, 80),
        }
        sent_body = False

        async def receive():
            nonlocal sent_body
            if sent_body:
                return {"type": "http.disconnect"}
            sent_body = True
            return {"type": "http.request", "body": body, "more_body": False}

        status = 500
        response_headers: list[tuple[bytes, bytes]] = []
        chunks: list[bytes] = []

        async def send(message):
            nonlocal status, response_headers
            if message["type"] == "http.response.start":
                status = message["status"]
                response_headers = list(message.get("headers", []))
            elif message["type"] == "http.response.body":
                chunks.append(message.get("body", b""))

        await self.app(scope, receive, send)
        return InProcessResponse(status, response_headers, b"".join(chunks))

    async def get(self, path: str, **kwargs) -> InProcessResponse:
        return await self.request("GET", path, **kwargs)

    async def post(self, path: str, **kwargs) -> InProcessResponse:
        return await self.request("POST", path, **kwargs)

    async def aclose(self) -> None:
        pass
