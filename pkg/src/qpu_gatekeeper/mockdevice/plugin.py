"""Vendor plugin for the mock device API.

Speaks the mock's submission schema::

    {"circuits": [...], "shots": <int>, "metadata": {"project": "..."}}

and its job/calibration views. Everything the gateway core needs from the
upstream API lives here; swapping in a real vendor means swapping this
class.
"""

from __future__ import annotations

import json

import httpx

from qpu_gatekeeper.plugins.base import (
    MalformedPayload,
    MalformedResponse,
    UnknownJob,
    UpstreamUnavailable,
    VendorPlugin,
)
from qpu_gatekeeper.plugins.records import (
    CalibrationReport,
    JobStatus,
    JobStatusResult,
    JobSubmission,
    SubmissionResult,
)
from qpu_gatekeeper.routing import RouteKind, RouteRule, RouteTarget
from qpu_gatekeeper.timeutil import from_iso


class MockVendorPlugin(VendorPlugin):
    name = "mock"

    def __init__(
        self,
        base_url: str,
        service_token: str | None = None,
        client: httpx.AsyncClient | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.AsyncClient(base_url=self.base_url, timeout=10.0)
        if service_token:
            # polls and calibration fetches authenticate like forwarded traffic
            self._client.headers["Authorization"] = f"Bearer {service_token}"

    def routes(self) -> list[RouteRule]:
        any_user: frozenset[str] = frozenset()
        return [
            RouteRule("POST", "/jobs/{type}/circuit", RouteKind.SUBMISSION, any_user),
            RouteRule("GET", "/jobs/{id}", RouteKind.PASSTHROUGH, any_user),
            RouteRule("GET", "/calibration/latest", RouteKind.PASSTHROUGH, any_user),
            RouteRule("GET", "/health", RouteKind.PASSTHROUGH, any_user),
            # device steering endpoints never cross the proxy
            RouteRule("POST", "/calibration", RouteKind.BLOCKED, any_user),
            RouteRule("POST", "/fault", RouteKind.BLOCKED, any_user),
            RouteRule("POST", "/tick", RouteKind.BLOCKED, any_user),
        ]

    def parse_submission(
        self, route_params: dict[str, str], headers: dict[str, str], body: bytes
    ) -> JobSubmission:
        try:
            payload = json.loads(body)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedPayload(f"body is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise MalformedPayload("body must be a JSON object")
        circuits = payload.get("circuits")
        shots = payload.get("shots")
        if not isinstance(circuits, list) or not circuits:
            raise MalformedPayload("payload must carry a non-empty circuits list")
        if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
            raise MalformedPayload("payload must carry a positive integer shots")
        metadata = payload.get("metadata") or {}
        project = metadata.get("project") if isinstance(metadata, dict) else None
        return JobSubmission(
            user_id="",
            user_roles=frozenset(),
            num_circuits=len(circuits),
            shots=shots,
            job_type=route_params.get("type", ""),
            raw_payload=body,
            received_at=0,
            project_hint=project,
        )

    def parse_submission_response(self, status: int, body: bytes) -> SubmissionResult:
        if not 200 <= status < 300:
            return SubmissionResult(job_id="", upstream_status=status, raw_response=body)
        try:
            payload = json.loads(body)
            job_id = payload["id"]
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise MalformedResponse(f"no job id in upstream response: {exc}") from exc
        if not isinstance(job_id, str) or not job_id:
            raise MalformedResponse("upstream job id is empty")
        return SubmissionResult(job_id=job_id, upstream_status=status, raw_response=body)

    def upstream_headers(self, service_token: str) -> dict[str, str]:
        return {"Authorization": f"Bearer {service_token}"}

    async def poll_job(self, job_id: str) -> JobStatusResult:
        try:
            resp = await self._client.get(f"/jobs/{job_id}")
        except (httpx.HTTPError, ConnectionError) as exc:
            raise UpstreamUnavailable(str(exc)) from exc
        if resp.status_code == 404:
            raise UnknownJob(job_id)
        if resp.status_code >= 500:
            raise UpstreamUnavailable(f"device answered {resp.status_code}")
        view = resp.json()
        status = JobStatus(view["status"])
        artifacts: dict[str, bytes] = {}
        if status is JobStatus.READY:
            # results artifact is the upstream body verbatim; timeline split out
            artifacts["results"] = resp.content
            artifacts["timeline"] = json.dumps(view.get("timeline", {})).encode()
        return JobStatusResult(
            job_id=job_id,
            status=status,
            qpu_time_ms=view.get("qpu_time_ms") if status.terminal else None,
            artifacts=artifacts,
        )

    async def fetch_calibration(self) -> CalibrationReport:
        try:
            resp = await self._client.get("/calibration/latest")
        except (httpx.HTTPError, ConnectionError) as exc:
            raise UpstreamUnavailable(str(exc)) from exc
        if resp.status_code >= 500:
            raise UpstreamUnavailable(f"device answered {resp.status_code}")
        view = resp.json()
        return CalibrationReport(
            timestamp=from_iso(view["timestamp"]),
            metrics=dict(view["metrics"]),
            raw=resp.content,
        )
