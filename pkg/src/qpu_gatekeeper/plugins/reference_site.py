"""Site plugin for the bundled accounting backend.

Authorization delegates to the backend's job-authoriser endpoint and
returns its verdict unchanged; reporting posts to the job-reporter
endpoint. Both speak the shared service bearer token. The pre-submission
cost estimate uses the same per-shot duration the device bills with, so
estimate and final charge agree.
"""

from __future__ import annotations

import os

import httpx

from qpu_gatekeeper.plugins.base import BackendUnavailable, SitePlugin
from qpu_gatekeeper.plugins.records import (
    DenialReason,
    JobAuthorizationResult,
    JobSubmission,
)
from qpu_gatekeeper.timeutil import to_iso

DEFAULT_T_SHOT_MS = 0.12


class ReferenceSitePlugin(SitePlugin):
    name = "reference-site"

    def __init__(
        self,
        backend_url: str,
        service_token: str | None = None,
        t_shot_ms: float | None = None,
        store_base_url: str | None = None,
        client: httpx.AsyncClient | None = None,
    ):
        self.backend_url = backend_url.rstrip("/")
        self.service_token = (
            service_token
            if service_token is not None
            else os.environ.get("BACKEND_SERVICE_TOKEN", "")
        )
        self.t_shot_ms = (
            t_shot_ms
            if t_shot_ms is not None
            else float(os.environ.get("T_SHOT_MS", DEFAULT_T_SHOT_MS))
        )
        self.store_base_url = (
            store_base_url
            if store_base_url is not None
            else os.environ.get("STORE_BASE_URL", "http://store.local")
        ).rstrip("/")
        self._client = client or httpx.AsyncClient(base_url=self.backend_url, timeout=10.0)

    def _headers(self) -> dict[str, str]:
        return {"Authorization": f"Bearer {self.service_token}"}

    def estimated_cost_ms(self, submission: JobSubmission) -> int:
        return int(round(submission.shot_units * self.t_shot_ms))

    async def authorize_job(self, submission: JobSubmission) -> JobAuthorizationResult:
        body = {
            "user_id": submission.user_id,
            "project_hint": submission.project_hint,
            "estimated_cost_ms": self.estimated_cost_ms(submission),
            "now": to_iso(submission.received_at),
        }
        try:
            resp = await self._client.post("/jobAuthoriser", json=body, headers=self._headers())
            resp.raise_for_status()
        except (httpx.HTTPError, ConnectionError) as exc:
            raise BackendUnavailable(str(exc)) from exc
        verdict = resp.json()
        return JobAuthorizationResult(
            allowed=bool(verdict["allowed"]),
            reason=DenialReason(verdict["reason"]),
            resolved_project=verdict.get("resolved_project"),
            charge_budget=bool(verdict.get("charge_budget", True)),
            detail=verdict.get("detail", ""),
        )

    async def report_job(
        self,
        job_id: str,
        phase: str,
        status: str,
        user_id: str,
        project_id: str,
        num_circuits: int,
        shots: int,
        charge_budget: bool,
        qpu_time_ms: int | None = None,
        result_url: str | None = None,
        submitted_at: int | None = None,
    ) -> None:
        body = {
            "job_id": job_id,
            "phase": phase,
            "status": status,
            "user_id": user_id,
            "project_id": project_id,
            "num_circuits": num_circuits,
            "shots": shots,
            "charge_budget": charge_budget,
            "qpu_time_ms": qpu_time_ms,
            "result_url": result_url,
            "submitted_at": to_iso(submitted_at) if submitted_at is not None else None,
        }
        try:
            resp = await self._client.post("/jobReporter", json=body, headers=self._headers())
            resp.raise_for_status()
        except (httpx.HTTPError, ConnectionError) as exc:
            raise BackendUnavailable(str(exc)) from exc

    def result_url(self, job_id: str) -> str:
        return f"{self.store_base_url}/jobs/{job_id}/"
