"""Vendor- and site-plugin contracts.

Vendor plugins encapsulate upstream-API specifics: which routes exist,
how to parse submission payloads and responses, how to poll jobs and
fetch calibration. Site plugins encapsulate hosting-site policy:
authorization against the backend, job reporting, result URLs.

Implementations must be safe to call from many concurrent request
handlers and hold no mutable per-request state.
"""

from __future__ import annotations

import abc

from qpu_gatekeeper.plugins.records import (
    CalibrationReport,
    JobAuthorizationResult,
    JobStatusResult,
    JobSubmission,
    SubmissionResult,
)
from qpu_gatekeeper.routing import RouteRule


class MalformedPayload(Exception):
    """Submission body is not a valid payload for this vendor."""


class MalformedResponse(Exception):
    """Upstream answered success but the response cannot be parsed."""


class UnknownJob(Exception):
    """Upstream does not know the requested job id."""


class UpstreamUnavailable(Exception):
    """Device unreachable; retryable."""


class BackendUnavailable(Exception):
    """Site backend unreachable. Authorization treats this as fail-closed."""


class VendorPlugin(abc.ABC):
    """Everything specific to one vendor's device API."""

    name: str

    @abc.abstractmethod
    def routes(self) -> list[RouteRule]:
        """Device API route definitions, including which roles they require."""

    @abc.abstractmethod
    def parse_submission(
        self, route_params: dict[str, str], headers: dict[str, str], body: bytes
    ) -> JobSubmission:
        """Extract circuit count, shots, and project metadata from a request body.

        The identity fields (user_id, user_roles, received_at) are filled by
        the gateway before calling; see GatewayApp.

        Raises:
            MalformedPayload: body is not a valid submission.
        """

    @abc.abstractmethod
    def parse_submission_response(self, status: int, body: bytes) -> SubmissionResult:
        """Extract the upstream job id from a submission response.

        Raises:
            MalformedResponse: success status but no job id in the body.
        """

    @abc.abstractmethod
    def upstream_headers(self, service_token: str) -> dict[str, str]:
        """Headers to attach to forwarded device requests (service credential)."""

    @abc.abstractmethod
    async def poll_job(self, job_id: str) -> JobStatusResult:
        """Current upstream state; artifacts populated only when ready.

        Raises:
            UnknownJob: upstream does not know the id.
            UpstreamUnavailable: device unreachable (retryable).
        """

    @abc.abstractmethod
    async def fetch_calibration(self) -> CalibrationReport:
        """Latest calibration snapshot.

        Raises:
            UpstreamUnavailable: device unreachable.
        """


class SitePlugin(abc.ABC):
    """Hosting-site policy: authorization, reporting, result URLs."""

    name: str

    @abc.abstractmethod
    async def authorize_job(self, submission: JobSubmission) -> JobAuthorizationResult:
        """Ask the site backend whether this submission may proceed.

        Fail-CLOSED: if the backend is unreachable this raises instead of
        approving -- a job must never bypass budget/reservation policy.

        Raises:
            BackendUnavailable
        """

    @abc.abstractmethod
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
    ) -> None:
        """Durably record a submission/completion event; idempotent per (job, phase).

        Raises:
            BackendUnavailable: retryable; callers re-deliver.
        """

    @abc.abstractmethod
    def result_url(self, job_id: str) -> str:
        """Deterministic user-facing URL of the job's artifacts."""
