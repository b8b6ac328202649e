"""Boundary records exchanged between the gateway core and its plugins.

These are deliberately plain frozen dataclasses: plugins never mutate
gateway state, they only parse requests/responses into these records and
hand them back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class JobStatus(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    READY = "ready"
    FAILED = "failed"

    @property
    def terminal(self) -> bool:
        return self in (JobStatus.READY, JobStatus.FAILED)


class DenialReason(str, enum.Enum):
    APPROVED = "approved"
    NO_PROJECT = "no_project"
    EXCLUSIVE_RESERVATION = "exclusive_reservation"
    BUDGET_EXHAUSTED = "budget_exhausted"
    FAIRNESS_LIMIT = "fairness_limit"


@dataclass(frozen=True)
class JobSubmission:
    """Parsed facts about one submission request.

    ``raw_payload`` is the client body byte-for-byte; the gateway forwards
    it upstream unmodified.
    """

    user_id: str
    user_roles: frozenset[str]
    num_circuits: int
    shots: int
    job_type: str
    raw_payload: bytes
    received_at: int  # UTC epoch ms
    project_hint: str | None = None

    def __post_init__(self) -> None:
        if self.num_circuits < 1:
            raise ValueError("num_circuits must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def shot_units(self) -> int:
        """Total outstanding-shot units this job counts for: circuits x shots."""
        return self.num_circuits * self.shots


@dataclass(frozen=True)
class SubmissionResult:
    """Outcome of forwarding a submission upstream."""

    job_id: str
    upstream_status: int
    raw_response: bytes

    @property
    def accepted(self) -> bool:
        return 200 <= self.upstream_status < 300 and bool(self.job_id)


@dataclass(frozen=True)
class JobStatusResult:
    """Upstream view of one job, as reported by the vendor plugin."""

    job_id: str
    status: JobStatus
    qpu_time_ms: int | None = None
    artifacts: dict[str, bytes] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status.terminal and self.qpu_time_ms is None:
            raise ValueError(f"terminal status {self.status.value} requires qpu_time_ms")


@dataclass(frozen=True)
class JobAuthorizationResult:
    """Policy verdict for one submission.

    ``charge_budget`` is False when the job runs under the project's own
    exclusive reservation (that time was billed when the reservation was
    placed).
    """

    allowed: bool
    reason: DenialReason
    resolved_project: str | None = None
    charge_budget: bool = True
    detail: str = ""

    def __post_init__(self) -> None:
        if self.allowed != (self.reason == DenialReason.APPROVED):
            raise ValueError("allowed must hold exactly when reason is approved")
        if self.allowed and not self.resolved_project:
            raise ValueError("approved verdicts must carry the resolved project")


@dataclass(frozen=True)
class CalibrationReport:
    """Device calibration snapshot with its capture timestamp."""

    timestamp: int  # UTC epoch ms
    metrics: dict[str, float]
    raw: bytes  # body as served by the device, archived verbatim


@dataclass(frozen=True)
class PluginConfig:
    """Startup plugin selection; names are case-sensitive exact matches."""

    vendor_plugin_name: str
    site_plugin_name: str
    vendor_base_url: str
    site_backend_url: str
