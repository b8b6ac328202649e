"""Background job reporter.

Each cycle polls every active job; for jobs that reached a terminal
state it fetches the artifacts, uploads them together with the
calibration snapshot captured at submission, reports completion to the
backend (which charges the budget), releases the fairness quota, and
deletes the active-job row.

The six steps are resumable: a per-row progress marker records how far a
job got, the backend deduplicates completion reports, and the artifact
store ignores identical re-uploads, so a crash anywhere in the pipeline
makes the next cycle finish the job with exactly-once effects.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass
from typing import Callable

from qpu_gatekeeper.artifacts import ArtifactKey, ArtifactKind, ArtifactStore, StoreUnavailable
from qpu_gatekeeper.gateway.active_jobs import (
    ActiveJobRow,
    ActiveJobStore,
    ProgressMarker,
    marker_at_least,
)
from qpu_gatekeeper.ledger import CounterStoreUnavailable, ShotLedger
from qpu_gatekeeper.plugins.base import (
    BackendUnavailable,
    SitePlugin,
    UnknownJob,
    UpstreamUnavailable,
    VendorPlugin,
)
from qpu_gatekeeper.plugins.records import JobStatus, JobStatusResult
from qpu_gatekeeper.timeutil import Clock, now_ms

log = logging.getLogger("qpu_gatekeeper.reporter")

DEFAULT_INTERVAL_MS = 1000

# retryable per-job failures: the row stays put and the next cycle retries
_RETRYABLE = (BackendUnavailable, StoreUnavailable, CounterStoreUnavailable, UpstreamUnavailable)

STEPS = (
    "fetch_artifacts",
    "upload_artifacts",
    "build_result_url",
    "report_completed",
    "release_quota",
    "delete_row",
)


@dataclass
class CycleSummary:
    polled: int = 0
    completed: int = 0
    failed_polls: int = 0


class JobReporter:
    def __init__(
        self,
        vendor: VendorPlugin,
        site: SitePlugin,
        ledger: ShotLedger,
        store: ArtifactStore,
        active_jobs: ActiveJobStore,
        clock: Clock = now_ms,
        crash_hook: Callable[[str, str], None] | None = None,
    ):
        self.vendor = vendor
        self.site = site
        self.ledger = ledger
        self.store = store
        self.active_jobs = active_jobs
        self.clock = clock
        self.crash_hook = crash_hook  # test hook: (step, job_id) -> may raise
        self._cycle_lock = asyncio.Lock()
        self.cycles_run = 0
        self.jobs_completed = 0
        self.last_summary: CycleSummary | None = None
        self.last_cycle_at: int | None = None

    def _step(self, step: str, job_id: str) -> None:
        if self.crash_hook is not None:
            self.crash_hook(step, job_id)

    async def run_cycle(self) -> CycleSummary:
        """Poll all active jobs and close out the terminal ones."""
        summary = CycleSummary()
        async with self._cycle_lock:
            for row in self.active_jobs.list_all():
                try:
                    status = await self.vendor.poll_job(row.job_id)
                except UpstreamUnavailable as exc:
                    log.warning("poll of %s failed: %s", row.job_id, exc)
                    summary.failed_polls += 1
                    continue
                except UnknownJob:
                    log.error("device no longer knows job %s; keeping row for operator", row.job_id)
                    summary.failed_polls += 1
                    continue
                summary.polled += 1
                if not status.status.terminal:
                    continue
                try:
                    await self._complete(row, status)
                except _RETRYABLE as exc:
                    log.warning(
                        "completion of %s interrupted (%s: %s); will resume next cycle",
                        row.job_id,
                        type(exc).__name__,
                        exc,
                    )
                    continue
                summary.completed += 1
            self.cycles_run += 1
            self.jobs_completed += summary.completed
            self.last_summary = summary
            self.last_cycle_at = self.clock()
        return summary

    async def _complete(self, row: ActiveJobRow, status: JobStatusResult) -> None:
        job_id = row.job_id

        self._step("fetch_artifacts", job_id)
        artifacts = dict(status.artifacts)

        self._step("upload_artifacts", job_id)
        if not marker_at_least(row.marker, ProgressMarker.UPLOADED):
            if status.status is JobStatus.READY:
                await self._upload(row, artifacts)
            self.active_jobs.set_marker(job_id, ProgressMarker.UPLOADED)
            row.marker = ProgressMarker.UPLOADED

        self._step("build_result_url", job_id)
        result_url = self.site.result_url(job_id) if status.status is JobStatus.READY else None

        self._step("report_completed", job_id)
        if not marker_at_least(row.marker, ProgressMarker.REPORTED):
            await self.site.report_job(
                job_id=job_id,
                phase="completed",
                status=status.status.value,
                user_id=row.user_id,
                project_id=row.project_id,
                num_circuits=row.num_circuits,
                shots=row.shots,
                charge_budget=row.charge_budget,
                qpu_time_ms=status.qpu_time_ms,
                result_url=result_url,
                submitted_at=row.submitted_at,
            )
            self.active_jobs.set_marker(job_id, ProgressMarker.REPORTED)
            row.marker = ProgressMarker.REPORTED

        self._step("release_quota", job_id)
        if not marker_at_least(row.marker, ProgressMarker.RELEASED):
            if row.quota_acquired:
                self.ledger.release(row.user_id, row.shot_units)
            self.active_jobs.set_marker(job_id, ProgressMarker.RELEASED)
            row.marker = ProgressMarker.RELEASED

        self._step("delete_row", job_id)
        self.active_jobs.delete(job_id)

    async def _upload(self, row: ActiveJobRow, artifacts: dict[str, bytes]) -> None:
        """Write results/timeline plus the circuit and calibration snapshot.

        The circuit and calibration normally reached the store via the
        gateway's post-submission task; re-putting identical bytes is a
        no-op, and if that task was dead-lettered this is the recovery
        path.
        """
        for name, data in artifacts.items():
            try:
                kind = ArtifactKind(name)
            except ValueError:
                log.warning("vendor produced unknown artifact kind %r; skipping", name)
                continue
            self.store.put(ArtifactKey(row.job_id, kind), data)
        self.store.put(ArtifactKey(row.job_id, ArtifactKind.CIRCUIT), row.circuit_payload)
        calibration = row.calibration_snapshot
        if calibration is None:
            log.warning(
                "no calibration snapshot recorded for %s; archiving the current one",
                row.job_id,
            )
            report = await self.vendor.fetch_calibration()
            calibration = report.raw
        self.store.put(ArtifactKey(row.job_id, ArtifactKind.CALIBRATION), calibration)

    async def run_forever(self, interval_ms: int = DEFAULT_INTERVAL_MS) -> None:
        while True:
            try:
                await self.run_cycle()
            except Exception:
                log.exception("reporter cycle crashed; continuing")
            await asyncio.sleep(interval_ms / 1000.0)


def build_health_app(reporter: JobReporter):
    """Health/metrics side-channel for a standalone reporter deployment."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse

    app = FastAPI(title="job-reporter", docs_url=None, redoc_url=None)

    @app.get("/health")
    async def health():
        return JSONResponse({"status": "up", "active_jobs": reporter.active_jobs.count()})

    @app.get("/metrics")
    async def metrics():
        last = reporter.last_summary
        return JSONResponse(
            {
                "cycles_run": reporter.cycles_run,
                "jobs_completed_total": reporter.jobs_completed,
                "active_jobs": reporter.active_jobs.count(),
                "last_cycle_at": reporter.last_cycle_at,
                "last_polled": last.polled if last else None,
                "last_completed": last.completed if last else None,
                "last_failed_polls": last.failed_polls if last else None,
            }
        )

    return app
