"""Deterministic mock device core.

A single FIFO queue of jobs driven by explicit ticks: each tick completes
the currently running jobs and starts up to ``queue_service_rate`` pending
ones, so a job observably passes pending -> running -> ready. Results are
uniform random bitstrings drawn from a seeded RNG; with a fixed seed the
entire trace (ids, results, timings) is reproducible byte-for-byte.

QPU time of a finished job is num_circuits x shots x t_shot_ms, rounded
to the nearest millisecond. The default t_shot_ms of 0.12 makes the
default fairness cap of 2.5 million outstanding shots correspond to about
five minutes of QPU time.
"""

from __future__ import annotations

import enum
import itertools
import random
import threading
from dataclasses import dataclass, field

from qpu_gatekeeper.timeutil import Clock, now_ms


class FaultMode(str, enum.Enum):
    NONE = "none"
    REJECT_ALL = "reject_all"
    DROP_CONNECTION = "drop_connection"
    SLOW = "slow"


class JobState(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    READY = "ready"
    FAILED = "failed"


@dataclass
class DeviceConfig:
    t_shot_ms: float = 0.12
    queue_service_rate: int = 1  # jobs started per tick
    fault_mode: FaultMode = FaultMode.NONE
    rng_seed: int = 0
    n_qubits: int = 5
    slow_delay_ms: int = 250
    # None = tick-driven (tests); a value = wall-clock auto-advance (demos)
    auto_advance_interval_ms: int | None = None

    def __post_init__(self) -> None:
        if self.t_shot_ms <= 0:
            raise ValueError("t_shot_ms must be > 0")


@dataclass
class MockJob:
    job_id: str
    job_type: str
    circuits: list
    shots: int
    metadata: dict
    state: JobState
    enqueue_position: int
    created_at: int
    started_at: int | None = None
    completed_at: int | None = None
    qpu_time_ms: int | None = None
    # per-circuit list of per-shot bitstrings, filled when ready
    results: list[list[str]] | None = None

    @property
    def num_circuits(self) -> int:
        return len(self.circuits)


class MalformedSubmission(ValueError):
    """Payload missing circuits/shots or with out-of-range values."""


class MockDeviceEngine:
    """Queue, calibration, and fault state of the mock device."""

    def __init__(self, config: DeviceConfig | None = None, clock: Clock = now_ms):
        self.config = config or DeviceConfig()
        self.clock = clock
        self._lock = threading.Lock()
        self._jobs: dict[str, MockJob] = {}
        self._queue: list[str] = []  # pending job ids, FIFO
        self._running: list[str] = []
        self._ids = itertools.count(1)
        self._rng = random.Random(self.config.rng_seed)
        self._bit_table = [
            format(v, f"0{self.config.n_qubits}b") for v in range(2**self.config.n_qubits)
        ]
        self._calibration_metrics = _default_calibration(self.config.n_qubits)
        self._calibration_ts = clock()
        # request trace, populated by the HTTP layer; used by tests to check
        # what actually reached the device (and with which credential)
        self.trace: list[dict] = []

    # -- job lifecycle -----------------------------------------------------

    def submit(self, job_type: str, payload: dict) -> MockJob:
        """Enqueue a job; raises MalformedSubmission on a bad payload."""
        circuits = payload.get("circuits")
        shots = payload.get("shots")
        if not isinstance(circuits, list) or len(circuits) < 1:
            raise MalformedSubmission("payload must carry a non-empty circuits list")
        if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
            raise MalformedSubmission("payload must carry a positive integer shots")
        metadata = payload.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise MalformedSubmission("metadata must be an object")
        with self._lock:
            job_id = f"J-{next(self._ids)}"
            job = MockJob(
                job_id=job_id,
                job_type=job_type,
                circuits=list(circuits),
                shots=shots,
                metadata=dict(metadata),
                state=JobState.PENDING,
                enqueue_position=len(self._queue),
                created_at=self.clock(),
            )
            self._jobs[job_id] = job
            self._queue.append(job_id)
            return job

    def get(self, job_id: str) -> MockJob:
        job = self._jobs.get(job_id)
        if job is None:
            raise KeyError(job_id)
        return job

    def advance(self, ticks: int = 1) -> None:
        """Tick the queue: finish running jobs, then start pending ones (FIFO)."""
        for _ in range(ticks):
            with self._lock:
                now = self.clock()
                for job_id in self._running:
                    self._complete(self._jobs[job_id], now)
                self._running.clear()
                for _ in range(min(self.config.queue_service_rate, len(self._queue))):
                    job = self._jobs[self._queue.pop(0)]
                    job.state = JobState.RUNNING
                    job.started_at = now
                    self._running.append(job.job_id)
                for pos, job_id in enumerate(self._queue):
                    self._jobs[job_id].enqueue_position = pos

    def _complete(self, job: MockJob, now: int) -> None:
        job.state = JobState.READY
        job.completed_at = now
        job.qpu_time_ms = self.qpu_time_ms(job.num_circuits, job.shots)
        bits = self._rng.getrandbits
        table = self._bit_table
        n = self.config.n_qubits
        job.results = [
            [table[bits(n)] for _ in range(job.shots)] for _ in range(job.num_circuits)
        ]

    def qpu_time_ms(self, num_circuits: int, shots: int) -> int:
        return int(round(num_circuits * shots * self.config.t_shot_ms))

    def fail_job(self, job_id: str) -> None:
        """Force a job into the failed terminal state (test/fault hook)."""
        with self._lock:
            job = self.get(job_id)
            if job.job_id in self._queue:
                self._queue.remove(job.job_id)
            if job.job_id in self._running:
                self._running.remove(job.job_id)
            job.state = JobState.FAILED
            job.completed_at = self.clock()
            job.qpu_time_ms = 0

    # -- calibration -------------------------------------------------------

    def calibration_latest(self) -> tuple[int, dict[str, float]]:
        with self._lock:
            return self._calibration_ts, dict(self._calibration_metrics)

    def calibration_set(self, metrics: dict[str, float]) -> int:
        """Replace the calibration snapshot; timestamps strictly increase."""
        with self._lock:
            self._calibration_metrics = dict(metrics)
            self._calibration_ts = max(self.clock(), self._calibration_ts + 1)
            return self._calibration_ts

    # -- fault injection ---------------------------------------------------

    def set_fault(self, mode: FaultMode, slow_delay_ms: int | None = None) -> None:
        self.config.fault_mode = mode
        if slow_delay_ms is not None:
            self.config.slow_delay_ms = slow_delay_ms

    def job_count(self) -> int:
        return len(self._jobs)


def _default_calibration(n_qubits: int) -> dict[str, float]:
    metrics: dict[str, float] = {}
    for q in range(1, n_qubits + 1):
        metrics[f"qb{q}.fidelity_1q"] = 0.999
        metrics[f"qb{q}.t1_us"] = 38.0
        metrics[f"qb{q}.t2_us"] = 24.0
    metrics["cz.fidelity_2q"] = 0.982
    return metrics
