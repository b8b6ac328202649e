"""Active-jobs table: one row per job not yet reported terminal.

Rows carry everything the completion pipeline needs (identity, billing
project, shot units, the submitted payload and the calibration snapshot
captured at submission) plus a progress marker making the reporter's
six-step pipeline resumable after a crash. Rows are deleted once
completion processing finishes, so the table is also the ground truth for
which quota acquisitions are outstanding.
"""

from __future__ import annotations

import enum
import sqlite3
import threading
from dataclasses import dataclass


class ProgressMarker(str, enum.Enum):
    NONE = "none"
    UPLOADED = "uploaded"
    REPORTED = "reported"
    RELEASED = "released"


_ORDER = {m: i for i, m in enumerate(ProgressMarker)}


def marker_at_least(marker: ProgressMarker, floor: ProgressMarker) -> bool:
    return _ORDER[marker] >= _ORDER[floor]


@dataclass
class ActiveJobRow:
    job_id: str
    user_id: str
    project_id: str
    num_circuits: int
    shots: int
    charge_budget: bool
    quota_acquired: bool
    submitted_at: int
    circuit_payload: bytes
    calibration_snapshot: bytes | None = None
    marker: ProgressMarker = ProgressMarker.NONE

    @property
    def shot_units(self) -> int:
        return self.num_circuits * self.shots


class ActiveJobStore:
    def __init__(self, path: str = ":memory:"):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        if path != ":memory:":
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute(
            """
            CREATE TABLE IF NOT EXISTS active_jobs (
                job_id TEXT PRIMARY KEY,
                user_id TEXT NOT NULL,
                project_id TEXT NOT NULL,
                num_circuits INTEGER NOT NULL,
                shots INTEGER NOT NULL,
                charge_budget INTEGER NOT NULL,
                quota_acquired INTEGER NOT NULL,
                submitted_at INTEGER NOT NULL,
                circuit_payload BLOB NOT NULL,
                calibration_snapshot BLOB,
                marker TEXT NOT NULL DEFAULT 'none'
            )
            """
        )
        self._conn.commit()
        self._lock = threading.Lock()

    def insert(self, row: ActiveJobRow) -> None:
        with self._lock:
            self._conn.execute(
                "INSERT INTO active_jobs VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    row.job_id,
                    row.user_id,
                    row.project_id,
                    row.num_circuits,
                    row.shots,
                    1 if row.charge_budget else 0,
                    1 if row.quota_acquired else 0,
                    row.submitted_at,
                    row.circuit_payload,
                    row.calibration_snapshot,
                    row.marker.value,
                ),
            )
            self._conn.commit()

    def get(self, job_id: str) -> ActiveJobRow | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM active_jobs WHERE job_id = ?", (job_id,)
            ).fetchone()
        return None if row is None else _to_row(row)

    def list_all(self) -> list[ActiveJobRow]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM active_jobs ORDER BY submitted_at, job_id"
            ).fetchall()
        return [_to_row(r) for r in rows]

    def set_calibration(self, job_id: str, snapshot: bytes) -> None:
        with self._lock:
            self._conn.execute(
                "UPDATE active_jobs SET calibration_snapshot = ? WHERE job_id = ?",
                (snapshot, job_id),
            )
            self._conn.commit()

    def set_marker(self, job_id: str, marker: ProgressMarker) -> None:
        with self._lock:
            self._conn.execute(
                "UPDATE active_jobs SET marker = ? WHERE job_id = ?", (marker.value, job_id)
            )
            self._conn.commit()

    def delete(self, job_id: str) -> None:
        with self._lock:
            self._conn.execute("DELETE FROM active_jobs WHERE job_id = ?", (job_id,))
            self._conn.commit()

    def count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) AS c FROM active_jobs").fetchone()["c"]

    def shot_units_for(self, user_id: str) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT COALESCE(SUM(num_circuits * shots), 0) AS s FROM active_jobs"
                " WHERE user_id = ? AND quota_acquired = 1",
                (user_id,),
            ).fetchone()
            return row["s"]


def _to_row(row: sqlite3.Row) -> ActiveJobRow:
    return ActiveJobRow(
        job_id=row["job_id"],
        user_id=row["user_id"],
        project_id=row["project_id"],
        num_circuits=row["num_circuits"],
        shots=row["shots"],
        charge_budget=bool(row["charge_budget"]),
        quota_acquired=bool(row["quota_acquired"]),
        submitted_at=row["submitted_at"],
        circuit_payload=row["circuit_payload"],
        calibration_snapshot=row["calibration_snapshot"],
        marker=ProgressMarker(row["marker"]),
    )
