"""SQLite persistence for the accounting service.

One connection, one process-wide lock: every operation the service runs
is a serializable transaction by construction, which is what the budget
invariants require. Desk-scale traffic never makes this the bottleneck.
"""

from __future__ import annotations

import sqlite3
import threading
from contextlib import contextmanager

SCHEMA = """
CREATE TABLE IF NOT EXISTS orgs (
    org_id TEXT PRIMARY KEY,
    name TEXT NOT NULL UNIQUE,
    yearly_budget_ms INTEGER NOT NULL CHECK (yearly_budget_ms >= 0),
    consumed_ms INTEGER NOT NULL DEFAULT 0 CHECK (consumed_ms >= 0),
    disabled INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS projects (
    project_id TEXT PRIMARY KEY,
    org_id TEXT NOT NULL REFERENCES orgs(org_id),
    name TEXT NOT NULL,
    budget_ms INTEGER NOT NULL CHECK (budget_ms >= 0),
    consumed_ms INTEGER NOT NULL DEFAULT 0 CHECK (consumed_ms >= 0),
    disabled INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    username TEXT NOT NULL UNIQUE,
    role TEXT NOT NULL CHECK (role IN ('admin', 'org_manager', 'pi', 'regular')),
    default_project_id TEXT,
    disabled INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS user_orgs (
    user_id TEXT NOT NULL REFERENCES users(user_id),
    org_id TEXT NOT NULL REFERENCES orgs(org_id),
    PRIMARY KEY (user_id, org_id)
);
CREATE TABLE IF NOT EXISTS project_members (
    project_id TEXT NOT NULL REFERENCES projects(project_id),
    user_id TEXT NOT NULL REFERENCES users(user_id),
    is_admin INTEGER NOT NULL DEFAULT 0,
    PRIMARY KEY (project_id, user_id)
);
CREATE TABLE IF NOT EXISTS slots (
    slot_id TEXT PRIMARY KEY,
    org_id TEXT NOT NULL REFERENCES orgs(org_id),
    start_ms INTEGER NOT NULL,
    end_ms INTEGER NOT NULL,
    CHECK (start_ms < end_ms)
);
CREATE TABLE IF NOT EXISTS reservations (
    reservation_id TEXT PRIMARY KEY,
    project_id TEXT NOT NULL REFERENCES projects(project_id),
    start_ms INTEGER NOT NULL,
    end_ms INTEGER NOT NULL,
    charged_ms INTEGER NOT NULL,
    CHECK (start_ms < end_ms)
);
CREATE TABLE IF NOT EXISTS jobs (
    job_id TEXT PRIMARY KEY,
    user_id TEXT NOT NULL,
    project_id TEXT NOT NULL,
    submitted_at INTEGER NOT NULL,
    num_circuits INTEGER NOT NULL,
    shots INTEGER NOT NULL,
    status TEXT NOT NULL CHECK (status IN ('pending', 'ready', 'failed')),
    qpu_time_ms INTEGER,
    charge_budget INTEGER NOT NULL,
    charged INTEGER NOT NULL DEFAULT 0,
    charged_ms INTEGER NOT NULL DEFAULT 0,
    result_url TEXT,
    completed_at INTEGER
);
CREATE TABLE IF NOT EXISTS audit_log (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    at_ms INTEGER NOT NULL,
    event TEXT NOT NULL,
    project_id TEXT NOT NULL,
    delta_ms INTEGER NOT NULL,
    consumed_after_ms INTEGER NOT NULL,
    budget_ms INTEGER NOT NULL,
    detail TEXT
);
CREATE INDEX IF NOT EXISTS jobs_project ON jobs(project_id, submitted_at);
CREATE INDEX IF NOT EXISTS jobs_user ON jobs(user_id, submitted_at);
CREATE INDEX IF NOT EXISTS reservations_window ON reservations(start_ms, end_ms);
"""


class Database:
    def __init__(self, path: str = ":memory:"):
        self.path = path
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        if path != ":memory:":
            self._conn.execute("PRAGMA journal_mode=WAL")
            self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute("PRAGMA foreign_keys=ON")
        self._conn.executescript(SCHEMA)
        self._conn.commit()
        self._lock = threading.RLock()

    @contextmanager
    def transaction(self):
        """Serialized read-write transaction. Nested use joins the outer one."""
        with self._lock:
            if self._conn.in_transaction:
                yield self._conn
                return
            try:
                yield self._conn
                self._conn.commit()
            except BaseException:
                self._conn.rollback()
                raise

    def close(self) -> None:
        self._conn.close()
