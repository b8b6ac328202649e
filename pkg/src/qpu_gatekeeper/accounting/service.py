"""Accounting domain operations.

Owns the organisation -> project -> user hierarchy, QPU-millisecond
budgets, pre-allocated slots, exclusive reservations, the per-job ledger,
and the authorization decision the gateway consults before every
submission.

Budget mutations (job charges, reservation charges/refunds) run as
serialized transactions and are recorded in an audit log carrying the
post-commit consumed value, so tests can assert that no interleaving ever
overdraws a project.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field

from qpu_gatekeeper.accounting.db import Database
from qpu_gatekeeper.plugins.records import DenialReason, JobAuthorizationResult
from qpu_gatekeeper.timeutil import Clock, now_ms

log = logging.getLogger("qpu_gatekeeper.accounting")

ROLES = ("admin", "org_manager", "pi", "regular")


class NotFound(Exception):
    pass


class NotAuthorised(Exception):
    pass


class IntegrityViolation(Exception):
    pass


class UnknownProject(Exception):
    pass


class OutsideSlot(Exception):
    pass


class Overlap(Exception):
    pass


class InsufficientBudget(Exception):
    pass


class AlreadyStarted(Exception):
    pass


@dataclass(frozen=True)
class Caller:
    """Authenticated identity making an API call."""

    user_id: str
    roles: frozenset[str] = frozenset()
    is_service: bool = False

    @property
    def is_admin(self) -> bool:
        return self.is_service or "admin" in self.roles


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:10]}"


@dataclass
class ReportOutcome:
    duplicate: bool = False
    charged_ms: int = 0


@dataclass
class BillingReport:
    scope: str
    scope_id: str
    period_start: int
    period_end: int
    job_count: int = 0
    total_qpu_ms: int = 0
    reservation_ms: int = 0
    per_user: dict[str, dict] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "scope": self.scope,
            "scope_id": self.scope_id,
            "period_start": self.period_start,
            "period_end": self.period_end,
            "job_count": self.job_count,
            "total_qpu_ms": self.total_qpu_ms,
            "reservation_ms": self.reservation_ms,
            "per_user": self.per_user,
        }


class AccountingService:
    def __init__(self, db: Database | None = None, clock: Clock = now_ms):
        self.db = db or Database()
        self.clock = clock

    # ------------------------------------------------------------------
    # authorization decision
    # ------------------------------------------------------------------

    def authorise_job(
        self,
        user_id: str,
        project_hint: str | None,
        estimated_cost_ms: int,
        now: int | None = None,
    ) -> JobAuthorizationResult:
        """Decide whether a submission may proceed.

        In order: project membership (resolving the billing project from
        the hint, falling back to the user's default), exclusive
        reservation ownership, then remaining budget. Jobs under their own
        project's reservation are approved without budget charging; that
        time was billed when the reservation was placed. Fairness is not
        decided here -- the gateway's shot ledger owns that check.
        """
        now = self.clock() if now is None else now
        with self.db.transaction() as conn:
            project_id = self._resolve_project(conn, user_id, project_hint)
            if project_id is None:
                return JobAuthorizationResult(
                    allowed=False,
                    reason=DenialReason.NO_PROJECT,
                    detail="user is not a member of any resolvable project",
                )
            active = conn.execute(
                "SELECT reservation_id, project_id FROM reservations"
                " WHERE start_ms <= ? AND ? < end_ms",
                (now, now),
            ).fetchone()
            if active is not None:
                if active["project_id"] != project_id:
                    return JobAuthorizationResult(
                        allowed=False,
                        reason=DenialReason.EXCLUSIVE_RESERVATION,
                        detail=f"device reserved by project {active['project_id']}",
                    )
                return JobAuthorizationResult(
                    allowed=True,
                    reason=DenialReason.APPROVED,
                    resolved_project=project_id,
                    charge_budget=False,
                    detail=f"running under reservation {active['reservation_id']}",
                )
            project = conn.execute(
                "SELECT budget_ms, consumed_ms FROM projects WHERE project_id = ?",
                (project_id,),
            ).fetchone()
            if project["consumed_ms"] + estimated_cost_ms > project["budget_ms"]:
                return JobAuthorizationResult(
                    allowed=False,
                    reason=DenialReason.BUDGET_EXHAUSTED,
                    detail=(
                        f"project {project_id} has "
                        f"{project['budget_ms'] - project['consumed_ms']} ms left, "
                        f"estimated cost {estimated_cost_ms} ms"
                    ),
                )
            return JobAuthorizationResult(
                allowed=True,
                reason=DenialReason.APPROVED,
                resolved_project=project_id,
                charge_budget=True,
            )

    def _resolve_project(self, conn, user_id: str, project_hint: str | None) -> str | None:
        user = conn.execute(
            "SELECT user_id, default_project_id FROM users WHERE user_id = ? AND disabled = 0",
            (user_id,),
        ).fetchone()
        if user is None:
            return None
        memberships = {
            row["project_id"]
            for row in conn.execute(
                "SELECT pm.project_id FROM project_members pm"
                " JOIN projects p ON p.project_id = pm.project_id"
                " WHERE pm.user_id = ? AND p.disabled = 0",
                (user_id,),
            )
        }
        if not memberships:
            return None
        if project_hint is not None and project_hint in memberships:
            return project_hint
        default = user["default_project_id"]
        if default in memberships:
            return default
        return None

    # ------------------------------------------------------------------
    # job reports
    # ------------------------------------------------------------------

    def report_job(
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
    ) -> ReportOutcome:
        """Record a submitted/completed event; idempotent per (job_id, phase).

        A completed+ready report on a budget-charged job atomically adds
        the QPU time to the project's and organisation's consumed totals.
        """
        if phase not in ("submitted", "completed"):
            raise ValueError(f"unknown phase {phase!r}")
        if phase == "completed" and qpu_time_ms is None:
            raise ValueError("completed reports must carry qpu_time_ms")
        with self.db.transaction() as conn:
            project = conn.execute(
                "SELECT project_id, org_id, budget_ms, consumed_ms FROM projects"
                " WHERE project_id = ?",
                (project_id,),
            ).fetchone()
            if project is None:
                raise UnknownProject(project_id)
            row = conn.execute("SELECT * FROM jobs WHERE job_id = ?", (job_id,)).fetchone()
            if phase == "submitted":
                if row is not None:
                    return ReportOutcome(duplicate=True)
                conn.execute(
                    "INSERT INTO jobs (job_id, user_id, project_id, submitted_at,"
                    " num_circuits, shots, status, charge_budget)"
                    " VALUES (?, ?, ?, ?, ?, ?, 'pending', ?)",
                    (
                        job_id,
                        user_id,
                        project_id,
                        self.clock() if submitted_at is None else submitted_at,
                        num_circuits,
                        shots,
                        1 if charge_budget else 0,
                    ),
                )
                return ReportOutcome()
            # phase == completed
            if status not in ("ready", "failed"):
                raise ValueError(f"completed phase requires a terminal status, got {status!r}")
            if row is None:
                # completion can outrun a dead-lettered submitted event;
                # recreate the record rather than losing the charge
                log.warning("completed report for unknown job %s; creating record", job_id)
                conn.execute(
                    "INSERT INTO jobs (job_id, user_id, project_id, submitted_at,"
                    " num_circuits, shots, status, charge_budget)"
                    " VALUES (?, ?, ?, ?, ?, ?, 'pending', ?)",
                    (
                        job_id,
                        user_id,
                        project_id,
                        self.clock() if submitted_at is None else submitted_at,
                        num_circuits,
                        shots,
                        1 if charge_budget else 0,
                    ),
                )
                row = conn.execute("SELECT * FROM jobs WHERE job_id = ?", (job_id,)).fetchone()
            if row["status"] in ("ready", "failed"):
                return ReportOutcome(duplicate=True, charged_ms=row["charged_ms"])
            charged_ms = 0
            if charge_budget and status == "ready" and qpu_time_ms > 0:
                remaining = project["budget_ms"] - project["consumed_ms"]
                charged_ms = qpu_time_ms
                if charged_ms > remaining:
                    # should not happen when estimates are honest; never overdraw
                    log.warning(
                        "charge of %d ms would overdraw project %s (remaining %d); clamping",
                        qpu_time_ms,
                        project_id,
                        remaining,
                    )
                    charged_ms = max(remaining, 0)
                self._charge(conn, project, charged_ms, "job_charge", f"job {job_id}")
            conn.execute(
                "UPDATE jobs SET status = ?, qpu_time_ms = ?, charged = ?, charged_ms = ?,"
                " result_url = COALESCE(?, result_url), completed_at = ? WHERE job_id = ?",
                (
                    status,
                    qpu_time_ms,
                    1 if charged_ms > 0 else 0,
                    charged_ms,
                    result_url,
                    self.clock(),
                    job_id,
                ),
            )
            return ReportOutcome(charged_ms=charged_ms)

    def _charge(self, conn, project, delta_ms: int, event: str, detail: str) -> None:
        """Apply a budget mutation and append the audit row (same transaction)."""
        if delta_ms == 0 and event == "job_charge":
            return
        consumed_after = project["consumed_ms"] + delta_ms
        conn.execute(
            "UPDATE projects SET consumed_ms = ? WHERE project_id = ?",
            (consumed_after, project["project_id"]),
        )
        conn.execute(
            "UPDATE orgs SET consumed_ms = MAX(consumed_ms + ?, 0) WHERE org_id = ?",
            (delta_ms, project["org_id"]),
        )
        conn.execute(
            "INSERT INTO audit_log (at_ms, event, project_id, delta_ms,"
            " consumed_after_ms, budget_ms, detail) VALUES (?, ?, ?, ?, ?, ?, ?)",
            (
                self.clock(),
                event,
                project["project_id"],
                delta_ms,
                consumed_after,
                project["budget_ms"],
                detail,
            ),
        )

    # ------------------------------------------------------------------
    # reservations
    # ------------------------------------------------------------------

    def create_reservation(
        self, caller: Caller, project_id: str, start: int, end: int
    ) -> dict:
        """Exclusive window for one project; budget is charged up front."""
        if start >= end:
            raise IntegrityViolation("reservation start must precede end")
        with self.db.transaction() as conn:
            project = conn.execute(
                "SELECT project_id, org_id, budget_ms, consumed_ms FROM projects"
                " WHERE project_id = ? AND disabled = 0",
                (project_id,),
            ).fetchone()
            if project is None:
                raise NotFound(f"project {project_id}")
            if not caller.is_admin and not self._is_project_admin(conn, caller, project_id):
                raise NotAuthorised("only the project's PIs may create reservations")
            slot = conn.execute(
                "SELECT slot_id FROM slots WHERE org_id = ? AND start_ms <= ? AND ? <= end_ms",
                (project["org_id"], start, end),
            ).fetchone()
            if slot is None:
                raise OutsideSlot(
                    "reservation window must lie inside one of the organisation's slots"
                )
            clash = conn.execute(
                "SELECT reservation_id FROM reservations WHERE start_ms < ? AND ? < end_ms",
                (end, start),
            ).fetchone()
            if clash is not None:
                raise Overlap(f"overlaps reservation {clash['reservation_id']}")
            charged_ms = end - start
            if project["consumed_ms"] + charged_ms > project["budget_ms"]:
                raise InsufficientBudget(
                    f"window costs {charged_ms} ms, project has "
                    f"{project['budget_ms'] - project['consumed_ms']} ms left"
                )
            reservation_id = _new_id("rsv")
            conn.execute(
                "INSERT INTO reservations (reservation_id, project_id, start_ms, end_ms,"
                " charged_ms) VALUES (?, ?, ?, ?, ?)",
                (reservation_id, project_id, start, end, charged_ms),
            )
            self._charge(
                conn, project, charged_ms, "reservation_charge", f"reservation {reservation_id}"
            )
            return self._reservation_view(conn, reservation_id)

    def cancel_reservation(self, caller: Caller, reservation_id: str, now: int | None = None) -> None:
        """Remove a not-yet-started reservation and refund its charge."""
        now = self.clock() if now is None else now
        with self.db.transaction() as conn:
            row = conn.execute(
                "SELECT * FROM reservations WHERE reservation_id = ?", (reservation_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"reservation {reservation_id}")
            if not caller.is_admin and not self._is_project_admin(conn, caller, row["project_id"]):
                raise NotAuthorised("only the project's PIs may cancel reservations")
            if now >= row["start_ms"]:
                raise AlreadyStarted("reservation has already started")
            project = conn.execute(
                "SELECT project_id, org_id, budget_ms, consumed_ms FROM projects"
                " WHERE project_id = ?",
                (row["project_id"],),
            ).fetchone()
            conn.execute(
                "DELETE FROM reservations WHERE reservation_id = ?", (reservation_id,)
            )
            self._charge(
                conn,
                project,
                -row["charged_ms"],
                "reservation_refund",
                f"reservation {reservation_id} cancelled",
            )

    def _is_project_admin(self, conn, caller: Caller, project_id: str) -> bool:
        row = conn.execute(
            "SELECT is_admin FROM project_members WHERE project_id = ? AND user_id = ?",
            (project_id, caller.user_id),
        ).fetchone()
        return bool(row and row["is_admin"])

    def _reservation_view(self, conn, reservation_id: str) -> dict:
        row = conn.execute(
            "SELECT * FROM reservations WHERE reservation_id = ?", (reservation_id,)
        ).fetchone()
        return {
            "reservation_id": row["reservation_id"],
            "project_id": row["project_id"],
            "start_ms": row["start_ms"],
            "end_ms": row["end_ms"],
            "charged_ms": row["charged_ms"],
        }

    # ------------------------------------------------------------------
    # organisations
    # ------------------------------------------------------------------

    def create_org(self, caller: Caller, name: str, yearly_budget_ms: int, org_id: str | None = None) -> dict:
        if not caller.is_admin:
            raise NotAuthorised("only admins create organisations")
        org_id = org_id or _new_id("org")
        with self.db.transaction() as conn:
            conn.execute(
                "INSERT INTO orgs (org_id, name, yearly_budget_ms) VALUES (?, ?, ?)",
                (org_id, name, yearly_budget_ms),
            )
            return self.get_org(caller, org_id)

    def get_org(self, caller: Caller, org_id: str) -> dict:
        with self.db.transaction() as conn:
            row = conn.execute("SELECT * FROM orgs WHERE org_id = ?", (org_id,)).fetchone()
            if row is None:
                raise NotFound(f"org {org_id}")
            if not caller.is_admin and org_id not in self._caller_orgs(conn, caller):
                raise NotAuthorised("no access to this organisation")
            return dict(row)

    def list_orgs(self, caller: Caller) -> list[dict]:
        with self.db.transaction() as conn:
            rows = conn.execute("SELECT * FROM orgs ORDER BY org_id").fetchall()
            if not caller.is_admin:
                visible = self._caller_orgs(conn, caller)
                rows = [r for r in rows if r["org_id"] in visible]
            return [dict(r) for r in rows]

    def update_org(self, caller: Caller, org_id: str, yearly_budget_ms: int | None = None, name: str | None = None) -> dict:
        if not caller.is_admin:
            raise NotAuthorised("only admins update organisations")
        with self.db.transaction() as conn:
            row = conn.execute("SELECT * FROM orgs WHERE org_id = ?", (org_id,)).fetchone()
            if row is None:
                raise NotFound(f"org {org_id}")
            if yearly_budget_ms is not None:
                allocated = conn.execute(
                    "SELECT COALESCE(SUM(budget_ms), 0) AS s FROM projects"
                    " WHERE org_id = ? AND disabled = 0",
                    (org_id,),
                ).fetchone()["s"]
                if yearly_budget_ms < allocated:
                    raise IntegrityViolation(
                        f"org budget {yearly_budget_ms} below allocated project budgets {allocated}"
                    )
                conn.execute(
                    "UPDATE orgs SET yearly_budget_ms = ? WHERE org_id = ?",
                    (yearly_budget_ms, org_id),
                )
            if name is not None:
                conn.execute("UPDATE orgs SET name = ? WHERE org_id = ?", (name, org_id))
            return dict(conn.execute("SELECT * FROM orgs WHERE org_id = ?", (org_id,)).fetchone())

    def delete_org(self, caller: Caller, org_id: str) -> None:
        if not caller.is_admin:
            raise NotAuthorised("only admins delete organisations")
        with self.db.transaction() as conn:
            if conn.execute("SELECT 1 FROM orgs WHERE org_id = ?", (org_id,)).fetchone() is None:
                raise NotFound(f"org {org_id}")
            history = conn.execute(
                "SELECT 1 FROM jobs j JOIN projects p ON p.project_id = j.project_id"
                " WHERE p.org_id = ? LIMIT 1",
                (org_id,),
            ).fetchone()
            if history is not None:
                conn.execute("UPDATE orgs SET disabled = 1 WHERE org_id = ?", (org_id,))
                return
            if conn.execute(
                "SELECT 1 FROM projects WHERE org_id = ? LIMIT 1", (org_id,)
            ).fetchone():
                raise IntegrityViolation("organisation still has projects")
            conn.execute("DELETE FROM slots WHERE org_id = ?", (org_id,))
            conn.execute("DELETE FROM user_orgs WHERE org_id = ?", (org_id,))
            conn.execute("DELETE FROM orgs WHERE org_id = ?", (org_id,))

    def _caller_orgs(self, conn, caller: Caller) -> set[str]:
        return {
            row["org_id"]
            for row in conn.execute(
                "SELECT org_id FROM user_orgs WHERE user_id = ?", (caller.user_id,)
            )
        }

    def _manages_org(self, conn, caller: Caller, org_id: str) -> bool:
        if caller.is_admin:
            return True
        return "org_manager" in caller.roles and org_id in self._caller_orgs(conn, caller)

    # ------------------------------------------------------------------
    # projects
    # ------------------------------------------------------------------

    def create_project(
        self,
        caller: Caller,
        org_id: str,
        name: str,
        budget_ms: int,
        project_id: str | None = None,
    ) -> dict:
        project_id = project_id or _new_id("prj")
        with self.db.transaction() as conn:
            org = conn.execute(
                "SELECT * FROM orgs WHERE org_id = ? AND disabled = 0", (org_id,)
            ).fetchone()
            if org is None:
                raise NotFound(f"org {org_id}")
            if not self._manages_org(conn, caller, org_id):
                raise NotAuthorised("caller does not manage this organisation")
            allocated = conn.execute(
                "SELECT COALESCE(SUM(budget_ms), 0) AS s FROM projects"
                " WHERE org_id = ? AND disabled = 0",
                (org_id,),
            ).fetchone()["s"]
            if allocated + budget_ms > org["yearly_budget_ms"]:
                raise IntegrityViolation(
                    f"project budgets would total {allocated + budget_ms} ms,"
                    f" exceeding the org budget of {org['yearly_budget_ms']} ms"
                )
            conn.execute(
                "INSERT INTO projects (project_id, org_id, name, budget_ms) VALUES (?, ?, ?, ?)",
                (project_id, org_id, name, budget_ms),
            )
            return self._project_view(conn, project_id)

    def get_project(self, caller: Caller, project_id: str) -> dict:
        with self.db.transaction() as conn:
            view = self._project_view(conn, project_id)
            if not self._sees_project(conn, caller, project_id, view["org_id"]):
                raise NotAuthorised("no access to this project")
            return view

    def list_projects(self, caller: Caller, org_id: str | None = None) -> list[dict]:
        with self.db.transaction() as conn:
            rows = conn.execute(
                "SELECT project_id, org_id FROM projects"
                + (" WHERE org_id = ?" if org_id else "")
                + " ORDER BY project_id",
                (org_id,) if org_id else (),
            ).fetchall()
            return [
                self._project_view(conn, r["project_id"])
                for r in rows
                if self._sees_project(conn, caller, r["project_id"], r["org_id"])
            ]

    def update_project(
        self,
        caller: Caller,
        project_id: str,
        budget_ms: int | None = None,
        name: str | None = None,
        default_for: str | None = None,
    ) -> dict:
        with self.db.transaction() as conn:
            row = conn.execute(
                "SELECT * FROM projects WHERE project_id = ?", (project_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"project {project_id}")
            if not self._manages_org(conn, caller, row["org_id"]):
                raise NotAuthorised("caller does not manage this organisation")
            if budget_ms is not None:
                org = conn.execute(
                    "SELECT yearly_budget_ms FROM orgs WHERE org_id = ?", (row["org_id"],)
                ).fetchone()
                others = conn.execute(
                    "SELECT COALESCE(SUM(budget_ms), 0) AS s FROM projects"
                    " WHERE org_id = ? AND disabled = 0 AND project_id != ?",
                    (row["org_id"], project_id),
                ).fetchone()["s"]
                if others + budget_ms > org["yearly_budget_ms"]:
                    raise IntegrityViolation("project budgets would exceed the org budget")
                if budget_ms < row["consumed_ms"]:
                    raise IntegrityViolation(
                        f"budget {budget_ms} below already-consumed {row['consumed_ms']}"
                    )
                conn.execute(
                    "UPDATE projects SET budget_ms = ? WHERE project_id = ?",
                    (budget_ms, project_id),
                )
            if name is not None:
                conn.execute(
                    "UPDATE projects SET name = ? WHERE project_id = ?", (name, project_id)
                )
            return self._project_view(conn, project_id)

    def delete_project(self, caller: Caller, project_id: str) -> None:
        with self.db.transaction() as conn:
            row = conn.execute(
                "SELECT * FROM projects WHERE project_id = ?", (project_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"project {project_id}")
            if not self._manages_org(conn, caller, row["org_id"]):
                raise NotAuthorised("caller does not manage this organisation")
            history = conn.execute(
                "SELECT 1 FROM jobs WHERE project_id = ? LIMIT 1", (project_id,)
            ).fetchone()
            if history is not None:
                conn.execute(
                    "UPDATE projects SET disabled = 1 WHERE project_id = ?", (project_id,)
                )
                return
            conn.execute("DELETE FROM project_members WHERE project_id = ?", (project_id,))
            conn.execute("DELETE FROM reservations WHERE project_id = ?", (project_id,))
            conn.execute("DELETE FROM projects WHERE project_id = ?", (project_id,))

    def add_member(self, caller: Caller, project_id: str, user_id: str, is_admin: bool = False) -> None:
        with self.db.transaction() as conn:
            row = conn.execute(
                "SELECT org_id FROM projects WHERE project_id = ? AND disabled = 0",
                (project_id,),
            ).fetchone()
            if row is None:
                raise NotFound(f"project {project_id}")
            if not (
                self._manages_org(conn, caller, row["org_id"])
                or self._is_project_admin(conn, caller, project_id)
            ):
                raise NotAuthorised("caller may not manage this project's membership")
            if conn.execute(
                "SELECT 1 FROM users WHERE user_id = ?", (user_id,)
            ).fetchone() is None:
                raise NotFound(f"user {user_id}")
            conn.execute(
                "INSERT OR REPLACE INTO project_members (project_id, user_id, is_admin)"
                " VALUES (?, ?, ?)",
                (project_id, user_id, 1 if is_admin else 0),
            )

    def remove_member(self, caller: Caller, project_id: str, user_id: str) -> None:
        with self.db.transaction() as conn:
            row = conn.execute(
                "SELECT org_id FROM projects WHERE project_id = ?", (project_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"project {project_id}")
            if not (
                self._manages_org(conn, caller, row["org_id"])
                or self._is_project_admin(conn, caller, project_id)
            ):
                raise NotAuthorised("caller may not manage this project's membership")
            conn.execute(
                "DELETE FROM project_members WHERE project_id = ? AND user_id = ?",
                (project_id, user_id),
            )

    def _sees_project(self, conn, caller: Caller, project_id: str, org_id: str) -> bool:
        if caller.is_admin:
            return True
        if "org_manager" in caller.roles and org_id in self._caller_orgs(conn, caller):
            return True
        return (
            conn.execute(
                "SELECT 1 FROM project_members WHERE project_id = ? AND user_id = ?",
                (project_id, caller.user_id),
            ).fetchone()
            is not None
        )

    def _project_view(self, conn, project_id: str) -> dict:
        row = conn.execute(
            "SELECT * FROM projects WHERE project_id = ?", (project_id,)
        ).fetchone()
        if row is None:
            raise NotFound(f"project {project_id}")
        members = conn.execute(
            "SELECT user_id, is_admin FROM project_members WHERE project_id = ?"
            " ORDER BY user_id",
            (project_id,),
        ).fetchall()
        return {
            "project_id": row["project_id"],
            "org_id": row["org_id"],
            "name": row["name"],
            "budget_ms": row["budget_ms"],
            "consumed_ms": row["consumed_ms"],
            "remaining_ms": row["budget_ms"] - row["consumed_ms"],
            "disabled": bool(row["disabled"]),
            "member_ids": [m["user_id"] for m in members],
            "admin_ids": [m["user_id"] for m in members if m["is_admin"]],
        }

    # ------------------------------------------------------------------
    # users
    # ------------------------------------------------------------------

    def create_user(
        self,
        caller: Caller,
        username: str,
        role: str,
        org_ids: list[str],
        default_project_id: str | None = None,
        user_id: str | None = None,
    ) -> dict:
        if role not in ROLES:
            raise IntegrityViolation(f"unknown role {role!r}")
        user_id = user_id or _new_id("usr")
        with self.db.transaction() as conn:
            for org_id in org_ids:
                if conn.execute(
                    "SELECT 1 FROM orgs WHERE org_id = ? AND disabled = 0", (org_id,)
                ).fetchone() is None:
                    raise NotFound(f"org {org_id}")
                if not self._manages_org(conn, caller, org_id):
                    raise NotAuthorised("caller does not manage this organisation")
            if not org_ids and not caller.is_admin:
                raise NotAuthorised("only admins create org-less users")
            conn.execute(
                "INSERT INTO users (user_id, username, role, default_project_id)"
                " VALUES (?, ?, ?, ?)",
                (user_id, username, role, None),
            )
            for org_id in org_ids:
                conn.execute(
                    "INSERT INTO user_orgs (user_id, org_id) VALUES (?, ?)", (user_id, org_id)
                )
            if default_project_id is not None:
                self._set_default_project(conn, user_id, default_project_id)
            return self._user_view(conn, user_id)

    def get_user(self, caller: Caller, user_id: str) -> dict:
        with self.db.transaction() as conn:
            view = self._user_view(conn, user_id)
            if caller.is_admin or caller.user_id == user_id:
                return view
            if "org_manager" in caller.roles and (
                set(view["org_ids"]) & self._caller_orgs(conn, caller)
            ):
                return view
            raise NotAuthorised("no access to this user")

    def list_users(self, caller: Caller) -> list[dict]:
        with self.db.transaction() as conn:
            ids = [r["user_id"] for r in conn.execute("SELECT user_id FROM users ORDER BY user_id")]
            views = [self._user_view(conn, uid) for uid in ids]
            if caller.is_admin:
                return views
            if "org_manager" in caller.roles:
                mine = self._caller_orgs(conn, caller)
                return [v for v in views if set(v["org_ids"]) & mine or v["user_id"] == caller.user_id]
            return [v for v in views if v["user_id"] == caller.user_id]

    def update_user(
        self,
        caller: Caller,
        user_id: str,
        role: str | None = None,
        default_project_id: str | None = None,
    ) -> dict:
        with self.db.transaction() as conn:
            if conn.execute("SELECT 1 FROM users WHERE user_id = ?", (user_id,)).fetchone() is None:
                raise NotFound(f"user {user_id}")
            if role is not None:
                if not caller.is_admin:
                    raise NotAuthorised("only admins change roles")
                if role not in ROLES:
                    raise IntegrityViolation(f"unknown role {role!r}")
                conn.execute("UPDATE users SET role = ? WHERE user_id = ?", (role, user_id))
            if default_project_id is not None:
                if not (caller.is_admin or caller.user_id == user_id):
                    raise NotAuthorised("users set their own default project")
                self._set_default_project(conn, user_id, default_project_id)
            return self._user_view(conn, user_id)

    def _set_default_project(self, conn, user_id: str, project_id: str) -> None:
        member = conn.execute(
            "SELECT 1 FROM project_members WHERE project_id = ? AND user_id = ?",
            (project_id, user_id),
        ).fetchone()
        if member is None:
            raise IntegrityViolation("default project requires membership")
        conn.execute(
            "UPDATE users SET default_project_id = ? WHERE user_id = ?", (project_id, user_id)
        )

    def _user_view(self, conn, user_id: str) -> dict:
        row = conn.execute("SELECT * FROM users WHERE user_id = ?", (user_id,)).fetchone()
        if row is None:
            raise NotFound(f"user {user_id}")
        org_ids = [
            r["org_id"]
            for r in conn.execute(
                "SELECT org_id FROM user_orgs WHERE user_id = ? ORDER BY org_id", (user_id,)
            )
        ]
        projects = [
            r["project_id"]
            for r in conn.execute(
                "SELECT project_id FROM project_members WHERE user_id = ? ORDER BY project_id",
                (user_id,),
            )
        ]
        return {
            "user_id": row["user_id"],
            "username": row["username"],
            "role": row["role"],
            "org_ids": org_ids,
            "project_ids": projects,
            "default_project_id": row["default_project_id"],
            "disabled": bool(row["disabled"]),
        }

    # ------------------------------------------------------------------
    # slots
    # ------------------------------------------------------------------

    def create_slot(self, caller: Caller, org_id: str, start: int, end: int, slot_id: str | None = None) -> dict:
        if start >= end:
            raise IntegrityViolation("slot start must precede end")
        slot_id = slot_id or _new_id("slot")
        with self.db.transaction() as conn:
            if conn.execute(
                "SELECT 1 FROM orgs WHERE org_id = ? AND disabled = 0", (org_id,)
            ).fetchone() is None:
                raise NotFound(f"org {org_id}")
            if not self._manages_org(conn, caller, org_id):
                raise NotAuthorised("caller does not manage this organisation")
            clash = conn.execute(
                "SELECT slot_id FROM slots WHERE org_id != ? AND start_ms < ? AND ? < end_ms",
                (org_id, end, start),
            ).fetchone()
            if clash is not None:
                raise Overlap(f"overlaps slot {clash['slot_id']} of another organisation")
            conn.execute(
                "INSERT INTO slots (slot_id, org_id, start_ms, end_ms) VALUES (?, ?, ?, ?)",
                (slot_id, org_id, start, end),
            )
            return {"slot_id": slot_id, "org_id": org_id, "start_ms": start, "end_ms": end}

    def list_slots(self, caller: Caller, start: int | None = None, end: int | None = None) -> list[dict]:
        # the slots calendar is visible to every authenticated user
        with self.db.transaction() as conn:
            rows = conn.execute(
                "SELECT * FROM slots WHERE (? IS NULL OR end_ms > ?)"
                " AND (? IS NULL OR start_ms < ?) ORDER BY start_ms",
                (start, start, end, end),
            ).fetchall()
            return [dict(r) for r in rows]

    def delete_slot(self, caller: Caller, slot_id: str) -> None:
        with self.db.transaction() as conn:
            row = conn.execute("SELECT * FROM slots WHERE slot_id = ?", (slot_id,)).fetchone()
            if row is None:
                raise NotFound(f"slot {slot_id}")
            if not self._manages_org(conn, caller, row["org_id"]):
                raise NotAuthorised("caller does not manage this organisation")
            reserved = conn.execute(
                "SELECT r.reservation_id FROM reservations r"
                " JOIN projects p ON p.project_id = r.project_id"
                " WHERE p.org_id = ? AND r.start_ms >= ? AND r.end_ms <= ? LIMIT 1",
                (row["org_id"], row["start_ms"], row["end_ms"]),
            ).fetchone()
            if reserved is not None:
                raise IntegrityViolation("slot still contains reservations")
            conn.execute("DELETE FROM slots WHERE slot_id = ?", (slot_id,))

    def list_reservations(self, caller: Caller, start: int | None = None, end: int | None = None) -> list[dict]:
        with self.db.transaction() as conn:
            rows = conn.execute(
                "SELECT reservation_id FROM reservations WHERE (? IS NULL OR end_ms > ?)"
                " AND (? IS NULL OR start_ms < ?) ORDER BY start_ms",
                (start, start, end, end),
            ).fetchall()
            return [self._reservation_view(conn, r["reservation_id"]) for r in rows]

    # ------------------------------------------------------------------
    # jobs and reports
    # ------------------------------------------------------------------

    def get_job(self, caller: Caller, job_id: str) -> dict:
        with self.db.transaction() as conn:
            row = conn.execute("SELECT * FROM jobs WHERE job_id = ?", (job_id,)).fetchone()
            if row is None:
                raise NotFound(f"job {job_id}")
            project = conn.execute(
                "SELECT org_id FROM projects WHERE project_id = ?", (row["project_id"],)
            ).fetchone()
            if not (
                caller.is_admin
                or caller.user_id == row["user_id"]
                or self._sees_project(conn, caller, row["project_id"], project["org_id"])
            ):
                raise NotAuthorised("no access to this job")
            return dict(row)

    def list_jobs(
        self,
        caller: Caller,
        project_id: str | None = None,
        user_id: str | None = None,
        status: str | None = None,
        limit: int = 200,
        offset: int = 0,
    ) -> list[dict]:
        with self.db.transaction() as conn:
            clauses, params = ["1=1"], []
            if project_id:
                clauses.append("project_id = ?")
                params.append(project_id)
            if user_id:
                clauses.append("user_id = ?")
                params.append(user_id)
            if status:
                clauses.append("status = ?")
                params.append(status)
            rows = conn.execute(
                f"SELECT * FROM jobs WHERE {' AND '.join(clauses)}"
                " ORDER BY submitted_at DESC, job_id DESC LIMIT ? OFFSET ?",
                (*params, limit, offset),
            ).fetchall()
            visible = []
            for row in rows:
                project = conn.execute(
                    "SELECT org_id FROM projects WHERE project_id = ?", (row["project_id"],)
                ).fetchone()
                if (
                    caller.is_admin
                    or caller.user_id == row["user_id"]
                    or (
                        project is not None
                        and self._sees_project(conn, caller, row["project_id"], project["org_id"])
                    )
                ):
                    visible.append(dict(row))
            return visible

    def billing_report(self, caller: Caller, scope: str, scope_id: str, t0: int, t1: int) -> dict:
        """Aggregate charged QPU time and reservation charges over [t0, t1).

        An org report is the sum of its project reports, so the
        aggregation property holds by construction.
        """
        if t0 >= t1:
            raise IntegrityViolation("report period start must precede end")
        with self.db.transaction() as conn:
            if scope == "project":
                view = self._project_view(conn, scope_id)
                if not self._sees_project(conn, caller, scope_id, view["org_id"]):
                    raise NotAuthorised("no access to this project")
                return self._project_report(conn, scope_id, t0, t1).as_dict()
            if scope == "org":
                if conn.execute(
                    "SELECT 1 FROM orgs WHERE org_id = ?", (scope_id,)
                ).fetchone() is None:
                    raise NotFound(f"org {scope_id}")
                if not (caller.is_admin or self._manages_org(conn, caller, scope_id)):
                    raise NotAuthorised("no access to this organisation's report")
                report = BillingReport("org", scope_id, t0, t1)
                for row in conn.execute(
                    "SELECT project_id FROM projects WHERE org_id = ? ORDER BY project_id",
                    (scope_id,),
                ):
                    sub = self._project_report(conn, row["project_id"], t0, t1)
                    report.job_count += sub.job_count
                    report.total_qpu_ms += sub.total_qpu_ms
                    report.reservation_ms += sub.reservation_ms
                    for uid, entry in sub.per_user.items():
                        agg = report.per_user.setdefault(uid, {"job_count": 0, "qpu_ms": 0})
                        agg["job_count"] += entry["job_count"]
                        agg["qpu_ms"] += entry["qpu_ms"]
                return report.as_dict()
            raise IntegrityViolation(f"unknown report scope {scope!r}")

    def _project_report(self, conn, project_id: str, t0: int, t1: int) -> BillingReport:
        report = BillingReport("project", project_id, t0, t1)
        for row in conn.execute(
            "SELECT user_id, status, charged, charged_ms FROM jobs"
            " WHERE project_id = ? AND submitted_at >= ? AND submitted_at < ?",
            (project_id, t0, t1),
        ):
            report.job_count += 1
            entry = report.per_user.setdefault(row["user_id"], {"job_count": 0, "qpu_ms": 0})
            entry["job_count"] += 1
            if row["status"] == "ready" and row["charged"]:
                report.total_qpu_ms += row["charged_ms"]
                entry["qpu_ms"] += row["charged_ms"]
        row = conn.execute(
            "SELECT COALESCE(SUM(charged_ms), 0) AS s FROM reservations"
            " WHERE project_id = ? AND start_ms >= ? AND start_ms < ?",
            (project_id, t0, t1),
        ).fetchone()
        report.reservation_ms = row["s"]
        return report

    # ------------------------------------------------------------------
    # introspection used by tests and operators
    # ------------------------------------------------------------------

    def audit_log(self) -> list[dict]:
        with self.db.transaction() as conn:
            return [dict(r) for r in conn.execute("SELECT * FROM audit_log ORDER BY seq")]
