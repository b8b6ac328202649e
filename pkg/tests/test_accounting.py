"""Accounting: authorization truth table, reports, reservations, role matrix."""

from __future__ import annotations

import itertools

import httpx
import pytest

from qpu_gatekeeper.accounting.app import build_app as build_accounting_app
from qpu_gatekeeper.accounting.db import Database
from qpu_gatekeeper.accounting.service import (
    AccountingService,
    AlreadyStarted,
    Caller,
    InsufficientBudget,
    IntegrityViolation,
    NotAuthorised,
    NotFound,
    OutsideSlot,
    Overlap,
)
from qpu_gatekeeper.authn.tokens import TokenIssuer, TokenValidator

from tests.conftest import LogicalClock

SVC = Caller(user_id="@service", roles=frozenset({"admin"}), is_service=True)

T0 = 1_700_000_000_000
HOUR = 3_600_000


@pytest.fixture
def service(clock):
    return AccountingService(Database(), clock=clock)


def seed_org_project(service, org_budget=10 * HOUR, project_budget=HOUR):
    service.create_org(SVC, "org", org_budget, org_id="O")
    service.create_project(SVC, "O", "proj", project_budget, project_id="P")
    service.create_user(SVC, "alice", "regular", ["O"], user_id="alice")
    service.add_member(SVC, "P", "alice")
    service.update_user(SVC, "alice", default_project_id="P")


# ---------------------------------------------------------------------------
# authorization truth table: membership x hint x reservation x budget
# ---------------------------------------------------------------------------

EST = 120  # probe estimate: 1 circuit x 1000 shots x 0.12 ms
RES_START = T0 + 10 * HOUR
RES_END = RES_START + 60_000  # one minute, affordable for the 100,000 ms project
NOW_IN_RES = RES_START + 30_000
NOW_OUTSIDE = T0 + 5 * HOUR


def independent_verdict(membership, hint, reservation, budget):
    """The decision procedure encoded as a bare lookup, independent of the
    implementation: membership first, then reservation ownership, then
    budget; own-reservation approvals bypass the budget and are uncharged."""
    if membership == "no":
        return ("deny", "no_project", None)
    if reservation == "foreign":
        return ("deny", "exclusive_reservation", None)
    if reservation == "own":
        return ("allow", "approved", False)
    if budget == "short":
        return ("deny", "budget_exhausted", None)
    return ("allow", "approved", True)


GRID = list(
    itertools.product(
        ("yes", "no"),
        ("valid", "invalid", "absent"),
        ("none", "own", "foreign"),
        ("enough", "short"),
    )
)


def build_scenario(clock, membership, hint, reservation, budget):
    service = AccountingService(Database(), clock=clock)
    service.create_org(SVC, "org", 100 * HOUR, org_id="O")
    # P: the user's project (when member); F: another project; Q: exists,
    # user is never a member (target of the invalid hint)
    service.create_project(SVC, "O", "P", 100_000, project_id="P")
    service.create_project(SVC, "O", "F", 10 * HOUR, project_id="F")
    service.create_project(SVC, "O", "Q", HOUR, project_id="Q")
    service.create_user(SVC, "alice", "regular", ["O"], user_id="alice")
    service.create_user(SVC, "paul", "pi", ["O"], user_id="paul")
    service.add_member(SVC, "P", "paul", is_admin=True)
    service.create_user(SVC, "fiona", "pi", ["O"], user_id="fiona")
    service.add_member(SVC, "F", "fiona", is_admin=True)
    if membership == "yes":
        service.add_member(SVC, "P", "alice")
        service.update_user(SVC, "alice", default_project_id="P")
    service.create_slot(SVC, "O", T0, T0 + 100 * HOUR, slot_id="S")
    reservation_cost = 0
    if reservation == "own":
        service.create_reservation(Caller("paul", frozenset({"pi"})), "P", RES_START, RES_END)
        reservation_cost = RES_END - RES_START
    elif reservation == "foreign":
        service.create_reservation(Caller("fiona", frozenset({"pi"})), "F", RES_START, RES_END)
    if budget == "short":
        # consume P down to less than the probe estimate
        remaining_target = EST - 100  # 20 ms left
        consume = 100_000 - reservation_cost - remaining_target
        service.report_job(
            "J-drain", "submitted", "pending", "paul", "P", 1, 1, True, submitted_at=T0
        )
        service.report_job(
            "J-drain", "completed", "ready", "paul", "P", 1, 1, True, qpu_time_ms=consume
        )
    now = NOW_IN_RES if reservation != "none" else NOW_OUTSIDE
    hint_value = {"valid": "P", "invalid": "Q", "absent": None}[hint]
    return service, hint_value, now


def test_authorization_truth_table_all_36_cells(clock):
    failures = []
    for cell in GRID:
        membership, hint, reservation, budget = cell
        service, hint_value, now = build_scenario(clock, *cell)
        verdict = service.authorise_job("alice", hint_value, EST, now=now)
        expected = independent_verdict(*cell)
        got = (
            "allow" if verdict.allowed else "deny",
            verdict.reason.value,
            verdict.charge_budget if verdict.allowed else None,
        )
        if got != expected:
            failures.append((cell, expected, got))
        if verdict.allowed and verdict.resolved_project != "P":
            failures.append((cell, "resolved P", verdict.resolved_project))
    assert not failures, f"{len(failures)} truth-table mismatches: {failures}"


def test_unknown_user_is_no_project(service, clock):
    seed_org_project(service)
    verdict = service.authorise_job("ghost", None, EST)
    assert not verdict.allowed
    assert verdict.reason.value == "no_project"


# ---------------------------------------------------------------------------
# job reports
# ---------------------------------------------------------------------------


def test_submitted_then_completed_charges_budget(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 5, 1000, True)
    outcome = service.report_job(
        "J-1", "completed", "ready", "alice", "P", 5, 1000, True, qpu_time_ms=600
    )
    assert outcome.charged_ms == 600
    project = service.get_project(SVC, "P")
    assert project["consumed_ms"] == 600
    org = service.get_org(SVC, "O")
    assert org["consumed_ms"] == 600
    job = service.get_job(SVC, "J-1")
    assert job["status"] == "ready"
    assert job["qpu_time_ms"] == 600
    assert job["charged"] == 1


def test_duplicate_submitted_is_ignored(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1, True)
    outcome = service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1, True)
    assert outcome.duplicate


def test_replayed_completed_charges_once(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1000, True)
    service.report_job("J-1", "completed", "ready", "alice", "P", 1, 1000, True, qpu_time_ms=120)
    outcome = service.report_job(
        "J-1", "completed", "ready", "alice", "P", 1, 1000, True, qpu_time_ms=120
    )
    assert outcome.duplicate
    assert service.get_project(SVC, "P")["consumed_ms"] == 120


def test_failed_job_never_charges(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1000, True)
    service.report_job("J-1", "completed", "failed", "alice", "P", 1, 1000, True, qpu_time_ms=0)
    assert service.get_project(SVC, "P")["consumed_ms"] == 0


def test_uncharged_job_never_charges(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1000, False)
    service.report_job(
        "J-1", "completed", "ready", "alice", "P", 1, 1000, False, qpu_time_ms=120
    )
    assert service.get_project(SVC, "P")["consumed_ms"] == 0
    job = service.get_job(SVC, "J-1")
    assert job["charged"] == 0


def test_charge_clamps_at_budget_cap(service, caplog):
    seed_org_project(service, project_budget=500)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1000, True)
    service.report_job("J-1", "completed", "ready", "alice", "P", 1, 1000, True, qpu_time_ms=600)
    project = service.get_project(SVC, "P")
    assert project["consumed_ms"] == 500  # never exceeds budget
    assert service.get_job(SVC, "J-1")["charged_ms"] == 500


def test_completed_without_submitted_still_lands(service):
    seed_org_project(service)
    service.report_job("J-9", "completed", "ready", "alice", "P", 1, 1000, True, qpu_time_ms=120)
    assert service.get_project(SVC, "P")["consumed_ms"] == 120


# ---------------------------------------------------------------------------
# reservations
# ---------------------------------------------------------------------------


def seed_reservation_world(service):
    service.create_org(SVC, "org", 100 * HOUR, org_id="O")
    service.create_project(SVC, "O", "proj", 700_000, project_id="P")
    service.create_user(SVC, "paul", "pi", ["O"], user_id="paul")
    service.add_member(SVC, "P", "paul", is_admin=True)
    service.create_user(SVC, "alice", "regular", ["O"], user_id="alice")
    service.add_member(SVC, "P", "alice")
    service.create_slot(SVC, "O", T0, T0 + 24 * HOUR, slot_id="S")


PI = Caller("paul", frozenset({"pi"}))
REGULAR = Caller("alice", frozenset({"regular"}))


def test_pi_reserves_ten_minutes_charges_600000(service):
    seed_reservation_world(service)
    rsv = service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 600_000)
    assert rsv["charged_ms"] == 600_000
    assert service.get_project(SVC, "P")["consumed_ms"] == 600_000


def test_regular_member_cannot_reserve(service):
    seed_reservation_world(service)
    with pytest.raises(NotAuthorised):
        service.create_reservation(REGULAR, "P", T0 + HOUR, T0 + 2 * HOUR)


def test_window_straddling_slot_boundary(service):
    seed_reservation_world(service)
    with pytest.raises(OutsideSlot):
        service.create_reservation(PI, "P", T0 + 23 * HOUR, T0 + 25 * HOUR)


def test_overlapping_reservations_rejected(service):
    seed_reservation_world(service)
    service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 60_000)
    with pytest.raises(Overlap):
        service.create_reservation(PI, "P", T0 + HOUR + 30_000, T0 + HOUR + 90_000)


def test_reservation_exceeding_budget(service):
    seed_reservation_world(service)
    with pytest.raises(InsufficientBudget):
        service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 700_001)


def test_cancel_refunds_exactly(service, clock):
    seed_reservation_world(service)
    rsv = service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 600_000)
    assert service.get_project(SVC, "P")["consumed_ms"] == 600_000
    service.cancel_reservation(PI, rsv["reservation_id"], now=T0)
    assert service.get_project(SVC, "P")["consumed_ms"] == 0


def test_cancel_after_start_rejected(service):
    seed_reservation_world(service)
    rsv = service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 60_000)
    with pytest.raises(AlreadyStarted):
        service.cancel_reservation(PI, rsv["reservation_id"], now=T0 + HOUR + 1)


def test_cancel_twice_not_found(service):
    seed_reservation_world(service)
    rsv = service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 60_000)
    service.cancel_reservation(PI, rsv["reservation_id"], now=T0)
    with pytest.raises(NotFound):
        service.cancel_reservation(PI, rsv["reservation_id"], now=T0)


# ---------------------------------------------------------------------------
# CRUD + role matrix
# ---------------------------------------------------------------------------


def test_project_budget_cannot_exceed_org_remaining(service):
    service.create_org(SVC, "org", HOUR, org_id="O")
    service.create_project(SVC, "O", "p1", HOUR // 2, project_id="P1")
    with pytest.raises(IntegrityViolation):
        service.create_project(SVC, "O", "p2", HOUR // 2 + 1, project_id="P2")


def test_org_manager_limited_to_own_org(service):
    service.create_org(SVC, "one", HOUR, org_id="O1")
    service.create_org(SVC, "two", HOUR, org_id="O2")
    service.create_user(SVC, "mona", "org_manager", ["O1"], user_id="mona")
    mona = Caller("mona", frozenset({"org_manager"}))
    service.create_project(mona, "O1", "own-org", 1000, project_id="P1")
    with pytest.raises(NotAuthorised):
        service.create_project(mona, "O2", "foreign-org", 1000, project_id="PX")


def test_list_projects_filters_by_visibility(service):
    for n in (1, 2):
        service.create_org(SVC, f"org{n}", HOUR, org_id=f"O{n}")
        for m in (1, 2):
            service.create_project(SVC, f"O{n}", f"p{n}{m}", 1000, project_id=f"P{n}{m}")
    service.create_user(SVC, "mona", "org_manager", ["O1"], user_id="mona")
    service.create_user(SVC, "rita", "regular", ["O2"], user_id="rita")
    service.add_member(SVC, "P21", "rita")
    assert {p["project_id"] for p in service.list_projects(SVC)} == {"P11", "P12", "P21", "P22"}
    mona_sees = {p["project_id"] for p in service.list_projects(Caller("mona", frozenset({"org_manager"})))}
    assert mona_sees == {"P11", "P12"}
    rita_sees = {p["project_id"] for p in service.list_projects(Caller("rita", frozenset({"regular"})))}
    assert rita_sees == {"P21"}


def test_delete_project_with_history_soft_disables(service):
    seed_org_project(service)
    service.report_job("J-1", "submitted", "pending", "alice", "P", 1, 1, True)
    service.delete_project(SVC, "P")
    row = [p for p in service.list_projects(SVC) if p["project_id"] == "P"]
    assert row and row[0]["disabled"]
    # a disabled project no longer resolves for authorization
    verdict = service.authorise_job("alice", "P", EST)
    assert verdict.reason.value == "no_project"


def test_default_project_requires_membership(service):
    seed_org_project(service)
    service.create_project(SVC, "O", "other", 1000, project_id="P2")
    with pytest.raises(IntegrityViolation):
        service.update_user(SVC, "alice", default_project_id="P2")


def test_slots_of_different_orgs_may_not_overlap(service):
    service.create_org(SVC, "one", HOUR, org_id="O1")
    service.create_org(SVC, "two", HOUR, org_id="O2")
    service.create_slot(SVC, "O1", T0, T0 + HOUR, slot_id="S1")
    with pytest.raises(Overlap):
        service.create_slot(SVC, "O2", T0 + HOUR // 2, T0 + 2 * HOUR)
    # adjacent windows are fine
    service.create_slot(SVC, "O2", T0 + HOUR, T0 + 2 * HOUR, slot_id="S2")


# ---------------------------------------------------------------------------
# billing reports
# ---------------------------------------------------------------------------


def test_billing_empty_period_is_zero(service):
    seed_org_project(service)
    report = service.billing_report(SVC, "project", "P", T0 - HOUR, T0 - 1)
    assert report["job_count"] == 0
    assert report["total_qpu_ms"] == 0
    assert report["reservation_ms"] == 0


def test_billing_sums_charged_ready_jobs(service, clock):
    seed_org_project(service)
    jobs = [("J-1", 100, False), ("J-2", 200, True), ("J-3", 300, True)]
    for job_id, qpu, charged in jobs:
        service.report_job(job_id, "submitted", "pending", "alice", "P", 1, 1, charged)
        service.report_job(
            job_id, "completed", "ready", "alice", "P", 1, 1, charged, qpu_time_ms=qpu
        )
    report = service.billing_report(SVC, "project", "P", clock() - HOUR, clock() + HOUR)
    assert report["job_count"] == 3
    assert report["total_qpu_ms"] == 500  # the 100 ms job ran uncharged
    assert report["per_user"]["alice"]["qpu_ms"] == 500


def test_org_report_equals_sum_of_project_reports(service, clock):
    service.create_org(SVC, "org", 100 * HOUR, org_id="O")
    service.create_user(SVC, "alice", "regular", ["O"], user_id="alice")
    for n, qpu in ((1, 111), (2, 222)):
        service.create_project(SVC, "O", f"p{n}", HOUR, project_id=f"P{n}")
        service.add_member(SVC, f"P{n}", "alice")
        service.report_job(f"J-{n}", "submitted", "pending", "alice", f"P{n}", 1, 1, True)
        service.report_job(
            f"J-{n}", "completed", "ready", "alice", f"P{n}", 1, 1, True, qpu_time_ms=qpu
        )
    t0, t1 = clock() - HOUR, clock() + HOUR
    org = service.billing_report(SVC, "org", "O", t0, t1)
    p1 = service.billing_report(SVC, "project", "P1", t0, t1)
    p2 = service.billing_report(SVC, "project", "P2", t0, t1)
    assert org["total_qpu_ms"] == p1["total_qpu_ms"] + p2["total_qpu_ms"] == 333
    assert org["job_count"] == p1["job_count"] + p2["job_count"] == 2


def test_reservation_charges_in_report(service):
    seed_reservation_world(service)
    service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 600_000)
    report = service.billing_report(SVC, "project", "P", T0, T0 + 24 * HOUR)
    assert report["reservation_ms"] == 600_000


# ---------------------------------------------------------------------------
# audit log / budget safety
# ---------------------------------------------------------------------------


def test_audit_log_never_shows_overdraw(service):
    seed_reservation_world(service)
    service.create_reservation(PI, "P", T0 + HOUR, T0 + HOUR + 600_000)
    for n in range(3):
        service.report_job(f"J-{n}", "submitted", "pending", "alice", "P", 1, 100, True)
        service.report_job(
            f"J-{n}", "completed", "ready", "alice", "P", 1, 100, True, qpu_time_ms=12
        )
    entries = service.audit_log()
    assert entries, "budget mutations must be audited"
    assert all(e["consumed_after_ms"] <= e["budget_ms"] for e in entries)


# ---------------------------------------------------------------------------
# HTTP surface
# ---------------------------------------------------------------------------


@pytest.fixture
def http_stack(clock):
    service = AccountingService(Database(), clock=clock)
    validator = TokenValidator(b"k", clock=clock)
    issuer = TokenIssuer(b"k", clock=clock)
    app = build_accounting_app(service, validator, "svc-token")
    client = httpx.AsyncClient(
        transport=httpx.ASGITransport(app=app), base_url="http://accounting.local"
    )
    return service, issuer, client


pytestmark_http = pytest.mark.anyio


@pytest.mark.anyio
async def test_job_authoriser_requires_service_token(http_stack, clock):
    service, issuer, client = http_stack
    seed_org_project(service)
    body = {"user_id": "alice", "project_hint": None, "estimated_cost_ms": 10}
    resp = await client.post("/jobAuthoriser", json=body)
    assert resp.status_code == 401
    user_token = issuer.issue("alice", "alice", frozenset({"regular"}))["access_token"]
    resp = await client.post(
        "/jobAuthoriser", json=body, headers={"Authorization": f"Bearer {user_token}"}
    )
    assert resp.status_code == 403
    resp = await client.post(
        "/jobAuthoriser", json=body, headers={"Authorization": "Bearer svc-token"}
    )
    assert resp.status_code == 200
    assert resp.json()["allowed"] is True


@pytest.mark.anyio
async def test_rest_role_enforcement_over_http(http_stack):
    service, issuer, client = http_stack
    seed_org_project(service)
    token = issuer.issue("alice", "alice", frozenset({"regular"}))["access_token"]
    headers = {"Authorization": f"Bearer {token}"}
    resp = await client.post(
        "/orgs", json={"name": "new", "yearly_budget_ms": 1}, headers=headers
    )
    assert resp.status_code == 403
    resp = await client.get("/projects", headers=headers)
    assert resp.status_code == 200
    assert [p["project_id"] for p in resp.json()["projects"]] == ["P"]


@pytest.mark.anyio
async def test_reservation_errors_surface_verbatim(http_stack):
    service, issuer, client = http_stack
    seed_reservation_world(service)
    token = issuer.issue("paul", "paul", frozenset({"pi"}))["access_token"]
    headers = {"Authorization": f"Bearer {token}"}

    def iso(ms):
        from qpu_gatekeeper.timeutil import to_iso

        return to_iso(ms)

    ok = await client.post(
        "/reservations",
        json={"project_id": "P", "start": iso(T0 + HOUR), "end": iso(T0 + HOUR + 60_000)},
        headers=headers,
    )
    assert ok.status_code == 201
    clash = await client.post(
        "/reservations",
        json={"project_id": "P", "start": iso(T0 + HOUR), "end": iso(T0 + HOUR + 30_000)},
        headers=headers,
    )
    assert clash.status_code == 409
    assert clash.json()["error"] == "Overlap"
    outside = await client.post(
        "/reservations",
        json={"project_id": "P", "start": iso(T0 - HOUR), "end": iso(T0)},
        headers=headers,
    )
    assert outside.status_code == 409
    assert outside.json()["error"] == "OutsideSlot"
    broke = await client.post(
        "/reservations",
        json={"project_id": "P", "start": iso(T0 + 2 * HOUR), "end": iso(T0 + 2 * HOUR + 700_001)},
        headers=headers,
    )
    assert broke.status_code == 409
    assert broke.json()["error"] == "InsufficientBudget"
