#!/usr/bin/env python3
"""Generate the dashboard test fixture from a live in-process stack.

Runs the full suite (gateway, accounting, mock device, reporter) with a
fixed logical clock and seed, drives a small workload through it, and
captures the wire-format payloads the dashboard consumes. The frontend
tests and the Python fixture test both assert against this one file, so
the numbers the dashboard shows are provably the backend's numbers.

Usage: python3 scripts/generate_dashboard_fixture.py [output.json]
"""

from __future__ import annotations

import asyncio
import json
import sys
import tempfile
from pathlib import Path

from qpu_gatekeeper.accounting.app import _job_out, _reservation_out, _slot_out
from qpu_gatekeeper.accounting.service import Caller
from qpu_gatekeeper.artifacts import ArtifactKey, ArtifactKind
from qpu_gatekeeper.mockdevice.engine import DeviceConfig
from qpu_gatekeeper.suite import Suite, SuiteConfig

T0 = 1_760_000_000_000  # fixed fixture epoch
HOUR = 3_600_000
DAY = 24 * HOUR


class FixtureClock:
    def __init__(self):
        self.now = T0

    def __call__(self):
        return self.now


def submission(num_circuits: int, shots: int) -> dict:
    return {
        "circuits": [{"name": f"c{i}", "ops": ["h 0", "measure"]} for i in range(num_circuits)],
        "shots": shots,
    }


async def build(out_path: Path) -> dict:
    clock = FixtureClock()
    suite = Suite(
        SuiteConfig(
            store_root=tempfile.mkdtemp(prefix="fixture-store-"),
            device=DeviceConfig(rng_seed=11, queue_service_rate=10),
        ),
        clock=clock,
    )
    svc = suite.service_caller

    # two orgs with alternating daily slots across one week
    suite.accounting.create_org(svc, "research-lab", 2000 * HOUR, org_id="org-lab")
    suite.accounting.create_org(svc, "university", 2000 * HOUR, org_id="org-uni")
    week_start = T0 - (T0 % DAY) + DAY
    for day in range(7):
        org = "org-lab" if day % 2 == 0 else "org-uni"
        suite.accounting.create_slot(
            svc,
            org,
            week_start + day * DAY + 8 * HOUR,
            week_start + day * DAY + 18 * HOUR,
            slot_id=f"slot-d{day}",
        )
    suite.accounting.create_project(
        svc, "org-uni", "qc-course", 2 * HOUR, project_id="prj-course"
    )
    suite.accounting.create_project(
        svc, "org-uni", "spent-out", 1000, project_id="prj-exhausted"
    )
    suite.add_user(
        "prof", "pi", ["org-uni"],
        projects=[("prj-course", True), ("prj-exhausted", True)],
        default_project_id="prj-course", user_id="u-prof",
    )
    suite.add_user(
        "student", "regular", ["org-uni"],
        projects=[("prj-course", False)],
        default_project_id="prj-course", user_id="u-student",
    )

    # drain the exhausted project to exactly zero remaining
    suite.accounting.report_job(
        "J-drain", "submitted", "pending", "u-prof", "prj-exhausted", 1, 1, True
    )
    suite.accounting.report_job(
        "J-drain", "completed", "ready", "u-prof", "prj-exhausted", 1, 1, True, qpu_time_ms=1000
    )

    # two reservations inside the university org slots (day 1 and day 3)
    pi = Caller("u-prof", frozenset({"pi"}))
    for day in (1, 3):
        suite.accounting.create_reservation(
            pi,
            "prj-course",
            week_start + day * DAY + 9 * HOUR,
            week_start + day * DAY + 9 * HOUR + 30 * 60_000,
        )

    # a few jobs through the full pipeline; one stays pending
    gw = suite.gateway_client()
    student = suite.token_for("u-student", "student", frozenset({"regular"}))
    prof = suite.token_for("u-prof", "prof", frozenset({"pi"}))
    plan = [(2, 75, student), (1, 1000, student), (3, 200, prof)]
    job_ids = []

    async def post_job(circuits: int, shots: int, token: str) -> str:
        resp = await gw.post(
            "/jobs/circuit/circuit",
            json=submission(circuits, shots),
            headers={"Authorization": f"Bearer {token}"},
        )
        assert resp.status_code == 200, resp.text
        clock.now += 60_000
        return resp.json()["id"]

    for circuits, shots, token in plan:
        job_ids.append(await post_job(circuits, shots, token))
    await suite.drain_background()
    suite.device_engine.advance(2)  # completes all three
    await suite.reporter.run_cycle()
    # one job stays pending for the spinner state
    job_ids.append(await post_job(1, 400, student))
    await suite.drain_background()
    pending = [r.job_id for r in suite.active_jobs.list_all()]
    assert pending, "fixture needs one pending job"

    jobs = [
        _job_out(j)
        for j in suite.accounting.list_jobs(svc, project_id="prj-course", limit=100)
    ]
    report = suite.accounting.billing_report(svc, "project", "prj-course", 0, T0 + 365 * DAY)
    results_artifact = json.loads(
        suite.store.get(ArtifactKey(job_ids[0], ArtifactKind.RESULTS))
    )

    fixture = {
        "config": {"apiBaseUrl": "/api", "authUrl": "/auth"},
        "project": suite.accounting.get_project(svc, "prj-course"),
        "zero_budget_project": suite.accounting.get_project(svc, "prj-exhausted"),
        "slots": [_slot_out(s) for s in suite.accounting.list_slots(svc)],
        "reservations": [_reservation_out(r) for r in suite.accounting.list_reservations(svc)],
        "jobs": jobs,
        "report": report,
        "results_job_id": job_ids[0],
        "results_artifact": results_artifact,
        "calendar_range": {
            "start": week_start,
            "end": week_start + 7 * DAY,
        },
    }
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(fixture, indent=1, sort_keys=True) + "\n")
    return fixture


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures" / "world.json"
    )
    fixture = asyncio.run(build(out))
    print(f"wrote {out} ({len(fixture['jobs'])} jobs, {len(fixture['slots'])} slots)")


if __name__ == "__main__":
    main()
