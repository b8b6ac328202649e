from __future__ import annotations

import pytest

from qpu_gatekeeper.suite import Suite, SuiteConfig


@pytest.fixture
def anyio_backend():
    return "asyncio"


class LogicalClock:
    """Deterministic millisecond clock tests can steer."""

    def __init__(self, start_ms: int = 1_700_000_000_000):
        self.now = start_ms

    def __call__(self) -> int:
        return self.now

    def advance(self, ms: int) -> int:
        self.now += ms
        return self.now


@pytest.fixture
def clock():
    return LogicalClock()


@pytest.fixture
def suite(tmp_path, clock):
    """Full in-process stack with a logical clock and tmp artifact root."""
    config = SuiteConfig(
        store_root=tmp_path / "store",
        journal_path=tmp_path / "journal.jsonl",
    )
    return Suite(config, clock=clock)


def seed_minimal(suite: Suite, budget_ms: int = 1_000_000_000) -> dict:
    """One org, one project, one member user with that default project."""
    svc = suite.service_caller
    org = suite.accounting.create_org(svc, "org-one", budget_ms * 2, org_id="org1")
    project = suite.accounting.create_project(
        svc, "org1", "project-one", budget_ms, project_id="proj1"
    )
    user = suite.add_user(
        "alice",
        "regular",
        ["org1"],
        password="alice-pw",
        projects=[("proj1", False)],
        default_project_id="proj1",
        user_id="u-alice",
    )
    token = suite.token_for(user["user_id"], "alice", frozenset({"regular"}))
    return {"org": org, "project": project, "user": user, "token": token}
