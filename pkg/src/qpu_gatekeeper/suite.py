"""Assemble the full service stack in one process.

Services talk to each other over in-process ASGI transports, which is
both the test harness and the single-node deployment mode; the demo CLI
binds the same apps to real ports instead.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from qpu_gatekeeper.accounting.app import build_app as build_accounting_app
from qpu_gatekeeper.accounting.db import Database
from qpu_gatekeeper.accounting.service import AccountingService, Caller
from qpu_gatekeeper.artifacts import ArtifactStore, FilesystemStore
from qpu_gatekeeper.authn.app import UserRegistry, build_app as build_authn_app
from qpu_gatekeeper.authn.tokens import TokenIssuer, TokenValidator
from qpu_gatekeeper.counter_service import build_app as build_counter_app
from qpu_gatekeeper.gateway.active_jobs import ActiveJobStore
from qpu_gatekeeper.gateway.app import GatewayCore, build_app as build_gateway_app
from qpu_gatekeeper.gateway.background import BackgroundRunner
from qpu_gatekeeper.inproc import InProcessClient
from qpu_gatekeeper.ledger import DEFAULT_S_MAX, CounterStore, InProcessCounterStore, ShotLedger
from qpu_gatekeeper.mockdevice.app import build_app as build_device_app
from qpu_gatekeeper.mockdevice.engine import DeviceConfig, MockDeviceEngine
from qpu_gatekeeper.mockdevice.plugin import MockVendorPlugin
from qpu_gatekeeper.plugins.reference_site import ReferenceSitePlugin
from qpu_gatekeeper.reporter import JobReporter
from qpu_gatekeeper.timeutil import Clock, now_ms


@dataclass
class SuiteConfig:
    signing_key: bytes = b"dev-signing-key"
    device_service_token: str = "device-service-token"
    backend_service_token: str = "backend-service-token"
    s_max: int = DEFAULT_S_MAX
    t_shot_ms: float = 0.12
    gateway_public_url: str = "http://gateway.local"
    max_body_bytes: int = 16 * 1024 * 1024
    device: DeviceConfig = field(default_factory=DeviceConfig)
    store_root: str | Path | None = None
    active_jobs_db: str = ":memory:"
    accounting_db: str = ":memory:"
    journal_path: str | Path | None = None


def _asgi_client(app, base_url: str) -> httpx.AsyncClient:
    return httpx.AsyncClient(transport=httpx.ASGITransport(app=app), base_url=base_url)


class Suite:
    """The wired stack: mock device, accounting, authn, store, gateway, reporter."""

    def __init__(self, config: SuiteConfig | None = None, clock: Clock = now_ms):
        self.config = config or SuiteConfig()
        self.clock = clock

        # mock device
        self.device_engine = MockDeviceEngine(self.config.device, clock=clock)
        self.device_app = build_device_app(self.device_engine)

        # artifact store (+ its HTTP face, reachable via the gateway's /store prefix)
        root = self.config.store_root or tempfile.mkdtemp(prefix="qgk-store-")
        store_base = f"{self.config.gateway_public_url}/store"
        self.store: ArtifactStore = FilesystemStore(root, base_url=store_base)
        from qpu_gatekeeper.store_service import build_app as build_store_app

        self.store_app = build_store_app(self.store)

        # accounting backend
        self.validator = TokenValidator(self.config.signing_key, clock=clock)
        self.accounting = AccountingService(Database(self.config.accounting_db), clock=clock)
        self.accounting_app = build_accounting_app(
            self.accounting, self.validator, self.config.backend_service_token
        )

        # authn stub
        self.issuer = TokenIssuer(self.config.signing_key, clock=clock)
        self.registry = UserRegistry()
        self.authn_app = build_authn_app(self.issuer, self.registry)

        # fairness ledger
        self.counter_store: CounterStore = InProcessCounterStore()
        self.ledger = ShotLedger(self.counter_store, s_max=self.config.s_max)

        # plugins; sibling hops stay in-process in this wiring
        self.vendor = MockVendorPlugin(
            base_url="http://device.local",
            service_token=self.config.device_service_token,
            client=InProcessClient(self.device_app, "http://device.local"),
        )
        self.site = ReferenceSitePlugin(
            backend_url="http://accounting.local",
            service_token=self.config.backend_service_token,
            t_shot_ms=self.config.t_shot_ms,
            store_base_url=store_base,
            client=InProcessClient(self.accounting_app, "http://accounting.local"),
        )

        # gateway
        self.active_jobs = ActiveJobStore(self.config.active_jobs_db)
        self.runner = BackgroundRunner(journal_path=self.config.journal_path, base_delay_ms=5)
        self.core = GatewayCore(
            vendor=self.vendor,
            site=self.site,
            validator=self.validator,
            ledger=self.ledger,
            active_jobs=self.active_jobs,
            store=self.store,
            service_token=self.config.device_service_token,
            device_client=InProcessClient(self.device_app, "http://device.local"),
            accounting_client=InProcessClient(self.accounting_app, "http://accounting.local"),
            authn_client=InProcessClient(self.authn_app, "http://authn.local"),
            store_client=InProcessClient(self.store_app, "http://store.local"),
            runner=self.runner,
            clock=clock,
            max_body_bytes=self.config.max_body_bytes,
        )
        self.gateway_app = build_gateway_app(self.core)

        # reporter shares the plugin pair and stores
        self.reporter = JobReporter(
            vendor=self.vendor,
            site=self.site,
            ledger=self.ledger,
            store=self.store,
            active_jobs=self.active_jobs,
            clock=clock,
        )

        self.service_caller = Caller(
            user_id="@service", roles=frozenset({"admin"}), is_service=True
        )

    # -- conveniences -------------------------------------------------------

    def gateway_client(self) -> httpx.AsyncClient:
        return _asgi_client(self.gateway_app, self.config.gateway_public_url)

    def device_client(self) -> httpx.AsyncClient:
        return _asgi_client(self.device_app, "http://device.local")

    def accounting_client(self) -> httpx.AsyncClient:
        return _asgi_client(self.accounting_app, "http://accounting.local")

    def token_for(self, user_id: str, username: str, roles: frozenset[str]) -> str:
        return self.issuer.issue(user_id, username, roles)["access_token"]

    async def drain_background(self) -> None:
        await self.runner.drain()

    def add_user(
        self,
        username: str,
        role: str,
        org_ids: list[str],
        password: str = "pw",
        projects: list[tuple[str, bool]] | None = None,
        default_project_id: str | None = None,
        user_id: str | None = None,
    ) -> dict:
        """Create the user in accounting, join projects, register credentials.

        ``projects`` is a list of (project_id, is_admin) memberships; the
        default project must be one of them.
        """
        user = self.accounting.create_user(
            self.service_caller,
            username=username,
            role=role,
            org_ids=org_ids,
            user_id=user_id,
        )
        for project_id, is_admin in projects or []:
            self.accounting.add_member(
                self.service_caller, project_id, user["user_id"], is_admin
            )
        if default_project_id is not None:
            user = self.accounting.update_user(
                self.service_caller, user["user_id"], default_project_id=default_project_id
            )
        self.registry.upsert(user["user_id"], username, frozenset({role}), password)
        return user
