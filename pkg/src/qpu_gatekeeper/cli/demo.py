"""Run the whole suite on localhost ports with seeded sample data.

Starts the mock device, accounting backend, authn stub, artifact store,
and the gateway in one process; the reporter and the device queue tick in
the background. Intended for demos and manual poking; tests wire the same
apps in-process instead.
"""

from __future__ import annotations

import asyncio
import logging
import os
from pathlib import Path

import click
import httpx
import uvicorn

from qpu_gatekeeper.accounting.app import build_app as build_accounting_app
from qpu_gatekeeper.accounting.db import Database
from qpu_gatekeeper.accounting.service import AccountingService, Caller
from qpu_gatekeeper.artifacts import FilesystemStore
from qpu_gatekeeper.authn.app import UserRegistry, build_app as build_authn_app
from qpu_gatekeeper.authn.tokens import TokenIssuer, TokenValidator
from qpu_gatekeeper.config import GatewaySettings
from qpu_gatekeeper.gateway.active_jobs import ActiveJobStore
from qpu_gatekeeper.gateway.app import GatewayCore, build_app as build_gateway_app
from qpu_gatekeeper.gateway.background import BackgroundRunner
from qpu_gatekeeper.ledger import InProcessCounterStore, ShotLedger, cap_matches_nominal_qpu_time
from qpu_gatekeeper.mockdevice.app import build_app as build_device_app
from qpu_gatekeeper.mockdevice.engine import DeviceConfig, MockDeviceEngine
from qpu_gatekeeper.plugins.records import PluginConfig
from qpu_gatekeeper.plugins.registry import default_registry
from qpu_gatekeeper.reporter import JobReporter
from qpu_gatekeeper.store_service import build_app as build_store_app

log = logging.getLogger("qpu_gatekeeper.demo")


def seed_demo_data(accounting: AccountingService, registry: UserRegistry) -> None:
    svc = Caller(user_id="@service", roles=frozenset({"admin"}), is_service=True)
    accounting.create_org(svc, "research-lab", 400 * 3_600_000, org_id="org-lab")
    accounting.create_org(svc, "university", 400 * 3_600_000, org_id="org-uni")
    accounting.create_project(svc, "org-lab", "sensing", 40 * 3_600_000, project_id="prj-sensing")
    accounting.create_project(svc, "org-uni", "qc-course", 40 * 3_600_000, project_id="prj-course")

    def user(username, role, orgs, projects, default=None, password="demo"):
        u = accounting.create_user(svc, username, role, orgs, user_id=f"u-{username}")
        for project_id, is_admin in projects:
            accounting.add_member(svc, project_id, u["user_id"], is_admin)
        if default:
            accounting.update_user(svc, u["user_id"], default_project_id=default)
        registry.upsert(u["user_id"], username, frozenset({role}), password)

    user("root", "admin", ["org-lab"], [], password="root")
    user("manager", "org_manager", ["org-uni"], [])
    user("prof", "pi", ["org-uni"], [("prj-course", True)], default="prj-course")
    user("student", "regular", ["org-uni"], [("prj-course", False)], default="prj-course")
    user("researcher", "regular", ["org-lab"], [("prj-sensing", False)], default="prj-sensing")


def build_dashboard_app(dashboard_dir: Path, gateway_url: str):
    """Static dashboard with a config blob pointing at the gateway."""
    from fastapi import FastAPI
    from fastapi.responses import JSONResponse
    from fastapi.staticfiles import StaticFiles

    app = FastAPI(docs_url=None, redoc_url=None)

    @app.get("/config.json")
    async def config_blob():
        return JSONResponse(
            {"apiBaseUrl": f"{gateway_url}/api", "authUrl": f"{gateway_url}/auth"}
        )

    app.mount("/", StaticFiles(directory=dashboard_dir, html=True), name="static")
    return app


async def serve_all(settings: GatewaySettings, base_port: int, dashboard_dir: Path | None) -> None:
    host = settings.listen_addr.rsplit(":", 1)[0] or "127.0.0.1"
    gateway_port = int(settings.listen_addr.rsplit(":", 1)[1])
    ports = {
        "device": base_port + 100,
        "accounting": base_port + 200,
        "authn": base_port + 300,
        "store": base_port + 400,
    }
    urls = {name: f"http://{host}:{port}" for name, port in ports.items()}
    gateway_url = f"http://{host}:{gateway_port}"

    device_engine = MockDeviceEngine(DeviceConfig(auto_advance_interval_ms=500))
    device_app = build_device_app(device_engine)

    store_base = settings.store_base_url or f"{gateway_url}/store"
    store = FilesystemStore(settings.store_root, base_url=store_base)
    store_app = build_store_app(store)

    validator = TokenValidator(settings.auth_signing_key)
    accounting = AccountingService(Database(settings.accounting_db))
    accounting_app = build_accounting_app(accounting, validator, settings.backend_service_token)

    issuer = TokenIssuer(settings.auth_signing_key)
    registry = UserRegistry()
    authn_app = build_authn_app(issuer, registry)
    seed_demo_data(accounting, registry)

    plugin_config = PluginConfig(
        vendor_plugin_name=settings.vendor_plugin,
        site_plugin_name=settings.site_plugin,
        vendor_base_url=urls["device"],
        site_backend_url=urls["accounting"],
    )
    os.environ.setdefault("BACKEND_SERVICE_TOKEN", settings.backend_service_token)
    os.environ.setdefault("T_SHOT_MS", str(settings.t_shot_ms))
    os.environ.setdefault("STORE_BASE_URL", store_base)
    os.environ.setdefault("SERVICE_TOKEN", settings.service_token)
    vendor, site = default_registry().load(plugin_config)

    cap_matches_nominal_qpu_time(settings.fairness_smax, settings.t_shot_ms)
    ledger = ShotLedger(InProcessCounterStore(), s_max=settings.fairness_smax)
    active_jobs = ActiveJobStore(settings.active_jobs_db)
    runner = BackgroundRunner(journal_path=settings.journal_path)
    core = GatewayCore(
        vendor=vendor,
        site=site,
        validator=validator,
        ledger=ledger,
        active_jobs=active_jobs,
        store=store,
        service_token=settings.service_token,
        device_client=httpx.AsyncClient(base_url=urls["device"], timeout=30.0),
        accounting_client=httpx.AsyncClient(base_url=urls["accounting"], timeout=30.0),
        authn_client=httpx.AsyncClient(base_url=urls["authn"], timeout=30.0),
        store_client=httpx.AsyncClient(base_url=urls["store"], timeout=30.0),
        runner=runner,
        max_body_bytes=settings.max_body_bytes,
    )
    gateway_app = build_gateway_app(core)
    reporter = JobReporter(vendor, site, ledger, store, active_jobs)

    apps = [
        (device_app, ports["device"]),
        (accounting_app, ports["accounting"]),
        (authn_app, ports["authn"]),
        (store_app, ports["store"]),
        (gateway_app, gateway_port),
    ]
    if dashboard_dir is not None and (dashboard_dir / "index.html").is_file():
        dashboard_port = base_port + 500
        apps.append((build_dashboard_app(dashboard_dir, gateway_url), dashboard_port))
        urls["dashboard"] = f"http://{host}:{dashboard_port}"
    from qpu_gatekeeper.reporter import build_health_app

    apps.append((build_health_app(reporter), base_port + 600))
    urls["reporter"] = f"http://{host}:{base_port + 600}"
    servers = []
    for app, port in apps:
        config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        servers.append(uvicorn.Server(config))

    click.echo("qpu-gatekeeper demo stack")
    click.echo(f"  gateway     {gateway_url}        (the only URL clients need)")
    for name, url in urls.items():
        click.echo(f"  {name:<11} {url}")
    click.echo("")
    click.echo("demo accounts (password 'demo' unless noted):")
    click.echo("  root (admin, password 'root'), manager, prof (PI), student, metrologist")
    click.echo("")
    click.echo("try:")
    click.echo(f"  qgk-login --server-url {gateway_url} --username student --password demo")
    click.echo(
        "  curl -s -X POST -H \"Authorization: Bearer $TOKEN\" -H 'Content-Type: application/json'"
        f" \\\n       -d '{{\"circuits\": [\"c0\"], \"shots\": 1000}}' {gateway_url}/jobs/circuit/circuit"
    )
    click.echo("")

    tasks = [asyncio.create_task(s.serve()) for s in servers]
    tasks.append(asyncio.create_task(reporter.run_forever(settings.reporter_interval_ms)))
    await asyncio.gather(*tasks)


@click.command()
@click.option("--base-port", default=9000, show_default=True)
@click.option(
    "--dashboard-dir",
    type=click.Path(path_type=Path, file_okay=False),
    default=Path("frontend"),
    show_default=True,
    help="Static dashboard assets; skipped when absent.",
)
def main(base_port: int, dashboard_dir: Path):
    """Launch the full demo stack on localhost."""
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    env = dict(os.environ)
    env.setdefault("LISTEN_ADDR", f"127.0.0.1:{base_port}")
    settings = GatewaySettings.from_env(env)
    try:
        asyncio.run(serve_all(settings, base_port, dashboard_dir))
    except KeyboardInterrupt:
        click.echo("bye")


if __name__ == "__main__":
    main()
