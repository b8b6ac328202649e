"""Environment-driven configuration.

Configuration keys (all optional, defaults in parentheses):

    VENDOR_PLUGIN        vendor plugin name ("mock")
    SITE_PLUGIN          site plugin name ("reference-site")
    VENDOR_BASE_URL      upstream device URL
    SITE_BACKEND_URL     accounting backend URL
    LISTEN_ADDR          gateway bind address ("127.0.0.1:9000")
    SERVICE_TOKEN        credential the gateway presents to the device
    BACKEND_SERVICE_TOKEN  shared secret for /jobAuthoriser and /jobReporter
    AUTH_SIGNING_KEY     symmetric token-signing key
    FAIRNESS_SMAX        outstanding-shot cap per user (2,500,000)
    T_SHOT_MS            per-shot duration used for cost estimates (0.12)
    MAX_BODY_BYTES       request size limit (16 MiB)
    STORE_BACKEND        "fs" or "bucket"
    STORE_ROOT           filesystem store root
    STORE_ENDPOINT       bucket service endpoint
    STORE_BASE_URL       public base for artifact URLs
    ACTIVE_JOBS_DB       sqlite path for the active-jobs table
    ACCOUNTING_DB        sqlite path for the accounting backend
    REPORTER_INTERVAL_MS reporter poll interval (1000)
    JOURNAL_PATH         dead-letter journal file
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from qpu_gatekeeper.ledger import DEFAULT_S_MAX


@dataclass(frozen=True)
class GatewaySettings:
    vendor_plugin: str = "mock"
    site_plugin: str = "reference-site"
    vendor_base_url: str = "http://127.0.0.1:9100"
    site_backend_url: str = "http://127.0.0.1:9200"
    listen_addr: str = "127.0.0.1:9000"
    service_token: str = "device-service-token"
    backend_service_token: str = "backend-service-token"
    auth_signing_key: bytes = b"dev-signing-key"
    fairness_smax: int = DEFAULT_S_MAX
    t_shot_ms: float = 0.12
    max_body_bytes: int = 16 * 1024 * 1024
    store_backend: str = "fs"
    store_root: str = "./artifact-store"
    store_endpoint: str = ""
    store_base_url: str = ""
    active_jobs_db: str = ":memory:"
    accounting_db: str = ":memory:"
    reporter_interval_ms: int = 1000
    journal_path: str = "./gateway-journal.jsonl"

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "GatewaySettings":
        env = dict(os.environ) if env is None else env
        defaults = cls()

        def get(key: str, fallback):
            raw = env.get(key)
            if raw is None:
                return fallback
            if isinstance(fallback, bool):
                return raw.lower() in ("1", "true", "yes")
            if isinstance(fallback, int):
                return int(raw)
            if isinstance(fallback, float):
                return float(raw)
            if isinstance(fallback, bytes):
                return raw.encode()
            return raw

        return cls(
            vendor_plugin=get("VENDOR_PLUGIN", defaults.vendor_plugin),
            site_plugin=get("SITE_PLUGIN", defaults.site_plugin),
            vendor_base_url=get("VENDOR_BASE_URL", defaults.vendor_base_url),
            site_backend_url=get("SITE_BACKEND_URL", defaults.site_backend_url),
            listen_addr=get("LISTEN_ADDR", defaults.listen_addr),
            service_token=get("SERVICE_TOKEN", defaults.service_token),
            backend_service_token=get("BACKEND_SERVICE_TOKEN", defaults.backend_service_token),
            auth_signing_key=get("AUTH_SIGNING_KEY", defaults.auth_signing_key),
            fairness_smax=get("FAIRNESS_SMAX", defaults.fairness_smax),
            t_shot_ms=get("T_SHOT_MS", defaults.t_shot_ms),
            max_body_bytes=get("MAX_BODY_BYTES", defaults.max_body_bytes),
            store_backend=get("STORE_BACKEND", defaults.store_backend),
            store_root=get("STORE_ROOT", defaults.store_root),
            store_endpoint=get("STORE_ENDPOINT", defaults.store_endpoint),
            store_base_url=get("STORE_BASE_URL", defaults.store_base_url),
            active_jobs_db=get("ACTIVE_JOBS_DB", defaults.active_jobs_db),
            accounting_db=get("ACCOUNTING_DB", defaults.accounting_db),
            reporter_interval_ms=get("REPORTER_INTERVAL_MS", defaults.reporter_interval_ms),
            journal_path=get("JOURNAL_PATH", defaults.journal_path),
        )
