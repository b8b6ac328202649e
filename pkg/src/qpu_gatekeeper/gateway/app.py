"""The transparent reverse proxy.

One catch-all handler classifies each request against the route table
(vendor-supplied device routes plus the suite's /auth, /api, /store
prefixes), authenticates bearer tokens, enforces role-based route
control, and either runs the submission pipeline or forwards the request
unchanged.

Submission pipeline, in order: parse, authorize (fail-closed), fairness
acquire (fail-open on store outage), forward with the service credential,
record the active job, answer the client with the upstream response
verbatim, then asynchronously archive the circuit + calibration snapshot
and report the submission to the backend. An upstream failure rolls the
fairness counter back before answering.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field, replace

import httpx
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from qpu_gatekeeper.artifacts import ArtifactKey, ArtifactKind, ArtifactStore
from qpu_gatekeeper.authn.tokens import TokenClaims, TokenError, TokenValidator
from qpu_gatekeeper.gateway.active_jobs import ActiveJobRow, ActiveJobStore
from qpu_gatekeeper.gateway.background import BackgroundRunner
from qpu_gatekeeper.inproc import InProcessClient
from qpu_gatekeeper.ledger import AcquireOutcome, CounterStoreUnavailable, ShotLedger
from qpu_gatekeeper.plugins.base import (
    BackendUnavailable,
    MalformedPayload,
    MalformedResponse,
    SitePlugin,
    VendorPlugin,
)
from qpu_gatekeeper.routing import (
    NoMatch,
    RouteKind,
    RouteRule,
    RouteTable,
    RouteTarget,
)
from qpu_gatekeeper.timeutil import Clock, now_ms

log = logging.getLogger("qpu_gatekeeper.gateway")

DEFAULT_MAX_BODY_BYTES = 16 * 1024 * 1024

# stripped from proxied responses; everything else passes through untouched
_HOP_BY_HOP = {
    "connection",
    "keep-alive",
    "proxy-authenticate",
    "proxy-authorization",
    "te",
    "trailer",
    "trailers",
    "transfer-encoding",
    "upgrade",
    "content-length",  # recomputed from the relayed body
}

# not forwarded upstream; authorization is handled per-target
_CLIENT_HEADERS_DROPPED = {"host", "content-length", "authorization", "accept-encoding"}

_METHODS = ["GET", "POST", "PUT", "PATCH", "DELETE", "HEAD", "OPTIONS"]

# upstream clients are httpx.AsyncClient in multi-process deployments and
# InProcessClient when the whole suite shares one process
UpstreamClient = httpx.AsyncClient | InProcessClient


def suite_routes() -> list[RouteRule]:
    """Path-prefix routing for the sibling services behind the one listener."""
    rules = [
        # token grant and refresh must work without a token
        RouteRule("POST", "/auth/{rest...}", RouteKind.PASSTHROUGH, None, RouteTarget.AUTHN),
        RouteRule("GET", "/auth/{rest...}", RouteKind.PASSTHROUGH, None, RouteTarget.AUTHN),
        # artifact reads are public by design (result URLs are shareable)
        RouteRule("GET", "/store/{rest...}", RouteKind.PASSTHROUGH, None, RouteTarget.STORE),
        RouteRule("GET", "/metrics", RouteKind.PASSTHROUGH, None, RouteTarget.LOCAL),
        # CORS preflight for browser clients; carries no credentials
        RouteRule("OPTIONS", "/auth/{rest...}", RouteKind.PASSTHROUGH, None, RouteTarget.AUTHN),
        RouteRule(
            "OPTIONS", "/api/{rest...}", RouteKind.PASSTHROUGH, None, RouteTarget.ACCOUNTING
        ),
    ]
    for method in ("GET", "POST", "PATCH", "PUT", "DELETE"):
        rules.append(
            RouteRule(
                method,
                "/api/{rest...}",
                RouteKind.PASSTHROUGH,
                frozenset(),
                RouteTarget.ACCOUNTING,
            )
        )
    return rules


@dataclass
class Metrics:
    counters: dict[str, int] = field(default_factory=dict)

    def bump(self, name: str, by: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + by

    def snapshot(self) -> dict[str, int]:
        return dict(self.counters)


class GatewayCore:
    """Everything the proxy handler needs; exposed as app.state.core."""

    def __init__(
        self,
        vendor: VendorPlugin,
        site: SitePlugin,
        validator: TokenValidator,
        ledger: ShotLedger,
        active_jobs: ActiveJobStore,
        store: ArtifactStore,
        service_token: str,
        device_client: UpstreamClient,
        accounting_client: UpstreamClient | None = None,
        authn_client: UpstreamClient | None = None,
        store_client: UpstreamClient | None = None,
        runner: BackgroundRunner | None = None,
        clock: Clock = now_ms,
        max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
    ):
        self.vendor = vendor
        self.site = site
        self.validator = validator
        self.ledger = ledger
        self.active_jobs = active_jobs
        self.store = store
        self.service_token = service_token
        self.clock = clock
        self.max_body_bytes = max_body_bytes
        self.runner = runner or BackgroundRunner()
        self.metrics = Metrics()
        self.table = RouteTable(vendor.routes() + suite_routes())
        self._clients = {
            RouteTarget.DEVICE: device_client,
            RouteTarget.ACCOUNTING: accounting_client,
            RouteTarget.AUTHN: authn_client,
            RouteTarget.STORE: store_client,
        }
        self._token_cache: dict[str, tuple[TokenClaims, int]] = {}

    # -- authentication ----------------------------------------------------

    def authenticate(self, authorization: str | None) -> TokenClaims:
        if not authorization or not authorization.lower().startswith("bearer "):
            raise TokenError("missing bearer token")
        token = authorization[7:].strip()
        cached = self._token_cache.get(token)
        now = self.clock()
        if cached is not None and now < cached[1]:
            return cached[0]
        claims = self.validator.validate(token)
        if len(self._token_cache) > 20_000:
            self._token_cache.clear()
        self._token_cache[token] = (claims, claims.expiry)
        return claims

    def client_for(self, target: RouteTarget) -> UpstreamClient:
        client = self._clients.get(target)
        if client is None:
            raise RuntimeError(f"no upstream client configured for {target.value}")
        return client

    # -- background work ---------------------------------------------------

    def schedule_post_submission(self, row: ActiveJobRow) -> None:
        self.runner.spawn(f"post-submission-{row.job_id}", lambda: self._post_submission(row))

    async def _post_submission(self, row: ActiveJobRow) -> None:
        """Archive circuit + calibration snapshot, then report the submission.

        Every step is idempotent, so a retry after a partial failure is
        safe; if all attempts fail, the reporter's completion path can
        still recreate the backend record and the archives.
        """
        await self._archive(row)
        await self._report_submitted(row)

    async def _archive(self, row: ActiveJobRow) -> None:
        calibration = await self.vendor.fetch_calibration()
        self.active_jobs.set_calibration(row.job_id, calibration.raw)
        # store puts fsync; keep that off the event loop
        await asyncio.to_thread(self._put_submission_artifacts, row, calibration.raw)

    def _put_submission_artifacts(self, row: ActiveJobRow, calibration: bytes) -> None:
        self.store.put(ArtifactKey(row.job_id, ArtifactKind.CIRCUIT), row.circuit_payload)
        self.store.put(ArtifactKey(row.job_id, ArtifactKind.CALIBRATION), calibration)

    async def _report_submitted(self, row: ActiveJobRow) -> None:
        await self.site.report_job(
            job_id=row.job_id,
            phase="submitted",
            status="pending",
            user_id=row.user_id,
            project_id=row.project_id,
            num_circuits=row.num_circuits,
            shots=row.shots,
            charge_budget=row.charge_budget,
            submitted_at=row.submitted_at,
        )

    def rollback_quota(self, user_id: str, shot_units: int) -> None:
        try:
            self.ledger.rollback(user_id, shot_units)
        except CounterStoreUnavailable:
            log.warning("counter store down during rollback; retrying in background")
            self.runner.spawn(
                f"rollback-{user_id}-{shot_units}",
                lambda: _async_rollback(self.ledger, user_id, shot_units),
            )


async def _async_rollback(ledger: ShotLedger, user_id: str, shot_units: int) -> None:
    ledger.rollback(user_id, shot_units)


def _deny(status: int, error: str, detail: str = "", **extra) -> JSONResponse:
    body = {"error": error, "detail": detail}
    body.update(extra)
    return JSONResponse(body, status_code=status)


def _forward_headers(request_headers, target: RouteTarget) -> dict[str, str]:
    headers = {
        k: v for k, v in request_headers.items() if k.lower() not in _CLIENT_HEADERS_DROPPED
    }
    if target is not RouteTarget.DEVICE:
        auth = request_headers.get("authorization")
        if auth:
            headers["authorization"] = auth
    headers["accept-encoding"] = "identity"
    return headers


def _relay(resp) -> Response:
    headers = {k: v for k, v in resp.headers.items() if k.lower() not in _HOP_BY_HOP}
    return Response(content=resp.content, status_code=resp.status_code, headers=headers)


def build_app(core: GatewayCore) -> FastAPI:
    app = FastAPI(title="qc-gateway", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.core = core
    metrics = core.metrics

    @app.api_route("/{path:path}", methods=_METHODS)
    async def handle_request(request: Request, path: str):
        metrics.bump("requests_total")
        try:
            match = core.table.classify(request.method, request.url.path)
        except NoMatch:
            metrics.bump("unrouted_total")
            return _deny(404, "no_route", f"{request.method} {request.url.path}")
        rule = match.rule

        claims: TokenClaims | None = None
        if rule.required_roles is not None:
            try:
                claims = core.authenticate(request.headers.get("authorization"))
            except TokenError as exc:
                metrics.bump("unauthenticated_total")
                return _deny(401, "unauthenticated", str(exc))
            if rule.required_roles and not (claims.roles & rule.required_roles):
                metrics.bump("forbidden_total")
                return _deny(403, "forbidden", "role does not permit this route")

        if rule.kind is RouteKind.BLOCKED:
            metrics.bump("blocked_total")
            return _deny(403, "route_blocked", "this route is not served through the gateway")

        declared = request.headers.get("content-length")
        if declared and declared.isdigit() and int(declared) > core.max_body_bytes:
            return _deny(413, "request_too_large", f"body exceeds {core.max_body_bytes} bytes")
        body = await request.body()
        if len(body) > core.max_body_bytes:
            return _deny(413, "request_too_large", f"body exceeds {core.max_body_bytes} bytes")

        if rule.kind is RouteKind.SUBMISSION:
            return await submit_pipeline(request, match.params, claims, body)

        # passthrough
        if rule.target is RouteTarget.LOCAL:
            return JSONResponse(metrics.snapshot())
        metrics.bump("passthrough_total")
        forward_path = request.url.path
        if rule.target in (RouteTarget.ACCOUNTING, RouteTarget.STORE):
            # strip the suite prefix (/api, /store), keeping the rest verbatim
            prefix = "/" + rule.segments[0]
            forward_path = forward_path[len(prefix):] or "/"
        headers = _forward_headers(request.headers, rule.target)
        if rule.target is RouteTarget.DEVICE:
            headers.update(core.vendor.upstream_headers(core.service_token))
        try:
            resp = await core.client_for(rule.target).request(
                request.method,
                forward_path,
                params=request.url.query or None,
                content=body if body else None,
                headers=headers,
            )
        except (httpx.HTTPError, ConnectionError) as exc:
            metrics.bump("upstream_errors_total")
            return _deny(502, "upstream_unreachable", str(exc))
        return _relay(resp)

    async def submit_pipeline(
        request: Request, params: dict[str, str], claims: TokenClaims, body: bytes
    ) -> Response:
        metrics.bump("submissions_total")
        # 1. parse
        try:
            parsed = core.vendor.parse_submission(params, dict(request.headers), body)
        except MalformedPayload as exc:
            metrics.bump("malformed_total")
            return _deny(400, "malformed_payload", str(exc))
        submission = replace(
            parsed,
            user_id=claims.subject,
            user_roles=claims.roles,
            received_at=core.clock(),
        )

        # 2. authorize (fail-closed)
        try:
            verdict = await core.site.authorize_job(submission)
        except BackendUnavailable as exc:
            metrics.bump("backend_unavailable_total")
            return _deny(
                503, "backend_unavailable", f"authorization backend unreachable: {exc}"
            )
        if not verdict.allowed:
            metrics.bump(f"denied_{verdict.reason.value}")
            return _deny(403, verdict.reason.value, verdict.detail)

        # 3. fairness (fail-open on store outage)
        outcome = core.ledger.try_acquire(submission.user_id, submission.shot_units)
        if outcome is AcquireOutcome.OVER_LIMIT:
            metrics.bump("denied_fairness_limit")
            return _deny(
                429,
                "fairness_limit",
                f"outstanding shots would exceed {core.ledger.s_max}",
            )
        quota_acquired = outcome is AcquireOutcome.ACQUIRED
        if outcome is AcquireOutcome.STORE_UNAVAILABLE:
            metrics.bump("ledger_fail_open_total")
            log.warning(
                "counter store unavailable; admitting job for %s without quota accounting",
                submission.user_id,
            )

        # 4. forward with the service credential
        headers = _forward_headers(request.headers, RouteTarget.DEVICE)
        headers.update(core.vendor.upstream_headers(core.service_token))
        try:
            resp = await core.client_for(RouteTarget.DEVICE).request(
                request.method, request.url.path, content=body, headers=headers
            )
        except (httpx.HTTPError, ConnectionError) as exc:
            if quota_acquired:
                core.rollback_quota(submission.user_id, submission.shot_units)
            metrics.bump("upstream_errors_total")
            return _deny(502, "upstream_unreachable", str(exc))

        # 6. upstream failure: roll back, relay
        if not 200 <= resp.status_code < 300:
            if quota_acquired:
                core.rollback_quota(submission.user_id, submission.shot_units)
            metrics.bump("upstream_rejections_total")
            if resp.status_code >= 500:
                return _deny(
                    502,
                    "upstream_error",
                    "device rejected the submission",
                    upstream_status=resp.status_code,
                )
            return _relay(resp)

        try:
            result = core.vendor.parse_submission_response(resp.status_code, resp.content)
        except MalformedResponse as exc:
            if quota_acquired:
                core.rollback_quota(submission.user_id, submission.shot_units)
            metrics.bump("upstream_errors_total")
            return _deny(
                502,
                "upstream_error",
                f"unparseable upstream response: {exc}",
                upstream_status=resp.status_code,
            )

        # 5. record + async post-submission work
        row = ActiveJobRow(
            job_id=result.job_id,
            user_id=submission.user_id,
            project_id=verdict.resolved_project,
            num_circuits=submission.num_circuits,
            shots=submission.shots,
            charge_budget=verdict.charge_budget,
            quota_acquired=quota_acquired,
            submitted_at=submission.received_at,
            circuit_payload=submission.raw_payload,
        )
        core.active_jobs.insert(row)
        core.schedule_post_submission(row)
        metrics.bump("submissions_accepted")
        return _relay(resp)

    return app
