"""REST surface of the accounting backend.

Two service-to-service endpoints consumed by the gateway and reporter
(``POST /jobAuthoriser``, ``POST /jobReporter``, shared-secret bearer)
plus the resource API used by the dashboard and the admin CLI
(``/orgs``, ``/projects``, ``/users``, ``/slots``, ``/reservations``,
``/jobs``, ``/reports``), authenticated with the same signed tokens the
gateway accepts.

Timestamps cross the wire as ISO-8601 UTC strings with millisecond
precision.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

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
    UnknownProject,
)
from qpu_gatekeeper.authn.tokens import TokenError, TokenValidator
from qpu_gatekeeper.timeutil import from_iso, to_iso

log = logging.getLogger("qpu_gatekeeper.accounting")

_ERROR_STATUS = {
    NotAuthorised: 403,
    NotFound: 404,
    UnknownProject: 404,
    IntegrityViolation: 409,
    Overlap: 409,
    OutsideSlot: 409,
    InsufficientBudget: 409,
    AlreadyStarted: 409,
}


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str = ""):
        self.status = status
        self.code = code
        self.detail = detail


def _ts_in(value) -> int | None:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return int(value)
    return from_iso(value)


def _ts_out(ms: int | None) -> str | None:
    return None if ms is None else to_iso(ms)


def _slot_out(slot: dict) -> dict:
    return {
        "slot_id": slot["slot_id"],
        "org_id": slot["org_id"],
        "start": _ts_out(slot["start_ms"]),
        "end": _ts_out(slot["end_ms"]),
    }


def _reservation_out(rsv: dict) -> dict:
    return {
        "reservation_id": rsv["reservation_id"],
        "project_id": rsv["project_id"],
        "start": _ts_out(rsv["start_ms"]),
        "end": _ts_out(rsv["end_ms"]),
        "charged_ms": rsv["charged_ms"],
    }


def _job_out(job: dict) -> dict:
    out = dict(job)
    out["submitted_at"] = _ts_out(job["submitted_at"])
    out["completed_at"] = _ts_out(job.get("completed_at"))
    out["charge_budget"] = bool(job["charge_budget"])
    out["charged"] = bool(job["charged"])
    return out


def build_app(
    service: AccountingService,
    validator: TokenValidator,
    service_token: str,
) -> FastAPI:
    app = FastAPI(title="accounting", docs_url=None, redoc_url=None)
    app.state.service = service
    # the dashboard is served from its own origin
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["Authorization", "Content-Type"],
    )

    def caller_from(request: Request, service_only: bool = False) -> Caller:
        header = request.headers.get("authorization", "")
        token = header[7:].strip() if header.lower().startswith("bearer ") else ""
        if not token:
            raise ApiError(401, "unauthenticated", "missing bearer token")
        if token == service_token:
            return Caller(user_id="@service", roles=frozenset({"admin"}), is_service=True)
        if service_only:
            raise ApiError(403, "service_only", "endpoint reserved for the gateway services")
        try:
            claims = validator.validate(token)
        except TokenError as exc:
            raise ApiError(401, "invalid_token", str(exc)) from exc
        return Caller(user_id=claims.subject, roles=claims.roles)

    @app.exception_handler(ApiError)
    async def api_error(_, exc: ApiError):
        return JSONResponse({"error": exc.code, "detail": exc.detail}, status_code=exc.status)

    def _domain_error(exc: Exception) -> JSONResponse:
        status = _ERROR_STATUS[type(exc)]
        return JSONResponse(
            {"error": type(exc).__name__, "detail": str(exc)}, status_code=status
        )

    for exc_type in _ERROR_STATUS:

        @app.exception_handler(exc_type)
        async def handle(_, exc, __f=_domain_error):
            return __f(exc)

    @app.exception_handler(KeyError)
    async def missing_field(_, exc: KeyError):
        return JSONResponse(
            {"error": "missing_field", "detail": f"required field {exc} absent"},
            status_code=400,
        )

    @app.get("/health")
    async def health():
        return {"status": "up"}

    # -- service-to-service ------------------------------------------------

    # the two gateway-facing endpoints run on every submission; they parse
    # and serialize by hand to stay off the framework's encoding paths
    @app.post("/jobAuthoriser")
    async def job_authoriser(request: Request):
        caller_from(request, service_only=True)
        body = await request.json()
        verdict = service.authorise_job(
            user_id=body["user_id"],
            project_hint=body.get("project_hint"),
            estimated_cost_ms=int(body["estimated_cost_ms"]),
            now=_ts_in(body.get("now")),
        )
        return JSONResponse(
            {
                "allowed": verdict.allowed,
                "reason": verdict.reason.value,
                "resolved_project": verdict.resolved_project,
                "charge_budget": verdict.charge_budget,
                "detail": verdict.detail,
            }
        )

    @app.post("/jobReporter")
    async def job_reporter(request: Request):
        caller_from(request, service_only=True)
        body = await request.json()
        outcome = service.report_job(
            job_id=body["job_id"],
            phase=body["phase"],
            status=body["status"],
            user_id=body["user_id"],
            project_id=body["project_id"],
            num_circuits=int(body["num_circuits"]),
            shots=int(body["shots"]),
            charge_budget=bool(body["charge_budget"]),
            qpu_time_ms=body.get("qpu_time_ms"),
            result_url=body.get("result_url"),
            submitted_at=_ts_in(body.get("submitted_at")),
        )
        return JSONResponse(
            {"ok": True, "duplicate": outcome.duplicate, "charged_ms": outcome.charged_ms}
        )

    # -- organisations -------------------------------------------------------

    @app.post("/orgs", status_code=201)
    async def create_org(request: Request):
        caller = caller_from(request)
        body = await request.json()
        return service.create_org(
            caller, body["name"], int(body["yearly_budget_ms"]), body.get("org_id")
        )

    @app.get("/orgs")
    async def list_orgs(request: Request):
        return {"orgs": service.list_orgs(caller_from(request))}

    @app.get("/orgs/{org_id}")
    async def get_org(org_id: str, request: Request):
        return service.get_org(caller_from(request), org_id)

    @app.patch("/orgs/{org_id}")
    async def update_org(org_id: str, request: Request):
        body = await request.json()
        budget = body.get("yearly_budget_ms")
        return service.update_org(
            caller_from(request),
            org_id,
            yearly_budget_ms=None if budget is None else int(budget),
            name=body.get("name"),
        )

    @app.delete("/orgs/{org_id}", status_code=204)
    async def delete_org(org_id: str, request: Request):
        service.delete_org(caller_from(request), org_id)

    # -- projects ------------------------------------------------------------

    @app.post("/projects", status_code=201)
    async def create_project(request: Request):
        body = await request.json()
        return service.create_project(
            caller_from(request),
            org_id=body["org_id"],
            name=body["name"],
            budget_ms=int(body["budget_ms"]),
            project_id=body.get("project_id"),
        )

    @app.get("/projects")
    async def list_projects(request: Request, org_id: str | None = None):
        return {"projects": service.list_projects(caller_from(request), org_id)}

    @app.get("/projects/{project_id}")
    async def get_project(project_id: str, request: Request):
        return service.get_project(caller_from(request), project_id)

    @app.patch("/projects/{project_id}")
    async def update_project(project_id: str, request: Request):
        body = await request.json()
        budget = body.get("budget_ms")
        return service.update_project(
            caller_from(request),
            project_id,
            budget_ms=None if budget is None else int(budget),
            name=body.get("name"),
        )

    @app.delete("/projects/{project_id}", status_code=204)
    async def delete_project(project_id: str, request: Request):
        service.delete_project(caller_from(request), project_id)

    @app.post("/projects/{project_id}/members", status_code=204)
    async def add_member(project_id: str, request: Request):
        body = await request.json()
        service.add_member(
            caller_from(request), project_id, body["user_id"], bool(body.get("is_admin"))
        )

    @app.delete("/projects/{project_id}/members/{user_id}", status_code=204)
    async def remove_member(project_id: str, user_id: str, request: Request):
        service.remove_member(caller_from(request), project_id, user_id)

    # -- users ---------------------------------------------------------------

    @app.post("/users", status_code=201)
    async def create_user(request: Request):
        body = await request.json()
        return service.create_user(
            caller_from(request),
            username=body["username"],
            role=body["role"],
            org_ids=list(body.get("org_ids", [])),
            default_project_id=body.get("default_project_id"),
            user_id=body.get("user_id"),
        )

    @app.get("/users")
    async def list_users(request: Request):
        return {"users": service.list_users(caller_from(request))}

    @app.get("/users/{user_id}")
    async def get_user(user_id: str, request: Request):
        return service.get_user(caller_from(request), user_id)

    @app.patch("/users/{user_id}")
    async def update_user(user_id: str, request: Request):
        body = await request.json()
        return service.update_user(
            caller_from(request),
            user_id,
            role=body.get("role"),
            default_project_id=body.get("default_project_id"),
        )

    # -- slots and reservations ----------------------------------------------

    @app.post("/slots", status_code=201)
    async def create_slot(request: Request):
        body = await request.json()
        slot = service.create_slot(
            caller_from(request),
            org_id=body["org_id"],
            start=_ts_in(body["start"]),
            end=_ts_in(body["end"]),
            slot_id=body.get("slot_id"),
        )
        return _slot_out(slot)

    @app.get("/slots")
    async def list_slots(request: Request, start: str | None = None, end: str | None = None):
        slots = service.list_slots(caller_from(request), _ts_in(start), _ts_in(end))
        return {"slots": [_slot_out(s) for s in slots]}

    @app.delete("/slots/{slot_id}", status_code=204)
    async def delete_slot(slot_id: str, request: Request):
        service.delete_slot(caller_from(request), slot_id)

    @app.post("/reservations", status_code=201)
    async def create_reservation(request: Request):
        body = await request.json()
        rsv = service.create_reservation(
            caller_from(request),
            project_id=body["project_id"],
            start=_ts_in(body["start"]),
            end=_ts_in(body["end"]),
        )
        return _reservation_out(rsv)

    @app.get("/reservations")
    async def list_reservations(
        request: Request, start: str | None = None, end: str | None = None
    ):
        rsvs = service.list_reservations(caller_from(request), _ts_in(start), _ts_in(end))
        return {"reservations": [_reservation_out(r) for r in rsvs]}

    @app.delete("/reservations/{reservation_id}", status_code=204)
    async def cancel_reservation(reservation_id: str, request: Request):
        service.cancel_reservation(caller_from(request), reservation_id)

    # -- jobs and reports ------------------------------------------------------

    @app.get("/jobs")
    async def list_jobs(
        request: Request,
        project_id: str | None = None,
        user_id: str | None = None,
        status: str | None = None,
        limit: int = 200,
        offset: int = 0,
    ):
        jobs = service.list_jobs(
            caller_from(request),
            project_id=project_id,
            user_id=user_id,
            status=status,
            limit=limit,
            offset=offset,
        )
        return {"jobs": [_job_out(j) for j in jobs]}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str, request: Request):
        return _job_out(service.get_job(caller_from(request), job_id))

    @app.get("/reports")
    async def report(request: Request, scope: str, id: str, start: str, end: str):
        return service.billing_report(
            caller_from(request), scope, id, _ts_in(start), _ts_in(end)
        )

    return app
