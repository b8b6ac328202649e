"""Admin tool: drives the accounting REST API through the gateway.

Every subcommand is a thin client; no policy decisions happen here. HTTP
errors map to exit codes (403 -> 3, 404 -> 4, 409 -> 5, other errors -> 1)
so scripts can branch on outcomes.
"""

from __future__ import annotations

import json as jsonlib
import sys
from pathlib import Path

import click
import httpx

from qpu_gatekeeper.cli.common import (
    DEFAULT_TOKENS_PATH,
    exit_code_for,
    read_tokens_file,
    resolve_server_url,
)


class AdminContext:
    def __init__(self, base_url: str, token: str, as_json: bool):
        self.client = httpx.Client(
            base_url=base_url,
            headers={"Authorization": f"Bearer {token}"},
            timeout=15.0,
        )
        self.as_json = as_json

    def call(self, method: str, path: str, **kwargs) -> dict | list | None:
        try:
            resp = self.client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            click.echo(f"request failed: {exc}", err=True)
            sys.exit(1)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                message = f"{body.get('error', resp.status_code)}: {body.get('detail', '')}"
            except ValueError:
                message = f"HTTP {resp.status_code}"
            click.echo(message, err=True)
            sys.exit(exit_code_for(resp.status_code))
        if resp.status_code == 204 or not resp.content:
            return None
        return resp.json()

    def emit(self, data, columns: list[str] | None = None) -> None:
        if self.as_json or columns is None:
            click.echo(jsonlib.dumps(data, indent=2, sort_keys=True))
            return
        rows = data if isinstance(data, list) else [data]
        table = [[str(row.get(col, "")) for col in columns] for row in rows]
        widths = [
            max(len(col), *(len(r[i]) for r in table)) if table else len(col)
            for i, col in enumerate(columns)
        ]
        click.echo("  ".join(col.ljust(w) for col, w in zip(columns, widths)))
        for r in table:
            click.echo("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))


pass_ctx = click.make_pass_decorator(AdminContext)


@click.group()
@click.option("--server-url", help="Gateway base URL (or GATEWAY_SERVER_URL).")
@click.option("--token", help="Bearer token; defaults to the tokens file.")
@click.option(
    "--tokens-path",
    type=click.Path(path_type=Path),
    default=DEFAULT_TOKENS_PATH,
    show_default=True,
)
@click.option("--json", "as_json", is_flag=True, help="Emit raw JSON instead of tables.")
@click.pass_context
def main(ctx, server_url, token, tokens_path, as_json):
    """Administer organisations, projects, users, slots, and reservations."""
    base = resolve_server_url(server_url)
    if not base:
        click.echo("no server URL: pass --server-url or set GATEWAY_SERVER_URL", err=True)
        sys.exit(2)
    if not token:
        try:
            token = read_tokens_file(tokens_path)["access_token"]
        except (OSError, ValueError, KeyError):
            click.echo(f"no token: pass --token or log in first ({tokens_path})", err=True)
            sys.exit(2)
    ctx.obj = AdminContext(base.rstrip("/") + "/api", token, as_json)


# -- org ------------------------------------------------------------------------


@main.group()
def org():
    """Organisations."""


@org.command("create")
@click.option("--name", required=True)
@click.option("--budget-ms", required=True, type=int)
@click.option("--id", "org_id")
@pass_ctx
def org_create(ctx, name, budget_ms, org_id):
    body = {"name": name, "yearly_budget_ms": budget_ms}
    if org_id:
        body["org_id"] = org_id
    ctx.emit(ctx.call("POST", "/orgs", json=body), ["org_id", "name", "yearly_budget_ms"])


@org.command("list")
@pass_ctx
def org_list(ctx):
    data = ctx.call("GET", "/orgs")["orgs"]
    ctx.emit(data, ["org_id", "name", "yearly_budget_ms", "consumed_ms"])


@org.command("update")
@click.argument("org_id")
@click.option("--budget-ms", type=int)
@click.option("--name")
@pass_ctx
def org_update(ctx, org_id, budget_ms, name):
    body = {}
    if budget_ms is not None:
        body["yearly_budget_ms"] = budget_ms
    if name:
        body["name"] = name
    ctx.emit(ctx.call("PATCH", f"/orgs/{org_id}", json=body), ["org_id", "name", "yearly_budget_ms"])


# -- project ---------------------------------------------------------------------


@main.group()
def project():
    """Projects."""


@project.command("create")
@click.option("--org", "org_id", required=True)
@click.option("--name", required=True)
@click.option("--budget-ms", required=True, type=int)
@click.option("--id", "project_id")
@pass_ctx
def project_create(ctx, org_id, name, budget_ms, project_id):
    body = {"org_id": org_id, "name": name, "budget_ms": budget_ms}
    if project_id:
        body["project_id"] = project_id
    ctx.emit(
        ctx.call("POST", "/projects", json=body),
        ["project_id", "org_id", "name", "budget_ms"],
    )


@project.command("list")
@click.option("--org", "org_id")
@pass_ctx
def project_list(ctx, org_id):
    params = {"org_id": org_id} if org_id else {}
    data = ctx.call("GET", "/projects", params=params)["projects"]
    ctx.emit(data, ["project_id", "org_id", "name", "budget_ms", "consumed_ms", "remaining_ms"])


@project.command("update")
@click.argument("project_id")
@click.option("--budget-ms", type=int)
@click.option("--name")
@pass_ctx
def project_update(ctx, project_id, budget_ms, name):
    body = {}
    if budget_ms is not None:
        body["budget_ms"] = budget_ms
    if name:
        body["name"] = name
    ctx.emit(
        ctx.call("PATCH", f"/projects/{project_id}", json=body),
        ["project_id", "budget_ms", "consumed_ms"],
    )


@project.command("add-member")
@click.argument("project_id")
@click.argument("user_id")
@click.option("--pi", is_flag=True, help="Grant project-admin (PI) rights.")
@pass_ctx
def project_add_member(ctx, project_id, user_id, pi):
    ctx.call("POST", f"/projects/{project_id}/members", json={"user_id": user_id, "is_admin": pi})
    click.echo(f"added {user_id} to {project_id}")


# -- user -----------------------------------------------------------------------


@main.group()
def user():
    """Users."""


@user.command("create")
@click.option("--username", required=True)
@click.option("--role", required=True, type=click.Choice(["admin", "org_manager", "pi", "regular"]))
@click.option("--org", "org_ids", multiple=True)
@click.option("--id", "user_id")
@pass_ctx
def user_create(ctx, username, role, org_ids, user_id):
    body = {"username": username, "role": role, "org_ids": list(org_ids)}
    if user_id:
        body["user_id"] = user_id
    ctx.emit(ctx.call("POST", "/users", json=body), ["user_id", "username", "role", "org_ids"])


@user.command("list")
@pass_ctx
def user_list(ctx):
    data = ctx.call("GET", "/users")["users"]
    ctx.emit(data, ["user_id", "username", "role", "default_project_id"])


@user.command("update")
@click.argument("user_id")
@click.option("--role", type=click.Choice(["admin", "org_manager", "pi", "regular"]))
@click.option("--default-project")
@pass_ctx
def user_update(ctx, user_id, role, default_project):
    body = {}
    if role:
        body["role"] = role
    if default_project:
        body["default_project_id"] = default_project
    ctx.emit(
        ctx.call("PATCH", f"/users/{user_id}", json=body),
        ["user_id", "username", "role", "default_project_id"],
    )


# -- slot -----------------------------------------------------------------------


@main.group()
def slot():
    """Pre-allocated slots."""


@slot.command("create")
@click.option("--org", "org_id", required=True)
@click.option("--start", required=True, help="ISO-8601 UTC")
@click.option("--end", required=True, help="ISO-8601 UTC")
@pass_ctx
def slot_create(ctx, org_id, start, end):
    body = {"org_id": org_id, "start": start, "end": end}
    ctx.emit(ctx.call("POST", "/slots", json=body), ["slot_id", "org_id", "start", "end"])


@slot.command("list")
@pass_ctx
def slot_list(ctx):
    data = ctx.call("GET", "/slots")["slots"]
    ctx.emit(data, ["slot_id", "org_id", "start", "end"])


# -- reservation -------------------------------------------------------------------


@main.group()
def reservation():
    """Exclusive reservations."""


@reservation.command("create")
@click.option("--project", "project_id", required=True)
@click.option("--start", required=True, help="ISO-8601 UTC")
@click.option("--end", required=True, help="ISO-8601 UTC")
@pass_ctx
def reservation_create(ctx, project_id, start, end):
    body = {"project_id": project_id, "start": start, "end": end}
    ctx.emit(
        ctx.call("POST", "/reservations", json=body),
        ["reservation_id", "project_id", "start", "end", "charged_ms"],
    )


@reservation.command("list")
@pass_ctx
def reservation_list(ctx):
    data = ctx.call("GET", "/reservations")["reservations"]
    ctx.emit(data, ["reservation_id", "project_id", "start", "end", "charged_ms"])


@reservation.command("cancel")
@click.argument("reservation_id")
@pass_ctx
def reservation_cancel(ctx, reservation_id):
    ctx.call("DELETE", f"/reservations/{reservation_id}")
    click.echo(f"cancelled {reservation_id}")


# -- budget / report ------------------------------------------------------------------


@main.group()
def budget():
    """Budget management."""


@budget.command("set")
@click.option("--project", "project_id")
@click.option("--org", "org_id")
@click.option("--budget-ms", required=True, type=int)
@pass_ctx
def budget_set(ctx, project_id, org_id, budget_ms):
    if bool(project_id) == bool(org_id):
        click.echo("pass exactly one of --project / --org", err=True)
        sys.exit(2)
    if project_id:
        ctx.emit(
            ctx.call("PATCH", f"/projects/{project_id}", json={"budget_ms": budget_ms}),
            ["project_id", "budget_ms", "consumed_ms"],
        )
    else:
        ctx.emit(
            ctx.call("PATCH", f"/orgs/{org_id}", json={"yearly_budget_ms": budget_ms}),
            ["org_id", "yearly_budget_ms", "consumed_ms"],
        )


@main.command()
@click.option("--project", "project_id")
@click.option("--org", "org_id")
@click.option("--start", required=True, help="ISO-8601 UTC")
@click.option("--end", required=True, help="ISO-8601 UTC")
@click.option("--json", "as_json", is_flag=True, help="Emit the raw report JSON.")
@pass_ctx
def report(ctx, project_id, org_id, start, end, as_json):
    """Billing report for one org or project over [start, end)."""
    if bool(project_id) == bool(org_id):
        click.echo("pass exactly one of --project / --org", err=True)
        sys.exit(2)
    scope, scope_id = ("project", project_id) if project_id else ("org", org_id)
    data = ctx.call(
        "GET", "/reports", params={"scope": scope, "id": scope_id, "start": start, "end": end}
    )
    if ctx.as_json or as_json:
        ctx.emit(data)
        return
    click.echo(f"{scope} {scope_id}  [{start} .. {end})")
    click.echo(f"  jobs:            {data['job_count']}")
    click.echo(f"  charged QPU ms:  {data['total_qpu_ms']}")
    click.echo(f"  reservation ms:  {data['reservation_ms']}")
    for user_id, entry in sorted(data["per_user"].items()):
        click.echo(f"  {user_id}: {entry['job_count']} jobs, {entry['qpu_ms']} ms")


if __name__ == "__main__":
    main()
