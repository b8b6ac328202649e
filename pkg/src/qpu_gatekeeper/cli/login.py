"""Login client: obtains a token pair and writes the tokens file.

The tokens file is what unmodified device clients read; it carries
``access_token``, ``refresh_token``, and ``auth_server_url``.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import httpx

from qpu_gatekeeper.cli.common import (
    DEFAULT_TOKENS_PATH,
    read_tokens_file,
    resolve_server_url,
    write_tokens_file,
)


@click.command()
@click.option("--server-url", help="Gateway base URL (or GATEWAY_SERVER_URL).")
@click.option("--username", prompt=True)
@click.option("--password", prompt=True, hide_input=True)
@click.option(
    "--tokens-path",
    type=click.Path(path_type=Path),
    default=DEFAULT_TOKENS_PATH,
    show_default=True,
    help="Where to write the tokens file.",
)
@click.option("--refresh", is_flag=True, help="Rotate the stored refresh token instead.")
def main(server_url: str | None, username: str, password: str, tokens_path: Path, refresh: bool):
    """Log in and write a tokens file for device clients."""
    base = resolve_server_url(server_url)
    if not base:
        click.echo("no server URL: pass --server-url or set GATEWAY_SERVER_URL", err=True)
        sys.exit(2)
    base = base.rstrip("/")
    try:
        if refresh:
            stored = read_tokens_file(tokens_path)
            resp = httpx.post(
                f"{base}/auth/refresh",
                json={"refresh_token": stored["refresh_token"]},
                timeout=10.0,
            )
        else:
            resp = httpx.post(
                f"{base}/auth/token",
                json={"username": username, "password": password},
                timeout=10.0,
            )
    except httpx.HTTPError as exc:
        click.echo(f"cannot reach {base}: {exc}", err=True)
        sys.exit(1)
    if resp.status_code != 200:
        detail = ""
        try:
            detail = resp.json().get("error", "")
        except ValueError:
            pass
        click.echo(f"login failed ({resp.status_code} {detail})", err=True)
        sys.exit(1)
    body = resp.json()
    write_tokens_file(
        tokens_path,
        {
            "access_token": body["access_token"],
            "refresh_token": body["refresh_token"],
            "auth_server_url": f"{base}/auth",
        },
    )
    click.echo(f"tokens written to {tokens_path}")
    click.echo(f"access token expires at {body['expires_at']}")


if __name__ == "__main__":
    main()
