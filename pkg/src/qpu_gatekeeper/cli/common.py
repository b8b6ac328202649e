"""Shared CLI plumbing: config precedence, tokens file, error mapping."""

from __future__ import annotations

import json
import os
import stat
import tempfile
from pathlib import Path

DEFAULT_TOKENS_PATH = Path.home() / ".qpu-gatekeeper" / "tokens.json"

# HTTP status -> process exit code, scriptable error handling
EXIT_CODES = {403: 3, 404: 4, 409: 5}


def resolve_server_url(flag_value: str | None, config_file: Path | None = None) -> str | None:
    """Server URL precedence: flag > GATEWAY_SERVER_URL > config file."""
    if flag_value:
        return flag_value
    env = os.environ.get("GATEWAY_SERVER_URL")
    if env:
        return env
    config_file = config_file or Path.home() / ".qpu-gatekeeper" / "config.json"
    if config_file.is_file():
        try:
            return json.loads(config_file.read_text()).get("server_url")
        except (ValueError, OSError):
            return None
    return None


def write_tokens_file(path: Path, payload: dict) -> None:
    """Atomic write with owner-only permissions."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tokens-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        os.chmod(tmp, stat.S_IRUSR | stat.S_IWUSR)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def read_tokens_file(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


def exit_code_for(status: int) -> int:
    return EXIT_CODES.get(status, 1)
