"""Token endpoint service: direct password grant plus refresh rotation.

The credential registry is local (this is a stub IdP); identities and
roles mirror the accounting service's users and can be re-synced from it.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass

import httpx
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from qpu_gatekeeper.authn.tokens import TokenError, TokenIssuer
from qpu_gatekeeper.timeutil import to_iso

_PBKDF2_ROUNDS = 50_000


def _hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, _PBKDF2_ROUNDS)


@dataclass
class RegisteredUser:
    user_id: str
    username: str
    roles: frozenset[str]
    salt: bytes
    password_hash: bytes


class InvalidCredentials(Exception):
    pass


class UserRegistry:
    """username -> credentials + identity, kept in step with accounting."""

    def __init__(self) -> None:
        self._users: dict[str, RegisteredUser] = {}
        self._lock = threading.Lock()

    def upsert(self, user_id: str, username: str, roles: frozenset[str], password: str) -> None:
        salt = os.urandom(16)
        with self._lock:
            self._users[username] = RegisteredUser(
                user_id=user_id,
                username=username,
                roles=roles,
                salt=salt,
                password_hash=_hash_password(password, salt),
            )

    def sync_identities(self, users: list[dict]) -> None:
        """Refresh user ids / roles from accounting's /users listing.

        Passwords are local to the registry and left untouched; unknown
        usernames are skipped (they have no credentials to log in with).
        """
        with self._lock:
            for entry in users:
                known = self._users.get(entry["username"])
                if known is not None:
                    known.user_id = entry["user_id"]
                    known.roles = frozenset({entry["role"]})

    def sync_from_accounting(self, backend_url: str, service_token: str) -> int:
        resp = httpx.get(
            f"{backend_url.rstrip('/')}/users",
            headers={"Authorization": f"Bearer {service_token}"},
            timeout=10.0,
        )
        resp.raise_for_status()
        users = resp.json()["users"]
        self.sync_identities(users)
        return len(users)

    def authenticate(self, username: str, password: str) -> RegisteredUser:
        with self._lock:
            user = self._users.get(username)
        if user is None or not _verify_password(user, password):
            raise InvalidCredentials(username)
        return user


def _verify_password(user: RegisteredUser, password: str) -> bool:
    import hmac as _hmac

    return _hmac.compare_digest(user.password_hash, _hash_password(password, user.salt))


def build_app(issuer: TokenIssuer, registry: UserRegistry) -> FastAPI:
    app = FastAPI(title="authn", docs_url=None, redoc_url=None)
    app.state.issuer = issuer
    app.state.registry = registry
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["Content-Type"],
    )

    def _token_response(pair: dict) -> JSONResponse:
        return JSONResponse(
            {
                "access_token": pair["access_token"],
                "refresh_token": pair["refresh_token"],
                "expires_at": to_iso(pair["expires_at_ms"]),
                "token_type": "bearer",
            }
        )

    @app.post("/auth/token")
    async def grant(request: Request):
        payload = await request.json()
        try:
            user = registry.authenticate(payload.get("username", ""), payload.get("password", ""))
        except InvalidCredentials:
            return JSONResponse({"error": "invalid_credentials"}, status_code=401)
        return _token_response(issuer.issue(user.user_id, user.username, user.roles))

    @app.post("/auth/refresh")
    async def refresh(request: Request):
        payload = await request.json()
        try:
            pair = issuer.refresh(payload.get("refresh_token", ""))
        except TokenError as exc:
            return JSONResponse(
                {"error": "invalid_refresh_token", "detail": str(exc)}, status_code=401
            )
        return _token_response(pair)

    @app.get("/auth/health")
    async def health():
        return JSONResponse({"status": "up"})

    return app
