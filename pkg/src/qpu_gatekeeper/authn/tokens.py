"""Signed bearer tokens: standard compact web-token envelope, HS256.

The gateway and the accounting backend validate tokens locally with the
shared symmetric key; no network round-trip per request. Swapping in an
external identity provider means replacing the key source and this
module's validator, nothing else.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import uuid
from dataclasses import dataclass

from qpu_gatekeeper.timeutil import Clock, now_ms

_HEADER = {"alg": "HS256", "typ": "JWT"}


class TokenError(Exception):
    pass


class Malformed(TokenError):
    pass


class BadSignature(TokenError):
    pass


class Expired(TokenError):
    pass


@dataclass(frozen=True)
class TokenClaims:
    subject: str  # user_id
    username: str
    roles: frozenset[str]
    expiry: int  # UTC epoch ms
    issuer: str
    token_type: str = "access"  # access | refresh
    token_id: str = ""


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def _unb64(data: str) -> bytes:
    pad = "=" * (-len(data) % 4)
    return base64.urlsafe_b64decode(data + pad)


def sign(claims: TokenClaims, key: bytes) -> str:
    payload = {
        "sub": claims.subject,
        "preferred_username": claims.username,
        "roles": sorted(claims.roles),
        "exp": claims.expiry // 1000,
        "iss": claims.issuer,
        "typ": claims.token_type,
        "jti": claims.token_id or uuid.uuid4().hex,
    }
    signing_input = (
        _b64(json.dumps(_HEADER, separators=(",", ":")).encode())
        + "."
        + _b64(json.dumps(payload, separators=(",", ":")).encode())
    ).encode("ascii")
    mac = hmac.new(key, signing_input, hashlib.sha256).digest()
    return signing_input.decode("ascii") + "." + _b64(mac)


def verify(token: str, key: bytes, now: int) -> TokenClaims:
    """Decode and check a token; raises Malformed / BadSignature / Expired."""
    parts = token.split(".")
    if len(parts) != 3:
        raise Malformed("token must have three segments")
    signing_input = (parts[0] + "." + parts[1]).encode("ascii")
    try:
        header = json.loads(_unb64(parts[0]))
        payload = json.loads(_unb64(parts[1]))
        signature = _unb64(parts[2])
    except (ValueError, UnicodeDecodeError) as exc:
        raise Malformed(f"undecodable token: {exc}") from exc
    if header.get("alg") != "HS256":
        raise Malformed(f"unsupported alg {header.get('alg')!r}")
    expected = hmac.new(key, signing_input, hashlib.sha256).digest()
    if not hmac.compare_digest(signature, expected):
        raise BadSignature("signature mismatch")
    try:
        claims = TokenClaims(
            subject=payload["sub"],
            username=payload["preferred_username"],
            roles=frozenset(payload["roles"]),
            expiry=int(payload["exp"]) * 1000,
            issuer=payload["iss"],
            token_type=payload.get("typ", "access"),
            token_id=payload.get("jti", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise Malformed(f"missing or invalid claim: {exc}") from exc
    if now >= claims.expiry:
        raise Expired(f"token expired at {claims.expiry}")
    return claims


class TokenValidator:
    """Shared-key token validation, as used by the gateway and backend."""

    def __init__(self, key: bytes, clock: Clock = now_ms):
        self.key = key
        self.clock = clock

    def validate(self, token: str) -> TokenClaims:
        return verify(token, self.key, self.clock())

    def validate_header(self, authorization: str | None) -> TokenClaims:
        """Validate an ``Authorization: Bearer <token>`` header value."""
        if not authorization or not authorization.lower().startswith("bearer "):
            raise Malformed("missing bearer token")
        return self.validate(authorization[7:].strip())


class TokenIssuer:
    """Issues access/refresh pairs and rotates refresh tokens.

    Rotation state (the set of live refresh token ids) is in-memory;
    restart invalidates outstanding refresh tokens, which at desk scale
    just means logging in again.
    """

    def __init__(
        self,
        key: bytes,
        issuer: str = "qpu-gatekeeper-authn",
        access_lifetime_ms: int = 15 * 60_000,
        refresh_lifetime_ms: int = 24 * 3_600_000,
        clock: Clock = now_ms,
    ):
        self.key = key
        self.issuer = issuer
        self.access_lifetime_ms = access_lifetime_ms
        self.refresh_lifetime_ms = refresh_lifetime_ms
        self.clock = clock
        self._live_refresh_ids: set[str] = set()

    def issue(self, user_id: str, username: str, roles: frozenset[str]) -> dict:
        now = self.clock()
        access = TokenClaims(
            subject=user_id,
            username=username,
            roles=roles,
            expiry=now + self.access_lifetime_ms,
            issuer=self.issuer,
            token_type="access",
            token_id=uuid.uuid4().hex,
        )
        refresh = TokenClaims(
            subject=user_id,
            username=username,
            roles=roles,
            expiry=now + self.refresh_lifetime_ms,
            issuer=self.issuer,
            token_type="refresh",
            token_id=uuid.uuid4().hex,
        )
        self._live_refresh_ids.add(refresh.token_id)
        return {
            "access_token": sign(access, self.key),
            "refresh_token": sign(refresh, self.key),
            "expires_at_ms": access.expiry,
        }

    def refresh(self, refresh_token: str) -> dict:
        """Rotate: validate the refresh token, invalidate it, issue a new pair.

        Raises Malformed if handed a non-refresh token, BadSignature /
        Expired as usual, and Malformed for an already-rotated token.
        """
        claims = verify(refresh_token, self.key, self.clock())
        if claims.token_type != "refresh":
            raise Malformed("not a refresh token")
        if claims.token_id not in self._live_refresh_ids:
            raise Malformed("refresh token already rotated or unknown")
        self._live_refresh_ids.discard(claims.token_id)
        return self.issue(claims.subject, claims.username, claims.roles)
