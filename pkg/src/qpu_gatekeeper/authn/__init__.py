"""Token issuer / validator stub standing in for the site's SSO."""

from qpu_gatekeeper.authn.tokens import (
    BadSignature,
    Expired,
    Malformed,
    TokenClaims,
    TokenError,
    TokenIssuer,
    TokenValidator,
)

__all__ = [
    "BadSignature",
    "Expired",
    "Malformed",
    "TokenClaims",
    "TokenError",
    "TokenIssuer",
    "TokenValidator",
]
