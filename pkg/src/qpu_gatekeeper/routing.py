"""Route classification for the gateway.

The vendor plugin supplies route definitions for the device API; the
gateway adds its own suite rules (auth, backend, store prefixes). A table
matches each (method, path) to exactly one rule or rejects with NoMatch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class RouteKind(str, enum.Enum):
    SUBMISSION = "submission"
    PASSTHROUGH = "passthrough"
    BLOCKED = "blocked"


class RouteTarget(str, enum.Enum):
    """Which upstream a matched route forwards to."""

    DEVICE = "device"
    ACCOUNTING = "accounting"
    AUTHN = "authn"
    STORE = "store"
    LOCAL = "local"  # served by the gateway itself (health/metrics)


class NoMatch(Exception):
    """No route rule matches the request; the gateway answers 404."""


@dataclass(frozen=True)
class RouteRule:
    """One route pattern.

    ``path_pattern`` uses ``{name}`` for a single segment and ``{name...}``
    as a trailing multi-segment wildcard. ``required_roles`` semantics:
    None means public (no token), an empty set means any authenticated
    user, a non-empty set means the token must carry one of the roles.
    """

    method: str
    path_pattern: str
    kind: RouteKind
    required_roles: frozenset[str] | None = frozenset()
    target: RouteTarget = RouteTarget.DEVICE
    segments: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", self.method.upper())
        object.__setattr__(
            self, "segments", tuple(s for s in self.path_pattern.split("/") if s)
        )

    def match(self, method: str, path: str) -> dict[str, str] | None:
        """Return extracted params if this rule matches, else None."""
        if method.upper() != self.method:
            return None
        parts = [s for s in path.split("/") if s]
        params: dict[str, str] = {}
        for i, seg in enumerate(self.segments):
            if seg.startswith("{") and seg.endswith("...}"):
                params[seg[1:-4]] = "/".join(parts[i:])
                return params
            if i >= len(parts):
                return None
            if seg.startswith("{") and seg.endswith("}"):
                params[seg[1:-1]] = parts[i]
            elif seg != parts[i]:
                return None
        if len(parts) != len(self.segments):
            return None
        return params


@dataclass(frozen=True)
class RouteMatch:
    rule: RouteRule
    params: dict[str, str]


class RouteTable:
    """Ordered rule list; first (and by construction only) match wins."""

    def __init__(self, rules: list[RouteRule]):
        self._rules = list(rules)

    @property
    def rules(self) -> list[RouteRule]:
        return list(self._rules)

    def classify(self, method: str, path: str) -> RouteMatch:
        for rule in self._rules:
            params = rule.match(method, path)
            if params is not None:
                return RouteMatch(rule=rule, params=params)
        raise NoMatch(f"{method} {path}")
