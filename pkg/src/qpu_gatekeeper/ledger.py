"""Per-user outstanding-shot accounting.

A user's counter is the sum of circuits x shots over their non-terminal
jobs, including the one being admitted; an admission is allowed only if
the counter stays at or below the configured cap. The check-and-increment
is atomic so no interleaving of concurrent admissions can overshoot the
cap.

The counter lives in an abstract store with two implementations:

- InProcessCounterStore: an atomic in-memory map (tests, single-node).
  Implements the conditional add exactly.
- HttpCounterStore: client for an external counter service speaking bare
  increment-and-get / decrement-and-get. The conditional add is realized
  as increment, check, roll back on overshoot; under heavy contention
  this can deny an admission that a serialized schedule would have
  admitted, but it can never admit past the cap.

Availability is fail-open by policy: when the store is unreachable the
caller is told so and decides (the gateway lets the job through with a
warning rather than blocking research on a counter outage).
"""

from __future__ import annotations

import abc
import enum
import logging
import threading

import httpx

log = logging.getLogger("qpu_gatekeeper.ledger")

DEFAULT_S_MAX = 2_500_000  # outstanding shot-units; ~5 min of QPU time at 0.12 ms/shot
NOMINAL_CAP_QPU_MS = 5 * 60_000


def cap_matches_nominal_qpu_time(
    s_max: int, t_shot_ms: float, tolerance: float = 0.25
) -> bool:
    """Config sanity check: does the shot cap still mean ~5 minutes of QPU time?

    Advisory only -- operators may tune the cap freely; a warning is logged
    when the correspondence drifts so the number stays explainable.
    """
    implied_ms = s_max * t_shot_ms
    consistent = abs(implied_ms - NOMINAL_CAP_QPU_MS) <= tolerance * NOMINAL_CAP_QPU_MS
    if not consistent:
        log.warning(
            "fairness cap of %d shot-units is %.0f ms of QPU time at %.3f ms/shot,"
            " no longer ~%d ms",
            s_max,
            implied_ms,
            t_shot_ms,
            NOMINAL_CAP_QPU_MS,
        )
    return consistent


class CounterStoreUnavailable(Exception):
    pass


class AcquireOutcome(str, enum.Enum):
    ACQUIRED = "acquired"
    OVER_LIMIT = "over_limit"
    STORE_UNAVAILABLE = "store_unavailable"


class CounterStore(abc.ABC):
    """Atomic integer counters keyed by string."""

    @abc.abstractmethod
    def add_if_at_most(self, key: str, delta: int, limit: int) -> tuple[bool, int]:
        """Atomically add ``delta`` if the result stays <= limit.

        Returns (applied, value) where value is post-add when applied,
        else the observed current value.
        """

    @abc.abstractmethod
    def add_floored(self, key: str, delta: int) -> int:
        """Add ``delta`` (typically negative), flooring the result at 0."""

    @abc.abstractmethod
    def read(self, key: str) -> int: ...


class InProcessCounterStore(CounterStore):
    def __init__(self) -> None:
        self._values: dict[str, int] = {}
        self._lock = threading.Lock()
        self.fail = False  # test hook: simulate an outage

    def _check(self) -> None:
        if self.fail:
            raise CounterStoreUnavailable("in-process store marked down")

    def add_if_at_most(self, key: str, delta: int, limit: int) -> tuple[bool, int]:
        self._check()
        with self._lock:
            current = self._values.get(key, 0)
            if current + delta <= limit:
                self._values[key] = current + delta
                return True, current + delta
            return False, current

    def add_floored(self, key: str, delta: int) -> int:
        self._check()
        with self._lock:
            value = self._values.get(key, 0) + delta
            if value < 0:
                log.warning("counter %s floored at 0 (would be %d)", key, value)
                value = 0
            self._values[key] = value
            return value

    def read(self, key: str) -> int:
        self._check()
        with self._lock:
            return self._values.get(key, 0)


class HttpCounterStore(CounterStore):
    """Client for the external counter service (increment/decrement-and-get)."""

    def __init__(self, endpoint: str, timeout: float = 5.0):
        self._client = httpx.Client(base_url=endpoint.rstrip("/"), timeout=timeout)

    def _post(self, op: str, key: str, delta: int) -> int:
        try:
            resp = self._client.post(f"/{op}", json={"key": key, "delta": delta})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise CounterStoreUnavailable(str(exc)) from exc
        return int(resp.json()["value"])

    def add_if_at_most(self, key: str, delta: int, limit: int) -> tuple[bool, int]:
        value = self._post("incr", key, delta)
        if value <= limit:
            return True, value
        rolled = self._post("decr", key, delta)
        return False, rolled

    def add_floored(self, key: str, delta: int) -> int:
        value = self._post("decr", key, -delta) if delta < 0 else self._post("incr", key, delta)
        if value < 0:
            log.warning("counter %s floored at 0 (service reported %d)", key, value)
            self._post("incr", key, -value)
            return 0
        return value

    def read(self, key: str) -> int:
        try:
            resp = self._client.get("/value", params={"key": key})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise CounterStoreUnavailable(str(exc)) from exc
        return int(resp.json()["value"])


class ShotLedger:
    """Acquire / rollback / release of outstanding shot-units per user."""

    def __init__(self, store: CounterStore, s_max: int = DEFAULT_S_MAX):
        if s_max < 1:
            raise ValueError("s_max must be >= 1")
        self.store = store
        self.s_max = s_max

    @staticmethod
    def key(user_id: str) -> str:
        return f"fairness:{user_id}"

    def try_acquire(self, user_id: str, shot_units: int) -> AcquireOutcome:
        if shot_units < 1:
            raise ValueError("shot_units must be >= 1")
        try:
            applied, _ = self.store.add_if_at_most(self.key(user_id), shot_units, self.s_max)
        except CounterStoreUnavailable:
            return AcquireOutcome.STORE_UNAVAILABLE
        return AcquireOutcome.ACQUIRED if applied else AcquireOutcome.OVER_LIMIT

    def rollback(self, user_id: str, shot_units: int) -> None:
        """Undo an acquire after an upstream submission failure."""
        self.store.add_floored(self.key(user_id), -shot_units)

    def release(self, user_id: str, shot_units: int) -> None:
        """Return quota when a job reaches a terminal state."""
        self.store.add_floored(self.key(user_id), -shot_units)

    def read(self, user_id: str) -> int:
        return self.store.read(self.key(user_id))
