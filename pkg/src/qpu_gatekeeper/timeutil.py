"""Timestamp helpers.

All services keep time as integer UTC epoch milliseconds internally and
exchange ISO-8601 strings (millisecond precision, explicit UTC offset) on
the wire.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone
from typing import Callable

# A clock is any zero-argument callable returning UTC epoch milliseconds;
# services take one so tests can drive logical time.
Clock = Callable[[], int]


def now_ms() -> int:
    """Current UTC time in epoch milliseconds."""
    return time.time_ns() // 1_000_000


def to_iso(ms: int) -> str:
    """Epoch milliseconds -> ISO-8601 UTC string with millisecond precision."""
    dt = datetime.fromtimestamp(ms / 1000.0, tz=timezone.utc)
    return dt.isoformat(timespec="milliseconds")


def from_iso(value: str) -> int:
    """ISO-8601 string -> epoch milliseconds. Accepts 'Z' or offset suffixes."""
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)
