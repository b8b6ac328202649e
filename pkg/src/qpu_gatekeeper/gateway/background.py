"""Async post-submission work: retries with backoff, then dead-letter.

Uploads and submitted-reports must never alter the client response, so
they run detached from the request. Each task retries with exponential
backoff; after the attempt budget is exhausted the failure is appended to
a local journal file for operator replay.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path
from typing import Awaitable, Callable

from qpu_gatekeeper.timeutil import now_ms

log = logging.getLogger("qpu_gatekeeper.gateway")


class BackgroundRunner:
    def __init__(
        self,
        max_attempts: int = 5,
        base_delay_ms: int = 50,
        journal_path: str | Path | None = None,
    ):
        self.max_attempts = max_attempts
        self.base_delay_ms = base_delay_ms
        self.journal_path = Path(journal_path) if journal_path else None
        self.dead_letters: list[dict] = []
        self._tasks: set[asyncio.Task] = set()

    def spawn(self, name: str, work: Callable[[], Awaitable[None]]) -> asyncio.Task:
        task = asyncio.create_task(self._run(name, work))
        self._tasks.add(task)
        task.add_done_callback(self._tasks.discard)
        return task

    async def _run(self, name: str, work: Callable[[], Awaitable[None]]) -> None:
        for attempt in range(1, self.max_attempts + 1):
            try:
                await work()
                return
            except asyncio.CancelledError:
                raise
            except Exception as exc:
                if attempt == self.max_attempts:
                    self._dead_letter(name, exc)
                    return
                delay = self.base_delay_ms * (2 ** (attempt - 1)) / 1000.0
                log.warning(
                    "background task %s failed (attempt %d/%d): %s; retrying in %.3fs",
                    name,
                    attempt,
                    self.max_attempts,
                    exc,
                    delay,
                )
                await asyncio.sleep(delay)

    def _dead_letter(self, name: str, exc: Exception) -> None:
        record = {"at": now_ms(), "task": name, "error": f"{type(exc).__name__}: {exc}"}
        self.dead_letters.append(record)
        log.error("background task %s dead-lettered: %s", name, record["error"])
        if self.journal_path is not None:
            try:
                with self.journal_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")
            except OSError as io_exc:
                log.error("could not write dead-letter journal: %s", io_exc)

    async def drain(self) -> None:
        """Wait for all in-flight background work (used by tests and shutdown)."""
        while self._tasks:
            await asyncio.gather(*list(self._tasks), return_exceptions=True)

    @property
    def pending(self) -> int:
        return len(self._tasks)
