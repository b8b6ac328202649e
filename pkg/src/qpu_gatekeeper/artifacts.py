"""Long-term artifact storage keyed by job id.

Keys map to ``jobs/<job_id>/<kind>.json`` paths. Writes are immutable:
re-putting identical bytes is a no-op, differing bytes is an error, so
the audit trail can never be silently rewritten.

Two backends share the interface: a local filesystem tree (default, used
by tests and single-node deployments) and a thin client for an external
bucket service speaking plain HTTP PUT/GET on the same paths.
"""

from __future__ import annotations

import abc
import enum
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx


class ArtifactKind(str, enum.Enum):
    CIRCUIT = "circuit"
    RESULTS = "results"
    TIMELINE = "timeline"
    CALIBRATION = "calibration"


@dataclass(frozen=True)
class ArtifactKey:
    job_id: str
    kind: ArtifactKind

    @property
    def path(self) -> str:
        return f"jobs/{self.job_id}/{self.kind.value}.json"


class ArtifactNotFound(Exception):
    pass


class ImmutabilityViolation(Exception):
    """A key was re-put with different bytes."""


class StoreUnavailable(Exception):
    """Backend unreachable; callers apply their fail-open/retry policy."""


class ArtifactStore(abc.ABC):
    @abc.abstractmethod
    def put(self, key: ArtifactKey, data: bytes) -> None: ...

    @abc.abstractmethod
    def get(self, key: ArtifactKey) -> bytes: ...

    @abc.abstractmethod
    def list_kinds(self, job_id: str) -> set[ArtifactKind]: ...

    @abc.abstractmethod
    def public_url(self, key: ArtifactKey) -> str: ...


class FilesystemStore(ArtifactStore):
    """Artifact tree under a root directory; fsyncs before acknowledging."""

    def __init__(self, root: str | os.PathLike, base_url: str = "http://store.local"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.base_url = base_url.rstrip("/")
        self._lock = threading.Lock()

    def _path(self, key: ArtifactKey) -> Path:
        return self.root / "jobs" / key.job_id / f"{key.kind.value}.json"

    def put(self, key: ArtifactKey, data: bytes) -> None:
        if not data:
            raise ValueError("artifact bytes must be nonempty")
        path = self._path(key)
        with self._lock:
            if path.exists():
                if path.read_bytes() == data:
                    return
                raise ImmutabilityViolation(f"{key.path} already written with different bytes")
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)

    def get(self, key: ArtifactKey) -> bytes:
        path = self._path(key)
        if not path.exists():
            raise ArtifactNotFound(key.path)
        return path.read_bytes()

    def list_kinds(self, job_id: str) -> set[ArtifactKind]:
        folder = self.root / "jobs" / job_id
        if not folder.is_dir():
            return set()
        kinds = set()
        for entry in folder.iterdir():
            if entry.suffix == ".json":
                try:
                    kinds.add(ArtifactKind(entry.stem))
                except ValueError:
                    continue
        return kinds

    def public_url(self, key: ArtifactKey) -> str:
        return f"{self.base_url}/{key.path}"


class BucketStore(ArtifactStore):
    """Client for an external bucket service (PUT/GET on the key paths)."""

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self._client = httpx.Client(base_url=self.endpoint, timeout=timeout)

    def put(self, key: ArtifactKey, data: bytes) -> None:
        if not data:
            raise ValueError("artifact bytes must be nonempty")
        try:
            resp = self._client.put(f"/{key.path}", content=data)
        except httpx.HTTPError as exc:
            raise StoreUnavailable(str(exc)) from exc
        if resp.status_code == 409:
            raise ImmutabilityViolation(key.path)
        resp.raise_for_status()

    def get(self, key: ArtifactKey) -> bytes:
        try:
            resp = self._client.get(f"/{key.path}")
        except httpx.HTTPError as exc:
            raise StoreUnavailable(str(exc)) from exc
        if resp.status_code == 404:
            raise ArtifactNotFound(key.path)
        resp.raise_for_status()
        return resp.content

    def list_kinds(self, job_id: str) -> set[ArtifactKind]:
        try:
            resp = self._client.get(f"/jobs/{job_id}/")
        except httpx.HTTPError as exc:
            raise StoreUnavailable(str(exc)) from exc
        if resp.status_code == 404:
            return set()
        resp.raise_for_status()
        return {ArtifactKind(k) for k in resp.json().get("kinds", [])}

    def public_url(self, key: ArtifactKey) -> str:
        return f"{self.endpoint}/{key.path}"


def store_from_env(env: dict[str, str] | None = None) -> ArtifactStore:
    """Build the configured backend: STORE_BACKEND={fs,bucket}."""
    env = os.environ if env is None else env
    backend = env.get("STORE_BACKEND", "fs")
    if backend == "fs":
        root = env.get("STORE_ROOT", "./artifact-store")
        return FilesystemStore(root, base_url=env.get("STORE_BASE_URL", "http://store.local"))
    if backend == "bucket":
        return BucketStore(env["STORE_ENDPOINT"])
    raise ValueError(f"unknown STORE_BACKEND {backend!r}")
