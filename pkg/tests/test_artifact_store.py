"""Artifact store: roundtrips, immutability, durability, URL dereference."""

from __future__ import annotations

import os

import httpx
import pytest

from qpu_gatekeeper.artifacts import (
    ArtifactKey,
    ArtifactKind,
    ArtifactNotFound,
    BucketStore,
    FilesystemStore,
    ImmutabilityViolation,
    StoreUnavailable,
)
from qpu_gatekeeper.store_service import build_app as build_store_app

from tests.util import run_server

pytestmark = pytest.mark.anyio

KEY = ArtifactKey("J-1", ArtifactKind.RESULTS)


@pytest.fixture
def store(tmp_path):
    return FilesystemStore(tmp_path, base_url="http://store.local")


def test_roundtrip_one_mib(store):
    blob = os.urandom(1024 * 1024)
    store.put(KEY, blob)
    assert store.get(KEY) == blob


def test_key_layout(store):
    assert KEY.path == "jobs/J-1/results.json"
    store.put(KEY, b"{}")
    assert (store.root / "jobs" / "J-1" / "results.json").exists()


def test_list_kinds(store):
    for kind in (ArtifactKind.CIRCUIT, ArtifactKind.RESULTS, ArtifactKind.CALIBRATION):
        store.put(ArtifactKey("J-7", kind), b"{}")
    assert store.list_kinds("J-7") == {
        ArtifactKind.CIRCUIT,
        ArtifactKind.RESULTS,
        ArtifactKind.CALIBRATION,
    }
    assert len(store.list_kinds("J-7")) == 3


def test_get_missing_raises(store):
    with pytest.raises(ArtifactNotFound):
        store.get(ArtifactKey("J-404", ArtifactKind.RESULTS))
    assert store.list_kinds("J-404") == set()


def test_identical_reput_is_noop(store):
    store.put(KEY, b"same bytes")
    store.put(KEY, b"same bytes")
    assert store.get(KEY) == b"same bytes"


def test_differing_reput_rejected(store):
    store.put(KEY, b"original")
    with pytest.raises(ImmutabilityViolation):
        store.put(KEY, b"tampered")
    assert store.get(KEY) == b"original"


def test_empty_put_rejected(store):
    with pytest.raises(ValueError):
        store.put(KEY, b"")


def test_durability_across_instances(tmp_path):
    FilesystemStore(tmp_path).put(KEY, b"persisted")
    reopened = FilesystemStore(tmp_path)
    assert reopened.get(KEY) == b"persisted"


def test_public_url(store):
    assert store.public_url(KEY) == "http://store.local/jobs/J-1/results.json"


async def test_url_dereferences_to_same_bytes(tmp_path):
    store = FilesystemStore(tmp_path, base_url="http://store.local")
    blob = b'{"measurements": [["00101"]]}'
    store.put(KEY, blob)
    app = build_store_app(store)
    client = httpx.AsyncClient(
        transport=httpx.ASGITransport(app=app), base_url="http://store.local"
    )
    resp = await client.get("/jobs/J-1/results.json")
    assert resp.status_code == 200
    assert resp.content == blob
    listing = (await client.get("/jobs/J-1/")).json()
    assert listing["kinds"] == ["results"]
    assert listing["artifacts"]["results"] == store.public_url(KEY)


def test_bucket_store_against_service(tmp_path):
    backing = FilesystemStore(tmp_path)
    with run_server(build_store_app(backing)) as base_url:
        bucket = BucketStore(base_url)
        bucket.put(KEY, b"via bucket protocol")
        assert bucket.get(KEY) == b"via bucket protocol"
        assert bucket.list_kinds("J-1") == {ArtifactKind.RESULTS}
        bucket.put(KEY, b"via bucket protocol")  # identical re-put ok
        with pytest.raises(ImmutabilityViolation):
            bucket.put(KEY, b"different")
        with pytest.raises(ArtifactNotFound):
            bucket.get(ArtifactKey("J-404", ArtifactKind.RESULTS))


def test_bucket_store_unreachable():
    bucket = BucketStore("http://127.0.0.1:1")
    with pytest.raises(StoreUnavailable):
        bucket.get(KEY)
