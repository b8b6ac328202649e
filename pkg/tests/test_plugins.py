"""Plugin contracts: parsing, registry resolution, result URLs, polling."""

from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpu_gatekeeper.mockdevice.app import build_app as build_device_app
from qpu_gatekeeper.mockdevice.engine import DeviceConfig, FaultMode, MockDeviceEngine
from qpu_gatekeeper.mockdevice.plugin import MockVendorPlugin
from qpu_gatekeeper.plugins import (
    MalformedPayload,
    MalformedResponse,
    PluginConfig,
    UnknownJob,
    UnknownPlugin,
    UpstreamUnavailable,
    default_registry,
)
from qpu_gatekeeper.plugins.records import JobStatus
from qpu_gatekeeper.plugins.reference_site import ReferenceSitePlugin

pytestmark = pytest.mark.anyio

PARAMS = {"type": "circuit"}


@pytest.fixture
def vendor():
    return MockVendorPlugin(base_url="http://device.local", client=httpx.AsyncClient())


def test_parse_single_circuit_no_project(vendor):
    body = json.dumps({"circuits": ["c0"], "shots": 1024}).encode()
    sub = vendor.parse_submission(PARAMS, {}, body)
    assert sub.num_circuits == 1
    assert sub.shots == 1024
    assert sub.project_hint is None


def test_parse_five_circuits_with_project(vendor):
    payload = {
        "circuits": [f"c{i}" for i in range(5)],
        "shots": 2000,
        "metadata": {"project": "course-qc"},
    }
    body = json.dumps(payload).encode()
    sub = vendor.parse_submission(PARAMS, {}, body)
    assert sub.num_circuits == 5
    assert sub.shots == 2000
    assert sub.project_hint == "course-qc"
    assert sub.job_type == "circuit"
    assert sub.raw_payload == body


def test_truncated_body_malformed(vendor):
    body = json.dumps({"circuits": ["c0"], "shots": 1024}).encode()[:-7]
    with pytest.raises(MalformedPayload):
        vendor.parse_submission(PARAMS, {}, body)


@pytest.mark.parametrize(
    "payload",
    [
        {"circuits": [], "shots": 10},
        {"circuits": ["c"], "shots": 0},
        {"circuits": ["c"], "shots": "many"},
        {"shots": 10},
        [1, 2, 3],
    ],
)
def test_invalid_payloads_malformed(vendor, payload):
    with pytest.raises(MalformedPayload):
        vendor.parse_submission(PARAMS, {}, json.dumps(payload).encode())


@given(
    num_circuits=st.integers(1, 20),
    shots=st.integers(1, 10_000),
    project=st.none() | st.text(min_size=1, max_size=20),
)
@settings(max_examples=100, deadline=None)
def test_raw_payload_preserved_byte_for_byte(num_circuits, shots, project):
    vendor = MockVendorPlugin(base_url="http://x", client=httpx.AsyncClient())
    payload = {"circuits": [f"c{i}" for i in range(num_circuits)], "shots": shots}
    if project is not None:
        payload["metadata"] = {"project": project}
    body = json.dumps(payload).encode()
    sub = vendor.parse_submission(PARAMS, {}, body)
    assert sub.raw_payload == body
    assert sub.num_circuits == num_circuits
    assert sub.shots == shots
    assert sub.project_hint == project


def test_parse_submission_response_success(vendor):
    result = vendor.parse_submission_response(200, b'{"id":"J-42"}')
    assert result.job_id == "J-42"
    assert result.accepted


def test_parse_submission_response_failure_passthrough(vendor):
    result = vendor.parse_submission_response(503, b"device busy")
    assert result.job_id == ""
    assert result.upstream_status == 503
    assert not result.accepted


def test_parse_submission_response_missing_id(vendor):
    with pytest.raises(MalformedResponse):
        vendor.parse_submission_response(200, b'{"status":"ok"}')


# -- registry -----------------------------------------------------------------


def make_config(vendor_name="mock", site_name="reference-site"):
    return PluginConfig(
        vendor_plugin_name=vendor_name,
        site_plugin_name=site_name,
        vendor_base_url="http://device.local",
        site_backend_url="http://accounting.local",
    )


def test_registry_loads_builtin_pair():
    vendor, site = default_registry().load(make_config())
    assert isinstance(vendor, MockVendorPlugin)
    assert isinstance(site, ReferenceSitePlugin)


def test_registry_unknown_vendor():
    with pytest.raises(UnknownPlugin):
        default_registry().load(make_config(vendor_name="iqm"))


def test_registry_lookup_is_case_sensitive():
    with pytest.raises(UnknownPlugin):
        default_registry().load(make_config(vendor_name="Mock"))


# -- result URLs ----------------------------------------------------------------


def make_site(**kwargs) -> ReferenceSitePlugin:
    kwargs.setdefault("backend_url", "http://accounting.local")
    kwargs.setdefault("service_token", "svc")
    kwargs.setdefault("t_shot_ms", 0.12)
    kwargs.setdefault("store_base_url", "https://store.example")
    kwargs.setdefault("client", httpx.AsyncClient())
    return ReferenceSitePlugin(**kwargs)


def test_result_url_template():
    assert make_site().result_url("J-42") == "https://store.example/jobs/J-42/"


def test_result_url_deterministic_and_distinct():
    site = make_site()
    assert site.result_url("J-1") == site.result_url("J-1")
    assert site.result_url("J-1") != site.result_url("J-2")


def test_estimated_cost_uses_shot_duration():
    site = make_site()
    body = json.dumps({"circuits": [f"c{i}" for i in range(5)], "shots": 1000}).encode()
    vendor = MockVendorPlugin(base_url="http://x", client=httpx.AsyncClient())
    sub = vendor.parse_submission(PARAMS, {}, body)
    assert site.estimated_cost_ms(sub) == 600


# -- polling against the device ------------------------------------------------


@pytest.fixture
def device_pair():
    engine = MockDeviceEngine(DeviceConfig())
    app = build_device_app(engine)
    client = httpx.AsyncClient(
        transport=httpx.ASGITransport(app=app), base_url="http://device.local"
    )
    return engine, MockVendorPlugin(base_url="http://device.local", client=client)


async def test_poll_fresh_job_pending(device_pair):
    engine, vendor = device_pair
    job = engine.submit("circuit", {"circuits": ["c0"], "shots": 10})
    status = await vendor.poll_job(job.job_id)
    assert status.status is JobStatus.PENDING
    assert status.qpu_time_ms is None
    assert status.artifacts == {}


async def test_poll_ready_job_carries_artifacts_and_time(device_pair):
    engine, vendor = device_pair
    job = engine.submit("circuit", {"circuits": ["c0"], "shots": 1000})
    engine.advance(2)
    status = await vendor.poll_job(job.job_id)
    assert status.status is JobStatus.READY
    assert status.qpu_time_ms == 120
    assert set(status.artifacts) == {"results", "timeline"}
    measurements = json.loads(status.artifacts["results"])["measurements"]
    assert len(measurements[0]) == 1000


async def test_poll_unknown_job(device_pair):
    _, vendor = device_pair
    with pytest.raises(UnknownJob):
        await vendor.poll_job("J-404")


async def test_poll_device_down(device_pair):
    engine, vendor = device_pair
    engine.set_fault(FaultMode.DROP_CONNECTION)
    with pytest.raises(UpstreamUnavailable):
        await vendor.poll_job("J-1")


async def test_fetch_calibration_roundtrip_and_monotonic(device_pair):
    engine, vendor = device_pair
    first = await vendor.fetch_calibration()
    assert first.metrics  # default fixture
    engine.calibration_set({"m": 2.0})
    second = await vendor.fetch_calibration()
    assert second.timestamp > first.timestamp
    assert second.metrics == {"m": 2.0}


async def test_fetch_calibration_device_down(device_pair):
    engine, vendor = device_pair
    engine.set_fault(FaultMode.DROP_CONNECTION)
    with pytest.raises(UpstreamUnavailable):
        await vendor.fetch_calibration()
