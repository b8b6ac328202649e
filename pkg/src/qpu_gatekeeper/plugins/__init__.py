"""Vendor- and site-plugin contracts, boundary records, and the registry."""

from qpu_gatekeeper.plugins.base import (
    BackendUnavailable,
    MalformedPayload,
    MalformedResponse,
    SitePlugin,
    UnknownJob,
    UpstreamUnavailable,
    VendorPlugin,
)
from qpu_gatekeeper.plugins.records import (
    CalibrationReport,
    JobAuthorizationResult,
    JobStatus,
    JobStatusResult,
    JobSubmission,
    PluginConfig,
    SubmissionResult,
)
from qpu_gatekeeper.plugins.registry import PluginRegistry, UnknownPlugin, default_registry

__all__ = [
    "BackendUnavailable",
    "CalibrationReport",
    "JobAuthorizationResult",
    "JobStatus",
    "JobStatusResult",
    "JobSubmission",
    "MalformedPayload",
    "MalformedResponse",
    "PluginConfig",
    "PluginRegistry",
    "SitePlugin",
    "SubmissionResult",
    "UnknownJob",
    "UnknownPlugin",
    "UpstreamUnavailable",
    "VendorPlugin",
    "default_registry",
]
