"""Transparent reverse proxy with the policy pipeline."""

from qpu_gatekeeper.gateway.active_jobs import ActiveJobRow, ActiveJobStore, ProgressMarker

__all__ = ["ActiveJobRow", "ActiveJobStore", "ProgressMarker"]
