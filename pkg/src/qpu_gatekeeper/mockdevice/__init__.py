"""Stand-in quantum device: replicates the upstream job API, returns random bits."""

from qpu_gatekeeper.mockdevice.engine import (
    DeviceConfig,
    FaultMode,
    MockDeviceEngine,
    MockJob,
)

__all__ = ["DeviceConfig", "FaultMode", "MockDeviceEngine", "MockJob"]
