"""wattbench: server power model calibration and application energy estimation.

Calibrates per-server power models from measurement sweeps (CPU load
ladders, disk I/O, UDP traffic), fits polynomial and efficiency models,
and estimates application energy from simple activity traces. A
synthetic host simulator provides a verifiable ground truth in place of
lab hardware.
"""

__version__ = "0.1.0"

from .core import (
    ActivityTrace,
    CpuPowerCurve,
    DiskModel,
    EnergyEstimate,
    EnvelopeCurve,
    LoadSample,
    NetworkModel,
    OperatingPoint,
    Phase,
    SCHEMA_VERSION,
    ServerProfile,
)

__all__ = [
    "ActivityTrace",
    "CpuPowerCurve",
    "DiskModel",
    "EnergyEstimate",
    "EnvelopeCurve",
    "LoadSample",
    "NetworkModel",
    "OperatingPoint",
    "Phase",
    "SCHEMA_VERSION",
    "ServerProfile",
    "__version__",
]
