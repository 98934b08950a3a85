"""Deterministic Bluetooth piconet and attack-surface simulator."""

from .errors import BtSimError
from .simcore import (
    BdAddr,
    CaptureLog,
    Contact,
    Device,
    DeviceClass,
    DeviceProfile,
    FirmwareFlags,
    Packet,
    Piconet,
    ServiceRecord,
    Simulation,
    decode_class,
)

__version__ = "0.1.0"

__all__ = [
    "BdAddr", "BtSimError", "CaptureLog", "Contact", "Device", "DeviceClass",
    "DeviceProfile", "FirmwareFlags", "Packet", "Piconet", "ServiceRecord", "Simulation",
    "decode_class",
]
