"""Device registry, piconets, the shared medium and packet capture.

A :class:`Simulation` owns every registered :class:`Device`, a single
integer logical clock and the list of active capture taps.  All traffic is
serialized: each call to :meth:`Simulation.emit` is one delivery, one tick.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Literal, Optional, Sequence, Union

from .errors import (
    AlreadyMember,
    DuplicateAddress,
    PiconetFull,
    ScannerCrashed,
    TargetCrashed,
    UnknownDevice,
)

MAX_ACTIVE_SLAVES = 7

# -----------------------------------------------------------------------------
# Addresses
# -----------------------------------------------------------------------------
_ADDR_RE = re.compile(r"^[0-9A-Fa-f]{2}(:[0-9A-Fa-f]{2}){5}$")


@dataclass(frozen=True, order=True)
class BdAddr:
    octets: bytes

    def __post_init__(self):
        if len(self.octets) != 6:
            raise ValueError(f"BD_ADDR needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "BdAddr":
        if not _ADDR_RE.match(text):
            raise ValueError(f"malformed BD_ADDR {text!r}")
        return cls(bytes(int(part, 16) for part in text.split(":")))

    @classmethod
    def coerce(cls, value: "AddrLike") -> "BdAddr":
        if isinstance(value, BdAddr):
            return value
        if isinstance(value, Device):
            return value.addr
        return cls.parse(value)

    def __str__(self) -> str:
        return ":".join(f"{b:02X}" for b in self.octets)

    def __repr__(self) -> str:
        return f"BdAddr('{self}')"


# -----------------------------------------------------------------------------
# Class of device
# -----------------------------------------------------------------------------
MAJOR_CLASSES = {
    0x00: "Miscellaneous",
    0x01: "Computer",
    0x02: "Phone",
    0x03: "LAN Access",
    0x04: "Audio/Video",
    0x05: "Peripheral",
    0x06: "Imaging",
    0x07: "Wearable",
    0x08: "Toy",
    0x09: "Health",
    0x1F: "Uncategorized",
}

MINOR_CLASSES = {
    0x01: ["Uncategorized", "Desktop workstation", "Server", "Laptop",
           "Handheld", "Palm", "Wearable"],
    0x02: ["Uncategorized", "Cellular", "Cordless", "Smart phone",
           "Wired modem or voice gateway", "Common ISDN Access"],
    0x04: ["Uncategorized", "Device conforms to the Headset profile",
           "Hands-free", "Reserved", "Microphone", "Loudspeaker", "Headphones",
           "Portable Audio", "Car Audio", "Set-top box", "HiFi Audio Device",
           "VCR", "Video Camera", "Camcorder", "Video Monitor",
           "Video Display and Loudspeaker", "Video Conferencing", "Reserved",
           "Gaming/Toy"],
}

# bit position -> name, listed in the order hciconfig prints them
SERVICE_CLASSES = {
    13: "Limited Discoverable",
    16: "Positioning",
    17: "Networking",
    18: "Rendering",
    19: "Capturing",
    20: "Object Transfer",
    21: "Audio",
    22: "Telephony",
    23: "Information",
}


def decode_class(cod: int) -> tuple[str, Optional[str], frozenset[str]]:
    """Split a 24-bit class-of-device into (major, minor, service classes).

    Minor is ``None`` for the Miscellaneous major class, which has no minor
    field.
    """
    if not 0 <= cod < 1 << 24:
        raise ValueError(f"class of device out of range: {cod:#x}")
    major_bits = (cod >> 8) & 0x1F
    minor_bits = (cod >> 2) & 0x3F
    major = MAJOR_CLASSES.get(major_bits, f"Reserved (0x{major_bits:02x})")
    if major_bits == 0x00:
        minor = None
    else:
        table = MINOR_CLASSES.get(major_bits)
        if table is not None and minor_bits < len(table):
            minor = table[minor_bits]
        elif minor_bits == 0:
            minor = "Uncategorized"
        else:
            minor = f"Unknown (0x{minor_bits:02x})"
    services = frozenset(name for bit, name in SERVICE_CLASSES.items() if cod >> bit & 1)
    return major, minor, services


@dataclass(frozen=True)
class DeviceClass:
    cod: int

    def __post_init__(self):
        if not 0 <= self.cod < 1 << 24:
            raise ValueError(f"class of device out of range: {self.cod:#x}")

    @property
    def major_class(self) -> str:
        return decode_class(self.cod)[0]

    @property
    def minor_class(self) -> Optional[str]:
        return decode_class(self.cod)[1]

    @property
    def service_classes(self) -> frozenset[str]:
        return decode_class(self.cod)[2]

    def service_classes_text(self) -> str:
        """Service classes in bit order, comma separated (hciconfig style)."""
        return ", ".join(name for bit, name in SERVICE_CLASSES.items() if self.cod >> bit & 1)

    def device_class_text(self) -> str:
        major, minor, _ = decode_class(self.cod)
        return major if minor is None else f"{major}, {minor}"

    def __str__(self) -> str:
        return f"0x{self.cod:06x}"


# -----------------------------------------------------------------------------
# Profiles
# -----------------------------------------------------------------------------
L2CAP_UUID = 0x0100
RFCOMM_UUID = 0x0003


@dataclass(frozen=True)
class ServiceRecord:
    handle: int
    service_class_uuid16: int
    protocol_descriptors: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.handle < 1 << 32:
            raise ValueError("service record handle must fit in 32 bits")
        if not self.protocol_descriptors:
            raise ValueError("service record needs at least one protocol descriptor")
        object.__setattr__(self, "protocol_descriptors",
                           tuple(tuple(d) for d in self.protocol_descriptors))

    def ports(self, protocol_uuid: int) -> list[int]:
        return [port for uuid, port in self.protocol_descriptors if uuid == protocol_uuid]


@dataclass(frozen=True)
class Contact:
    index: int
    name: str
    number: str


@dataclass(frozen=True)
class FirmwareFlags:
    echo_overflow_crash: bool = False
    obex_unauthenticated: bool = False
    fixed_pin: Optional[str] = None
    auto_accept_connections: bool = False
    fixed_passkey: Optional[int] = None
    rotate_passkey: bool = False

    def __post_init__(self):
        if self.fixed_pin is not None and not re.fullmatch(r"\d{4}", self.fixed_pin):
            raise ValueError(f"fixed PIN must be 4 digits, got {self.fixed_pin!r}")
        if self.fixed_passkey is not None and self.rotate_passkey:
            raise ValueError("fixed_passkey and rotate_passkey are mutually exclusive")
        if self.fixed_passkey is not None and not 0 <= self.fixed_passkey < 10**6:
            raise ValueError("fixed passkey must be in 0..999999")


@dataclass
class DeviceProfile:
    """Everything a device is and knows.  Mutated in place by the stack."""

    addr: BdAddr
    name: str
    device_class: DeviceClass = field(default_factory=lambda: DeviceClass(0))
    security_mode: int = 2
    discoverable: bool = True
    lmp_version: tuple[int, int, int] = (2, 0, 0)
    manufacturer: tuple[str, int] = ("Broadcom Corporation", 15)
    features: bytes = bytes(8)
    services: list[ServiceRecord] = field(default_factory=list)
    contacts: list[Contact] = field(default_factory=list)
    calendar: list[str] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)
    firmware: FirmwareFlags = field(default_factory=FirmwareFlags)
    crashed: bool = False
    # AT-endpoint identity (phones, headsets)
    vendor: str = ""
    model: str = ""
    revision: str = ""
    imei: str = ""
    capabilities: str = ""
    brsf: int = 63
    ambient_audio: bytes = b""
    # scripted user behaviour at connection prompts and PIN entry
    user_accepts: bool = True
    user_pin: Optional[str] = None

    def __post_init__(self):
        self.addr = BdAddr.coerce(self.addr)
        if isinstance(self.device_class, int):
            self.device_class = DeviceClass(self.device_class)
        if self.security_mode not in (1, 2, 3):
            raise ValueError(f"security mode must be 1, 2 or 3, got {self.security_mode}")
        if len(self.features) != 8:
            raise ValueError("features must be 8 octets")
        self.contacts = [c if isinstance(c, Contact) else Contact(*c) for c in self.contacts]
        indices = [c.index for c in self.contacts]
        if len(set(indices)) != len(indices):
            raise ValueError("contact indices must be unique")
        handles = [r.handle for r in self.services]
        if len(set(handles)) != len(handles):
            raise ValueError("service record handles must be unique")

    @property
    def lmp_version_code(self) -> int:
        major, minor, _ = self.lmp_version
        return LMP_VERSION_CODES.get((major, minor), 0)

    @property
    def has_at_endpoint(self) -> bool:
        return self.device_class.major_class in ("Phone", "Audio/Video")


LMP_VERSION_CODES = {
    (1, 0): 0, (1, 1): 1, (1, 2): 2, (2, 0): 3, (2, 1): 4,
    (3, 0): 5, (4, 0): 6, (4, 1): 7, (4, 2): 8, (5, 0): 9,
}


class Device:
    """A registered device: its profile plus runtime-only state."""

    def __init__(self, handle: int, profile: DeviceProfile):
        self.handle = handle
        self.profile = profile
        self.registered_addr = profile.addr
        self.bonds: dict[BdAddr, bytes] = {}
        self.call_state: Optional[str] = None
        self.sink = bytearray()
        self.desynchronized: set[BdAddr] = set()
        self.passkey_policy = None

    @property
    def addr(self) -> BdAddr:
        return self.profile.addr

    @property
    def name(self) -> str:
        return self.profile.name

    @property
    def crashed(self) -> bool:
        return self.profile.crashed

    def reset(self) -> None:
        """Power-cycle: clears the crash flag and volatile link state."""
        self.profile.crashed = False
        self.call_state = None
        self.desynchronized.clear()

    def __repr__(self) -> str:
        return f"<Device #{self.handle} {self.addr} {self.name!r}>"


AddrLike = Union[BdAddr, str, Device]


# -----------------------------------------------------------------------------
# Packets
# -----------------------------------------------------------------------------
def _freeze_params(params: dict) -> tuple[tuple[str, object], ...]:
    return tuple(params.items())


@dataclass(frozen=True)
class HciCmd:
    kind: str
    params: tuple[tuple[str, object], ...] = ()

    @classmethod
    def of(cls, kind: str, **params) -> "HciCmd":
        return cls(kind, _freeze_params(params))

    @property
    def payload(self) -> bytes:
        return b""


@dataclass(frozen=True)
class HciEvt:
    kind: str
    params: tuple[tuple[str, object], ...] = ()

    @classmethod
    def of(cls, kind: str, **params) -> "HciEvt":
        return cls(kind, _freeze_params(params))

    @property
    def payload(self) -> bytes:
        return b""


@dataclass(frozen=True)
class L2cap:
    kind: str
    cid: int = 0x0001
    psm: Optional[int] = None
    payload: bytes = b""


@dataclass(frozen=True)
class Rfcomm:
    channel: int
    payload: bytes = b""


@dataclass(frozen=True)
class Sco:
    handle: int
    payload: bytes = b""


Layer = Union[HciCmd, HciEvt, L2cap, Rfcomm, Sco]
Direction = Literal["sent", "received"]


@dataclass(frozen=True)
class Packet:
    direction: Direction
    logical_time: int
    src: BdAddr
    dst: BdAddr
    layer: Layer

    @property
    def dlen(self) -> int:
        return len(self.layer.payload)

    @property
    def kind(self) -> str:
        layer = self.layer
        if isinstance(layer, (HciCmd, HciEvt, L2cap)):
            return layer.kind
        if isinstance(layer, Rfcomm):
            return "RFCOMM data"
        return "SCO data"

    @property
    def layer_tag(self) -> str:
        return {HciCmd: "HCI_CMD", HciEvt: "HCI_EVT", L2cap: "L2CAP",
                Rfcomm: "RFCOMM", Sco: "SCO"}[type(self.layer)]


class CaptureLog:
    """Append-only, time-ordered packet list filled by a medium tap."""

    def __init__(self, owner: Optional[str] = None):
        self.owner = owner
        self._packets: list[Packet] = []

    def append(self, packet: Packet) -> None:
        if self._packets and packet.logical_time <= self._packets[-1].logical_time:
            raise ValueError("capture log times must be strictly increasing")
        self._packets.append(packet)

    @property
    def packets(self) -> tuple[Packet, ...]:
        return tuple(self._packets)

    def kinds(self) -> list[tuple[str, str]]:
        return [(p.layer_tag, p.kind) for p in self._packets]

    def __iter__(self) -> Iterator[Packet]:
        return iter(tuple(self._packets))

    def __len__(self) -> int:
        return len(self._packets)

    def __getitem__(self, idx):
        return self._packets[idx]


# -----------------------------------------------------------------------------
# Piconets
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class Piconet:
    master: BdAddr
    active_slaves: tuple[BdAddr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "master", BdAddr.coerce(self.master))
        slaves = tuple(BdAddr.coerce(s) for s in self.active_slaves)
        if len(set(slaves)) != len(slaves):
            raise AlreadyMember("duplicate slave in piconet")
        if self.master in slaves:
            raise AlreadyMember("the master cannot be its own slave")
        if len(slaves) > MAX_ACTIVE_SLAVES:
            raise PiconetFull(f"a piconet holds at most {MAX_ACTIVE_SLAVES} active slaves")
        object.__setattr__(self, "active_slaves", slaves)


# -----------------------------------------------------------------------------
# Simulation
# -----------------------------------------------------------------------------
class Simulation:
    """One deterministic simulated radio neighbourhood."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock = 0
        self._devices: list[Device] = []
        self._taps: list[CaptureLog] = []
        self._next_sco_handle = 6
        self._next_acl_handle = 11
        self._acl_handles: dict[frozenset, int] = {}
        # stack-level session tables, keyed by (local, remote, channel) / SCO handle
        self.rfcomm_sessions: dict[tuple, object] = {}
        self.sco_cursors: dict[int, int] = {}

    # registry ----------------------------------------------------------------
    def register_device(self, profile: DeviceProfile) -> Device:
        if self.lookup(profile.addr) is not None:
            raise DuplicateAddress(f"{profile.addr} is already registered")
        device = Device(len(self._devices), profile)
        self._devices.append(device)
        return device

    @property
    def devices(self) -> tuple[Device, ...]:
        return tuple(self._devices)

    def lookup(self, addr: AddrLike) -> Optional[Device]:
        """Device answering to ``addr``; its original registrant wins over clones."""
        addr = BdAddr.coerce(addr)
        holders = [d for d in self._devices if d.addr == addr]
        for device in holders:
            if device.registered_addr == addr:
                return device
        return holders[0] if holders else None

    def device(self, addr: AddrLike) -> Device:
        if isinstance(addr, Device):
            return addr
        found = self.lookup(addr)
        if found is None:
            raise UnknownDevice(f"no device registered at {BdAddr.coerce(addr)}")
        return found

    def registrant(self, addr: AddrLike) -> Device:
        """Device that registered with ``addr``, wherever its adapter points now."""
        addr = BdAddr.coerce(addr)
        for device in self._devices:
            if device.registered_addr == addr:
                return device
        raise UnknownDevice(f"no device registered at {addr}")

    def inquiry(self, scanner: Device) -> list[tuple[BdAddr, str, DeviceClass]]:
        if scanner.crashed:
            raise ScannerCrashed(f"{scanner.addr} is crashed")
        return [
            (d.addr, d.name, d.profile.device_class)
            for d in self._devices
            if d is not scanner and d.profile.discoverable and not d.crashed
        ]

    # medium --------------------------------------------------------------------
    def tap(self, owner: Optional[str] = None) -> CaptureLog:
        log = CaptureLog(owner)
        self._taps.append(log)
        return log

    def untap(self, log: CaptureLog) -> None:
        self._taps.remove(log)

    def emit(self, sender: Device, dst: AddrLike, layer: Layer,
             direction: Direction = "sent") -> Packet:
        if sender.crashed:
            raise TargetCrashed(f"{sender.addr} is crashed and cannot transmit")
        self.clock += 1
        packet = Packet(direction, self.clock, sender.addr, BdAddr.coerce(dst), layer)
        for log in self._taps:
            log.append(packet)
        return packet

    def acl_handle(self, a: AddrLike, b: AddrLike) -> int:
        key = frozenset((BdAddr.coerce(a), BdAddr.coerce(b)))
        if key not in self._acl_handles:
            self._acl_handles[key] = self._next_acl_handle
            self._next_acl_handle += 1
        return self._acl_handles[key]

    def new_sco_handle(self) -> int:
        handle = self._next_sco_handle
        self._next_sco_handle += 1
        return handle

    # piconets ------------------------------------------------------------------
    def attach_slave(self, piconet: Piconet, slave: AddrLike) -> Piconet:
        slave = BdAddr.coerce(slave)
        device = self.device(slave)
        if device.crashed:
            raise TargetCrashed(f"{slave} is crashed")
        if slave == piconet.master or slave in piconet.active_slaves:
            raise AlreadyMember(f"{slave} is already in the piconet")
        if len(piconet.active_slaves) >= MAX_ACTIVE_SLAVES:
            raise PiconetFull(f"piconet of {piconet.master} already has "
                              f"{MAX_ACTIVE_SLAVES} active slaves")
        return replace(piconet, active_slaves=piconet.active_slaves + (slave,))

    def piconet_exchange(self, piconet: Piconet, slave: AddrLike,
                         payload: bytes = b"poll") -> bool:
        """One master->slave data exchange; False if the master lost sync."""
        slave = BdAddr.coerce(slave)
        if slave not in piconet.active_slaves:
            raise UnknownDevice(f"{slave} is not an active slave of {piconet.master}")
        master = self.device(piconet.master)
        self.emit(master, slave, L2cap("Connection oriented channel", cid=0x0040,
                                       payload=payload))
        if slave in master.desynchronized:
            master.desynchronized.discard(slave)
            return False
        target = self.device(slave)
        if target.crashed:
            return False
        self.emit(target, master.addr, L2cap("Connection oriented channel", cid=0x0040,
                                             payload=payload), direction="received")
        return True


def register_all(sim: Simulation, profiles: Sequence[DeviceProfile]) -> list[Device]:
    return [sim.register_device(p) for p in profiles]
