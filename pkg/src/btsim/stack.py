"""Simplified protocol layers: HCI adapter control, L2CAP, SDP, RFCOMM, OBEX,
AT commands and SCO audio.

Every function takes the owning :class:`~btsim.simcore.Simulation` first.
Local adapters are passed as :class:`~btsim.simcore.Device` handles, remote
peers by address, so that directly addressed traffic always resolves to the
original registrant of an address.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from itertools import cycle, islice
from typing import Optional

from .errors import (
    AuthRequired,
    BadChannel,
    DuplicateAddress,
    FrameTooLarge,
    HostUnreachable,
    NoSession,
    NotFound,
    Refused,
    Timeout,
)
from .simcore import (
    L2CAP_UUID,
    RFCOMM_UUID,
    AddrLike,
    BdAddr,
    Contact,
    Device,
    DeviceClass,
    HciCmd,
    HciEvt,
    L2cap,
    Rfcomm,
    Sco,
    ServiceRecord,
    Simulation,
)

logger = logging.getLogger(__name__)

L2CAP_DEFAULT_MTU = 672
SCO_MTU = 64
VOICE_SETTING_CVSD = 0x0060
RFCOMM_CHANNELS = range(1, 31)
PSM_PROBE_RANGE = range(0x0001, 0x1002, 2)
SDP_PSM = 0x0001
RFCOMM_PSM = 0x0003

ECHO_PATTERN = bytes(range(0x41, 0x69))  # 'A'..'h', repeated by l2ping


# -----------------------------------------------------------------------------
# Adapter control
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class AdapterInfo:
    addr: BdAddr
    name: str
    cod: int
    service_classes: str
    device_class_text: str
    manufacturer: str

    def render(self, iface: str = "hci0") -> str:
        return "\n".join([
            f"{iface}:",
            "\tType: BR/EDR  Bus: USB",
            f"\tBD Address: {self.addr}  ACL MTU: 1021:8  SCO MTU: 64:1",
            f"\tName: '{self.name}'",
            f"\tClass: 0x{self.cod:06x}",
            f"\tService Classes: {self.service_classes or 'Unspecified'}",
            f"\tDevice Class: {self.device_class_text}",
            f"\tManufacturer: {self.manufacturer}",
        ])


def manufacturer_text(device: Device) -> str:
    name, ident = device.profile.manufacturer
    return f"{name} ({ident})"


def adapter_info(dev: Device) -> AdapterInfo:
    cls = dev.profile.device_class
    return AdapterInfo(
        addr=dev.addr,
        name=dev.name,
        cod=cls.cod,
        service_classes=cls.service_classes_text(),
        device_class_text=cls.device_class_text(),
        manufacturer=manufacturer_text(dev),
    )


def set_name(sim: Simulation, dev: Device, name: str) -> AdapterInfo:
    dev.profile.name = name
    return adapter_info(dev)


def set_class(sim: Simulation, dev: Device, cod: int) -> AdapterInfo:
    dev.profile.device_class = DeviceClass(cod)
    return adapter_info(dev)


def set_addr(sim: Simulation, dev: Device, addr: AddrLike, *, clone: bool = False) -> AdapterInfo:
    """Rewrite the adapter address.

    Taking an address held by another live device is refused unless
    ``clone`` is set; clones coexist with the original registrant.
    """
    addr = BdAddr.coerce(addr)
    holder = sim.lookup(addr)
    if holder is not None and holder is not dev and not clone:
        raise DuplicateAddress(f"{addr} belongs to {holder.name!r}")
    dev.profile.addr = addr
    return adapter_info(dev)


def _resolve(sim: Simulation, addr: AddrLike) -> Device:
    """Remote peer by address, raising Timeout when nobody answers."""
    addr = BdAddr.coerce(addr)
    target = sim.lookup(addr)
    if target is None:
        raise HostUnreachable(f"no answer from {addr}")
    if target.crashed:
        raise Timeout(f"{addr} does not respond")
    return target


def remote_name(sim: Simulation, src: Device, dst: AddrLike) -> str:
    dst = BdAddr.coerce(dst)
    sim.emit(src, dst, HciCmd.of("Remote Name Request", bdaddr=dst))
    target = _resolve(sim, dst)
    sim.emit(target, src.addr, HciEvt.of("Remote Name Req Complete", status=0,
                                         bdaddr=dst, name=target.name),
             direction="received")
    return target.name


# -----------------------------------------------------------------------------
# L2CAP echo
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class PingStats:
    sent: int
    received: int
    replies: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.received > self.sent:
            raise ValueError("cannot receive more echoes than were sent")

    @property
    def loss_percent(self) -> int:
        if self.sent == 0:
            return 0
        return round(100 * (self.sent - self.received) / self.sent)

    def summary(self) -> str:
        return f"{self.sent} sent, {self.received} received, {self.loss_percent}% loss"


def echo_payload(size: int) -> bytes:
    if size < 0:
        raise ValueError("echo size must be non-negative")
    return bytes(islice(cycle(ECHO_PATTERN), size))


def l2cap_echo_handle(sim: Simulation, dev: Device, payload: bytes) -> Optional[bytes]:
    """Process one echo request at ``dev``; ``None`` means no response.

    Oversized requests crash firmware carrying the echo overflow bug.
    """
    if dev.crashed:
        return None
    if len(payload) > L2CAP_DEFAULT_MTU and dev.profile.firmware.echo_overflow_crash:
        logger.info("%s crashed on %d-byte echo request", dev.addr, len(payload))
        dev.profile.crashed = True
        return None
    return payload


def send_echo(sim: Simulation, src: Device, dst: AddrLike, payload: bytes) -> Optional[bytes]:
    """One echo request/response exchange over the medium."""
    dst = BdAddr.coerce(dst)
    sim.emit(src, dst, L2cap("Echo req", cid=0x0001, payload=payload))
    target = sim.lookup(dst)
    if target is None:
        return None
    reply = l2cap_echo_handle(sim, target, payload)
    if reply is None:
        return None
    sim.emit(target, src.addr, L2cap("Echo rsp", cid=0x0001, payload=reply),
             direction="received")
    return reply


def l2ping(sim: Simulation, src: Device, dst: AddrLike, count: int = 5,
           delay: float = 1.0, size: int = 44) -> PingStats:
    """Send ``count`` echo requests; ``delay`` only affects display timing."""
    dst = BdAddr.coerce(dst)
    if sim.lookup(dst) is None:
        raise HostUnreachable(f"Can't connect: Host is down ({dst})")
    payload = echo_payload(size)
    replies = []
    for ident in range(count):
        if send_echo(sim, src, dst, payload) is not None:
            replies.append((ident, round(sim.rng.uniform(1.0, 50.0), 2)))
    return PingStats(sent=count, received=len(replies), replies=tuple(replies))


def render_ping(src: Device, dst: AddrLike, size: int, stats: PingStats) -> str:
    lines = [f"Ping: {BdAddr.coerce(dst)} from {src.addr} (data size {size}) ..."]
    for ident, ms in stats.replies:
        lines.append(f"{size} bytes from {BdAddr.coerce(dst)} id {ident} time {ms:.2f}ms")
    lines.append(stats.summary())
    return "\n".join(lines)


# -----------------------------------------------------------------------------
# SDP and port scans
# -----------------------------------------------------------------------------
def sdp_browse(sim: Simulation, requester: Device, target: AddrLike) -> list[ServiceRecord]:
    target = BdAddr.coerce(target)
    sim.emit(requester, target, L2cap("SDP Service Search Attribute Req", cid=0x0040,
                                      psm=SDP_PSM, payload=b"\x35\x03\x19\x10\x02"))
    dev = _resolve(sim, target)
    records = list(dev.profile.services)
    sim.emit(dev, requester.addr,
             L2cap("SDP Service Search Attribute Rsp", cid=0x0040, psm=SDP_PSM,
                   payload=len(records).to_bytes(2, "big")),
             direction="received")
    return records


def _open_ports(dev: Device, protocol_uuid: int) -> set[int]:
    return {port for rec in dev.profile.services for port in rec.ports(protocol_uuid)}


def psm_scan(sim: Simulation, requester: Device, target: AddrLike) -> list[int]:
    """Probe every odd PSM in 0x0001..0x1001 with a connection request."""
    target = BdAddr.coerce(target)
    dev = _resolve(sim, target)
    open_psms = _open_ports(dev, L2CAP_UUID)
    found = []
    for psm in PSM_PROBE_RANGE:
        sim.emit(requester, target, L2cap("Connection Request", psm=psm))
        result = 0x0000 if psm in open_psms else 0x0002  # success / PSM not supported
        sim.emit(dev, requester.addr,
                 L2cap("Connection Response", psm=psm, payload=result.to_bytes(2, "little")),
                 direction="received")
        if psm in open_psms:
            found.append(psm)
    return found


def rfcomm_scan(sim: Simulation, requester: Device, target: AddrLike) -> list[int]:
    target = BdAddr.coerce(target)
    dev = _resolve(sim, target)
    open_channels = _open_ports(dev, RFCOMM_UUID)
    found = []
    for channel in RFCOMM_CHANNELS:
        sim.emit(requester, target, Rfcomm(channel, b""))
        if channel in open_channels:
            sim.emit(dev, requester.addr, Rfcomm(channel, b""), direction="received")
            found.append(channel)
    return found


# -----------------------------------------------------------------------------
# RFCOMM
# -----------------------------------------------------------------------------
@dataclass
class RfcommEndpoint:
    local: BdAddr
    remote: BdAddr
    channel: int
    open: bool = True
    authenticated: bool = False

    @property
    def key(self) -> tuple[BdAddr, BdAddr, int]:
        return (self.local, self.remote, self.channel)

    def device_path(self, index: int = 0) -> str:
        return f"/dev/rfcomm{index}"


def needs_confirmation(dev: Device) -> bool:
    fw = dev.profile.firmware
    return dev.profile.security_mode >= 2 and not fw.auto_accept_connections and fw.fixed_pin is None


def rfcomm_connect(sim: Simulation, src: Device, dst: AddrLike, channel: int = 1) -> RfcommEndpoint:
    """Open an RFCOMM channel, asking the remote user when its policy says so.

    A user-accepted prompt, a fixed-PIN auto-pairing or an existing bond
    all count as an authenticated association.
    """
    if channel not in RFCOMM_CHANNELS:
        raise BadChannel(f"RFCOMM channel must be 1-30, got {channel}")
    dst = BdAddr.coerce(dst)
    key = (src.addr, dst, channel)
    existing = sim.rfcomm_sessions.get(key)
    if existing is not None and existing.open:
        return existing

    sim.emit(src, dst, L2cap("Connection Request", psm=RFCOMM_PSM))
    dev = _resolve(sim, dst)
    authenticated = src.addr in dev.bonds
    if not authenticated and needs_confirmation(dev):
        logger.info("%s prompts: Connect with %s?", dev.name, src.name)
        if not dev.profile.user_accepts:
            sim.emit(dev, src.addr, L2cap("Connection Response", psm=RFCOMM_PSM,
                                          payload=b"\x03\x00"), direction="received")
            raise Refused(f"{dev.name}: user declined 'Connect with {src.name}?'")
        authenticated = True
    elif dev.profile.firmware.fixed_pin is not None:
        authenticated = True
    sim.emit(dev, src.addr, L2cap("Connection Response", psm=RFCOMM_PSM,
                                  payload=b"\x00\x00"), direction="received")
    sim.emit(src, dst, Rfcomm(channel, b""))
    endpoint = RfcommEndpoint(src.addr, dst, channel, open=True, authenticated=authenticated)
    sim.rfcomm_sessions[key] = endpoint
    return endpoint


def rfcomm_close(sim: Simulation, endpoint: RfcommEndpoint) -> None:
    endpoint.open = False
    sim.rfcomm_sessions.pop(endpoint.key, None)


def _session_peer(sim: Simulation, endpoint: RfcommEndpoint) -> tuple[Device, Device]:
    if not endpoint.open:
        raise NoSession("RFCOMM endpoint is closed")
    local = sim.device(endpoint.local)
    return local, _resolve(sim, endpoint.remote)


# -----------------------------------------------------------------------------
# OBEX
# -----------------------------------------------------------------------------
PHONEBOOK_NAMES = ("pb.vcf", "telecom/pb.vcf", "pb.vcl")
CALENDAR_NAMES = ("cal.vcs", "telecom/cal.vcs")


def vcards(contacts: list[Contact]) -> bytes:
    out = []
    for c in sorted(contacts, key=lambda c: c.index):
        out += ["BEGIN:VCARD", f"N:{c.name}", f"TEL:{c.number}", "END:VCARD"]
    return ("\r\n".join(out) + "\r\n").encode() if out else b""


def vcalendar(entries: list[str]) -> bytes:
    out = ["BEGIN:VCALENDAR", "VERSION:1.0"]
    for entry in entries:
        out += ["BEGIN:VEVENT", f"SUMMARY:{entry}", "END:VEVENT"]
    out.append("END:VCALENDAR")
    return ("\r\n".join(out) + "\r\n").encode()


def obex_get(sim: Simulation, endpoint: RfcommEndpoint, object_name: str) -> bytes:
    local, dev = _session_peer(sim, endpoint)
    sim.emit(local, dev.addr, Rfcomm(endpoint.channel, b"GET " + object_name.encode()))
    if not dev.profile.firmware.obex_unauthenticated and not endpoint.authenticated:
        sim.emit(dev, local.addr, Rfcomm(endpoint.channel, b"\xc1"), direction="received")
        raise AuthRequired(f"{dev.name} requires an authenticated link for OBEX")
    if object_name in PHONEBOOK_NAMES:
        body = vcards(dev.profile.contacts)
    elif object_name in CALENDAR_NAMES:
        body = vcalendar(dev.profile.calendar)
    else:
        sim.emit(dev, local.addr, Rfcomm(endpoint.channel, b"\xc4"), direction="received")
        raise NotFound(object_name)
    sim.emit(dev, local.addr, Rfcomm(endpoint.channel, body), direction="received")
    return body


# -----------------------------------------------------------------------------
# AT commands
# -----------------------------------------------------------------------------
_CPBR_RE = re.compile(r"^AT\+CPBR=(\d+)(?:,(\d+))?$")
_CPBW_RE = re.compile(r"^AT\+CPBW=(\d+)$")
_BRSF_RE = re.compile(r"^AT\+BRSF=(\d+)$")
_DIAL_RE = re.compile(r"^ATD([+\d*#]+);$")


def at_response(profile, command: str) -> str:
    """Reply text for ``command``; depends only on the profile."""
    cmd = command.strip().upper()
    if _BRSF_RE.match(cmd):
        return f"+BRSF: {profile.brsf}"
    simple = {
        "AT+CGMI": profile.vendor,
        "AT+CGMM": profile.model,
        "AT+CGMR": profile.revision,
        "AT+CGSN": profile.imei,
        "AT+GCAP": f"+GCAP: {profile.capabilities}" if profile.capabilities else "",
    }
    if cmd in simple:
        return simple[cmd] or "ERROR"
    is_phone = profile.device_class.major_class == "Phone"
    if m := _CPBR_RE.match(cmd):
        lo = int(m.group(1))
        hi = int(m.group(2) or lo)
        lines = [
            f'+CPBR: {c.index},"{c.number}",{145 if c.number.startswith("+") else 129},"{c.name}"'
            for c in sorted(profile.contacts, key=lambda c: c.index) if lo <= c.index <= hi
        ]
        return "\n".join(lines + ["OK"]) if is_phone else "ERROR"
    if m := _CPBW_RE.match(cmd):
        index = int(m.group(1))
        return "OK" if is_phone and any(c.index == index for c in profile.contacts) else "ERROR"
    if _DIAL_RE.match(cmd):
        return "OK" if is_phone else "ERROR"
    if cmd in ("ATH", "AT+CHUP"):
        return "OK"
    return "ERROR"


def _apply_at_effects(dev: Device, command: str, response: str) -> None:
    if response == "ERROR":
        return
    cmd = command.strip().upper()
    if m := _DIAL_RE.match(cmd):
        dev.call_state = f"active:{m.group(1)}"
    elif cmd in ("ATH", "AT+CHUP"):
        dev.call_state = None
    elif m := _CPBW_RE.match(cmd):
        index = int(m.group(1))
        dev.profile.contacts = [c for c in dev.profile.contacts if c.index != index]


def at_execute(sim: Simulation, endpoint: RfcommEndpoint, command: str) -> str:
    local, dev = _session_peer(sim, endpoint)
    sim.emit(local, dev.addr, Rfcomm(endpoint.channel, (command.strip() + "\r").encode()))
    if not dev.profile.has_at_endpoint:
        response = "ERROR"
    else:
        response = at_response(dev.profile, command)
        _apply_at_effects(dev, command, response)
    wire = "\r\n" + response.replace("\n", "\r\n") + "\r\n"
    sim.emit(dev, local.addr, Rfcomm(endpoint.channel, wire.encode()), direction="received")
    return response


# -----------------------------------------------------------------------------
# SCO
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class ScoChannel:
    handle: int
    local: BdAddr
    remote: BdAddr
    mtu: int = SCO_MTU
    voice_setting: int = VOICE_SETTING_CVSD


def sco_open(sim: Simulation, endpoint: RfcommEndpoint) -> ScoChannel:
    """Attach an SCO link to an existing RFCOMM (service-level) session."""
    if endpoint is None or not endpoint.open:
        raise NoSession("SCO needs an open RFCOMM session")
    local, dev = _session_peer(sim, endpoint)
    sim.emit(local, dev.addr, HciCmd.of("Setup Synchronous Connection",
                                        handle=sim.acl_handle(local.addr, dev.addr),
                                        voice_setting=VOICE_SETTING_CVSD))
    handle = sim.new_sco_handle()
    sim.emit(dev, local.addr, HciEvt.of("Synchronous Connect Complete", status=0,
                                        handle=handle, bdaddr=dev.addr),
             direction="received")
    sim.sco_cursors[handle] = 0
    return ScoChannel(handle, local.addr, dev.addr)


def _sco_peer(sim: Simulation, ch: ScoChannel) -> tuple[Device, Device]:
    if ch.handle not in sim.sco_cursors:
        raise NoSession(f"SCO handle {ch.handle} is not connected")
    return sim.device(ch.local), _resolve(sim, ch.remote)


def sco_send(sim: Simulation, ch: ScoChannel, frame: bytes) -> None:
    if len(frame) > ch.mtu:
        raise FrameTooLarge(f"{len(frame)}-byte frame exceeds SCO MTU {ch.mtu}")
    local, dev = _sco_peer(sim, ch)
    sim.emit(local, dev.addr, Sco(ch.handle, bytes(frame)))
    dev.sink += frame


def sco_recv(sim: Simulation, ch: ScoChannel) -> bytes:
    """Next frame of the remote's ambient audio; ``b""`` once exhausted."""
    local, dev = _sco_peer(sim, ch)
    pos = sim.sco_cursors[ch.handle]
    frame = dev.profile.ambient_audio[pos:pos + ch.mtu]
    if frame:
        sim.sco_cursors[ch.handle] = pos + len(frame)
        sim.emit(dev, local.addr, Sco(ch.handle, frame), direction="received")
    return frame


def sco_close(sim: Simulation, ch: ScoChannel) -> None:
    sim.sco_cursors.pop(ch.handle, None)
