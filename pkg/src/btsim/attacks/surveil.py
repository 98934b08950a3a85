"""Permissionless device audit: name, LMP info, features, SDP, PSM/RFCOMM scans."""

from __future__ import annotations

from dataclasses import dataclass

from .. import stack
from ..simcore import AddrLike, BdAddr, Device, HciCmd, HciEvt, ServiceRecord, Simulation

# LMP feature mask page 0, octet by octet, LSB first
LMP_FEATURES = [
    ["<3-slot packets>", "<5-slot packets>", "<encryption>", "<slot offset>",
     "<timing accuracy>", "<role switch>", "<hold mode>", "<sniff mode>"],
    ["<park state>", "<RSSI>", "<channel quality>", "<SCO link>",
     "<HV2 packets>", "<HV3 packets>", "<u-law log>", "<A-law log>"],
    ["<CVSD>", "<paging scheme>", "<power control>", "<transparent SCO>",
     None, None, None, "<broadcast encrypt>"],
    [None, "<EDR ACL 2 Mbps>", "<EDR ACL 3 Mbps>", "<enhanced iscan>",
     "<interlaced iscan>", "<interlaced pscan>", "<inquiry with RSSI>", "<extended SCO>"],
    ["<EV4 packets>", "<EV5 packets>", None, "<AFH cap. slave>",
     "<AFH class. slave>", "<no BR/EDR>", "<LE support>", "<3-slot EDR ACL>"],
    ["<5-slot EDR ACL>", "<sniff subrating>", "<pause encryption>", "<AFH cap. master>",
     "<AFH class. master>", "<EDR eSCO 2 Mbps>", "<EDR eSCO 3 Mbps>", "<3-slot EDR eSCO>"],
    ["<extended inquiry>", "<LE and BR/EDR>", None, "<simple pairing>",
     "<encapsulated PDU>", "<err. data report>", "<non-flush flag>", None],
    ["<LSTO>", "<inquiry TX power>", "<EPC>", None, None, None, None, "<extended features>"],
]

UUID_NAMES = {
    0x0001: "SDP", 0x0003: "RFCOMM", 0x0008: "OBEX", 0x000F: "BNEP", 0x0100: "L2CAP",
    0x1101: "SerialPort", 0x1105: "OBEXObjectPush", 0x1106: "OBEXFileTransfer",
    0x1108: "Headset", 0x110E: "AVRemote", 0x1112: "Headset AG", 0x1115: "PANU",
    0x1116: "NAP (PAN/BNEP)", 0x111E: "Handsfree", 0x111F: "Handsfree AG",
    0x112F: "Phonebook Access - PSE",
}


def feature_names(features: bytes) -> list[str]:
    return [name for octet, names in zip(features, LMP_FEATURES)
            for bit, name in enumerate(names) if name and octet >> bit & 1]


def lmp_version_text(dev: Device) -> str:
    major, minor, _ = dev.profile.lmp_version
    return f"{major}.{minor} (0x{dev.profile.lmp_version_code:x})"


@dataclass(frozen=True)
class AuditReport:
    addr: BdAddr
    name: str
    lmp_version: str
    lmp_subversion: int
    manufacturer: str
    features: bytes
    records: tuple[ServiceRecord, ...]
    open_psms: tuple[int, ...]
    open_channels: tuple[int, ...]

    @property
    def fingerprint(self) -> tuple:
        """Blueprinting key: stack vendor, version and published services."""
        return (self.lmp_version, self.lmp_subversion, self.manufacturer,
                tuple((r.service_class_uuid16, r.protocol_descriptors) for r in self.records))

    def render(self) -> str:
        lines = [
            f"BD Address: {self.addr}",
            f"Device Name: {self.name}",
            f"LMP Version: {self.lmp_version} LMP Subversion: 0x{self.lmp_subversion:x}",
            f"Manufacturer: {self.manufacturer}",
            "Features: " + " ".join(f"0x{b:02x}" for b in self.features),
        ]
        names = feature_names(self.features)
        for i in range(0, len(names), 5):
            lines.append("\t" + " ".join(names[i:i + 5]))
        for rec in self.records:
            lines += [
                "",
                "Attribute Identifier : 0x0 - ServiceRecordHandle",
                f"  Integer : 0x{rec.handle:x}",
                "Attribute Identifier : 0x1 - ServiceClassIDList",
                "  Data Sequence",
                f"    UUID16 : 0x{rec.service_class_uuid16:04x} - "
                f"{UUID_NAMES.get(rec.service_class_uuid16, rec.name or 'unknown')}",
                "Attribute Identifier : 0x4 - ProtocolDescriptorList",
                "  Data Sequence",
            ]
            for uuid, port in rec.protocol_descriptors:
                lines += [
                    "    Data Sequence",
                    f"      UUID16 : 0x{uuid:04x} - {UUID_NAMES.get(uuid, 'unknown')}",
                    f"      Channel/Port (Integer) : 0x{port:x}",
                ]
        lines.append("")
        lines.append("Open L2CAP PSMs: " + (" ".join(f"0x{p:04x}" for p in self.open_psms) or "none"))
        lines.append("Open RFCOMM channels: "
                     + (" ".join(str(c) for c in self.open_channels) or "none"))
        return "\n".join(lines)


def surveil(sim: Simulation, attacker: Device, target: AddrLike) -> AuditReport:
    """Audit ``target`` by direct addressing; no pairing, no discoverability needed."""
    target = BdAddr.coerce(target)
    name = stack.remote_name(sim, attacker, target)
    dev = sim.device(target)
    handle = sim.acl_handle(attacker.addr, target)
    sim.emit(attacker, target, HciCmd.of("Read Remote Version Information", handle=handle))
    sim.emit(dev, attacker.addr, HciEvt.of("Read Remote Version Complete", status=0,
                                           handle=handle, lmp_ver=dev.profile.lmp_version_code,
                                           subver=dev.profile.lmp_version[2]),
             direction="received")
    sim.emit(attacker, target, HciCmd.of("Read Remote Supported Features", handle=handle))
    sim.emit(dev, attacker.addr, HciEvt.of("Read Remote Supported Features", status=0,
                                           handle=handle), direction="received")
    records = stack.sdp_browse(sim, attacker, target)
    psms = stack.psm_scan(sim, attacker, target)
    channels = stack.rfcomm_scan(sim, attacker, target)
    return AuditReport(
        addr=target,
        name=name,
        lmp_version=lmp_version_text(dev),
        lmp_subversion=dev.profile.lmp_version[2],
        manufacturer=stack.manufacturer_text(dev),
        features=bytes(dev.profile.features),
        records=tuple(records),
        open_psms=tuple(psms),
        open_channels=tuple(channels),
    )
