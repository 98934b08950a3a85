"""Ready-made profiles for the nine-device lab: three PCs, four phones, two headsets.

Addresses and names are the lab's real ones.  Phonebook numbers, IMEIs and
audio are fixtures: only their visible prefixes are known, the rest is
filler.
"""

from __future__ import annotations

from .simcore import Contact, DeviceProfile, FirmwareFlags, ServiceRecord, Simulation

PC_CLASS = 0x5A0100
PHONE_CLASS = 0x500204
HEADSET_CLASS = 0x200404

NOKIA_FEATURES = bytes([0xBF, 0xEE, 0x0F, 0xCE, 0x98, 0x39, 0x00, 0x00])

NAP_RECORD = ServiceRecord(0x10000, 0x1116, ((0x0100, 0x000F), (0x000F, 0x0100)),
                           "Network Access Point")


def _phone_records(base: int = 0x10001) -> list[ServiceRecord]:
    return [
        ServiceRecord(base, 0x1101, ((0x0100, 0x0003), (0x0003, 1)), "Serial Port"),
        ServiceRecord(base + 1, 0x1105, ((0x0100, 0x0003), (0x0003, 9), (0x0008, 0)),
                      "OBEX Object Push"),
        ServiceRecord(base + 2, 0x111F, ((0x0100, 0x0003), (0x0003, 13)), "Handsfree AG"),
    ]


NOKIA6230I_CONTACTS = [
    Contact(1, "rahim", "+923216614455"),
    Contact(2, "karim", "+46765812233"),
    Contact(3, "rajib", "+46763464411"),
    Contact(4, "mutmain", "0736471290"),
    Contact(16, "Asif", "03006501122"),
]


def pc(name: str, addr: str) -> DeviceProfile:
    return DeviceProfile(addr=addr, name=name, device_class=PC_CLASS, security_mode=2,
                         lmp_version=(2, 1, 0x4203), features=NOKIA_FEATURES)


def pc_robayet() -> DeviceProfile:
    return pc("pc-robayet", "00:24:2C:B4:07:3B")


def pc_jishan() -> DeviceProfile:
    return pc("pc-jishan", "00:22:69:FD:F1:ED")


def pc_dihan() -> DeviceProfile:
    return pc("pc-dihan", "00:26:5E:C2:EA:08")


def v630i(**firmware) -> DeviceProfile:
    return DeviceProfile(
        addr="00:19:63:9A:1A:BE", name="v630i", device_class=PHONE_CLASS, security_mode=2,
        lmp_version=(2, 0, 0x0E11), manufacturer=("Ericsson Technology Licensing", 0),
        services=_phone_records(), vendor="Sony Ericsson", model="V630i",
        revision="R1A081", imei="35409400123456", capabilities="+CGSM,+FCLASS,+DS",
        contacts=[Contact(1, "home", "+4687001122")],
        firmware=FirmwareFlags(**firmware))


def w715(**firmware) -> DeviceProfile:
    return DeviceProfile(
        addr="00:25:E7:27:86:D1", name="w715", device_class=PHONE_CLASS, security_mode=2,
        lmp_version=(2, 1, 0x0E2A), manufacturer=("Ericsson Technology Licensing", 0),
        services=_phone_records(), vendor="Sony Ericsson", model="W715",
        revision="R1GA028", imei="35837203654321", capabilities="+CGSM,+DS",
        firmware=FirmwareFlags(**firmware))


def nokia6500s(**firmware) -> DeviceProfile:
    return DeviceProfile(
        addr="00:21:AA:83:80:A7", name="nokia6500s", device_class=PHONE_CLASS,
        security_mode=2, lmp_version=(2, 0, 0x2222), features=NOKIA_FEATURES,
        services=[NAP_RECORD] + _phone_records(), vendor="Nokia", model="Nokia 6500S-1",
        revision="V 06.60 07-03-08 RM-240 (c) Nokia", imei="3B48370281800",
        capabilities="+CGSM,+DS,+W", firmware=FirmwareFlags(**firmware))


def nokia6230i(**firmware) -> DeviceProfile:
    return DeviceProfile(
        addr="00:12:D2:4B:0D:70", name="nokia6230i", device_class=PHONE_CLASS,
        security_mode=2, lmp_version=(1, 2, 0x0420), services=_phone_records(),
        vendor="Nokia", model="Nokia 6230i", revision="V 03.88 26-01-06 RM-72 (c) Nokia",
        imei="35567300112233", capabilities="+CGSM,+DS,+W",
        contacts=list(NOKIA6230I_CONTACTS), calendar=["2011-05-02 thesis defence"],
        firmware=FirmwareFlags(**firmware))


def _headset(name: str, addr: str, ambient: bytes, **firmware) -> DeviceProfile:
    firmware.setdefault("fixed_pin", "0000")
    firmware.setdefault("auto_accept_connections", True)
    return DeviceProfile(
        addr=addr, name=name, device_class=HEADSET_CLASS, security_mode=2,
        lmp_version=(2, 0, 0x0200), manufacturer=("Cambridge Silicon Radio", 10),
        services=[ServiceRecord(0x10000, 0x1108, ((0x0100, 0x0003), (0x0003, 1)), "Headset"),
                  ServiceRecord(0x10001, 0x111E, ((0x0100, 0x0003), (0x0003, 2)), "Handsfree")],
        ambient_audio=ambient, brsf=63, firmware=FirmwareFlags(**firmware))


def wep250(ambient: bytes = b"", **firmware) -> DeviceProfile:
    return _headset("Wep250", "00:21:19:06:6A:FA", ambient, **firmware)


def btc5(ambient: bytes = b"", **firmware) -> DeviceProfile:
    return _headset("Btc5", "00:07:B0:11:8F:6D", ambient, **firmware)


ALL = (pc_robayet, pc_jishan, pc_dihan, v630i, w715, nokia6500s, nokia6230i, wep250, btc5)


def lab(seed: int = 0) -> Simulation:
    """Simulation with every lab device registered in table order."""
    sim = Simulation(seed)
    for make in ALL:
        sim.register_device(make())
    return sim
