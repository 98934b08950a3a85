"""hcidump-style rendering of a capture log (``hcidump -X -V`` look)."""

from __future__ import annotations

from ..simcore import BdAddr, CaptureLog, HciCmd, HciEvt, L2cap, Packet, Rfcomm, Sco

BANNER = "HCI sniffer - Bluetooth packet analyzer ver 1.42"

# name -> (ogf, ocf, plen)
HCI_COMMANDS = {
    "Create Connection": (0x01, 0x0005, 13),
    "Authentication Requested": (0x01, 0x0011, 2),
    "PIN Code Request Reply": (0x01, 0x000D, 23),
    "Remote Name Request": (0x01, 0x0019, 10),
    "Read Remote Supported Features": (0x01, 0x001B, 2),
    "Read Remote Version Information": (0x01, 0x001D, 2),
    "Setup Synchronous Connection": (0x01, 0x0028, 17),
    "Delete Stored Link Key": (0x03, 0x0012, 7),
    "Read Class of Device": (0x03, 0x0023, 0),
    "Read Tx Power Level": (0x03, 0x002D, 3),
    "Read Link Quality": (0x05, 0x0003, 2),
    "Read RSSI": (0x05, 0x0005, 2),
}

# name -> (event code, plen)
HCI_EVENTS = {
    "Connect Complete": (0x03, 11),
    "Disconnect Complete": (0x05, 4),
    "Auth Complete": (0x06, 3),
    "Remote Name Req Complete": (0x07, 255),
    "Read Remote Supported Features": (0x0B, 11),
    "Read Remote Version Complete": (0x0C, 8),
    "Command Complete": (0x0E, 4),
    "Command Status": (0x0F, 4),
    "PIN Code Request": (0x16, 6),
    "Synchronous Connect Complete": (0x2C, 17),
    "Simple Pairing Complete": (0x36, 7),
}

_HEX_KEYS = {"status", "reason", "type", "delete_all", "voice_setting", "cod"}


def hexdump(data: bytes, indent: str = "    ") -> list[str]:
    """16 bytes per line: offset, hex column, ASCII column ('.' if unprintable)."""
    lines = []
    for off in range(0, len(data), 16):
        chunk = data[off:off + 16]
        hexpart = " ".join(f"{b:02x}" for b in chunk)
        text = "".join(chr(b) if 0x20 <= b < 0x7F else "." for b in chunk)
        lines.append(f"{indent}{off:04x}: {hexpart:<47}  {text}")
    return lines


def _param_text(params) -> str:
    parts = []
    for key, value in params:
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int) and key in _HEX_KEYS:
            text = f"0x{value:02x}" if key != "cod" else f"0x{value:06x}"
        elif key == "pin":
            text = f"'{value}'"
        else:
            text = str(value)
        parts.append(f"{key} {text}")
    return " ".join(parts)


class _Handles:
    """ACL handles assigned by first appearance of an address pair, from 11."""

    def __init__(self):
        self._map: dict[frozenset, int] = {}

    def __call__(self, a: BdAddr, b: BdAddr) -> int:
        key = frozenset((a, b))
        return self._map.setdefault(key, 11 + len(self._map))


def _render_packet(p: Packet, handles: _Handles) -> list[str]:
    arrow = "<" if p.direction == "sent" else ">"
    layer = p.layer
    if isinstance(layer, HciCmd):
        ogf, ocf, plen = HCI_COMMANDS.get(layer.kind, (0x3F, 0x0000, 0))
        out = [f"{arrow} HCI Command: {layer.kind} (0x{ogf:02x}|0x{ocf:04x}) plen {plen}"]
        if layer.params:
            out.append("    " + _param_text(layer.params))
        return out
    if isinstance(layer, HciEvt):
        code, plen = HCI_EVENTS.get(layer.kind, (0xFF, 0))
        out = [f"{arrow} HCI Event: {layer.kind} (0x{code:02x}) plen {plen}"]
        if layer.params:
            out.append("    " + _param_text(layer.params))
        return out

    handle = handles(p.src, p.dst)
    if isinstance(layer, L2cap):
        if layer.cid == 0x0001:
            out = [f"{arrow} ACL data: handle {handle} flags 0x02 dlen {len(layer.payload) + 8}"]
            desc = f"    L2CAP(s): {layer.kind}"
            if layer.psm is not None:
                desc += f": psm 0x{layer.psm:04x}"
            out.append(desc + f": dlen {len(layer.payload)}")
        else:
            out = [f"{arrow} ACL data: handle {handle} flags 0x02 dlen {len(layer.payload) + 4}"]
            psm = f" [psm {layer.psm}]" if layer.psm is not None else ""
            out.append(f"    L2CAP(d): cid 0x{layer.cid:04x} len {len(layer.payload)}{psm}")
            out.append(f"      {layer.kind}")
        return out + hexdump(layer.payload)
    if isinstance(layer, Rfcomm):
        n = len(layer.payload)
        return [
            f"{arrow} ACL data: handle {handle} flags 0x02 dlen {n + 8}",
            f"    L2CAP(d): cid 0x0040 len {n + 4} [psm 3]",
            f"      RFCOMM(d): UIH: channel {layer.channel} ilen {n}",
        ] + hexdump(layer.payload, indent="      ")
    if isinstance(layer, Sco):
        return [f"{arrow} SCO data: handle {layer.handle} dlen {len(layer.payload)}"] + hexdump(layer.payload)
    raise TypeError(f"unknown layer {type(layer).__name__}")


def sniff_format(log: CaptureLog, timestamps: bool = False) -> str:
    handles = _Handles()
    lines: list[str] = []
    for packet in log:
        rendered = _render_packet(packet, handles)
        if timestamps:
            rendered[0] = f"[{packet.logical_time:08d}] " + rendered[0]
        lines.extend(rendered)
    return "\n".join(lines) + ("\n" if lines else "")


def banner(device: str = "hci0") -> str:
    return f"{BANNER}\ndevice: {device} snap_len: 1028 filter: 0xffffffff\n"
