"""Headset audio injection and eavesdropping (car-whisperer style)."""

from __future__ import annotations

from dataclasses import dataclass

from .. import stack
from ..simcore import AddrLike, BdAddr, Device, Simulation

BRSF_QUERY = "AT+BRSF=26"


@dataclass(frozen=True)
class WhisperResult:
    recorded: bytes
    handshake: tuple[tuple[str, str], ...]
    sco_handle: int
    voice_setting: int
    mtu: int

    def render(self, channel: int = 1) -> str:
        lines = [
            f"Voice setting: 0x{self.voice_setting:04x}",
            "RFCOMM channel connected",
            f"SCO audio channel connected (handle {self.sco_handle}, mtu {self.mtu})",
        ]
        for got, answered in self.handshake:
            lines += [f"got: {got}", f"answered: {answered}"]
        lines.append(f"recorded {len(self.recorded)} bytes")
        return "\n".join(lines)


def whisper(sim: Simulation, attacker: Device, headset: AddrLike, inject: bytes,
            channel: int = 1) -> WhisperResult:
    """Stream ``inject`` into the headset while recording its microphone.

    Frames alternate send/receive in MTU-sized chunks until both streams
    are exhausted, so nothing is lost or reordered in either direction.
    """
    headset = BdAddr.coerce(headset)
    ep = stack.rfcomm_connect(sim, attacker, headset, channel)
    try:
        answer = stack.at_execute(sim, ep, BRSF_QUERY)
        ch = stack.sco_open(sim, ep)
        recorded = bytearray()
        pos = 0
        while True:
            sent = False
            if pos < len(inject):
                stack.sco_send(sim, ch, inject[pos:pos + ch.mtu])
                pos += ch.mtu
                sent = True
            frame = stack.sco_recv(sim, ch)
            recorded += frame
            if not sent and not frame:
                break
        stack.sco_close(sim, ch)
    finally:
        stack.rfcomm_close(sim, ep)
    return WhisperResult(bytes(recorded), ((BRSF_QUERY, answer),), ch.handle,
                         ch.voice_setting, ch.mtu)
