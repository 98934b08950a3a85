"""Stack-smasher style L2CAP fuzzing and echo-flood DoS."""

from __future__ import annotations

import enum

from .. import stack
from ..errors import Timeout
from ..simcore import AddrLike, BdAddr, Device, L2cap, Simulation


class FuzzOutcome(enum.Enum):
    NO_EFFECT = "NoEffect"
    CRASHED = "Crashed"

    def __str__(self) -> str:
        return self.value


# modes 1-11 follow the L2CAP signaling command codes; 12 is random-payload echo
FUZZ_MODES = {
    1: "Command Reject",
    2: "Connection Request",
    3: "Connection Response",
    4: "Configure Request",
    5: "Configure Response",
    6: "Disconnection Request",
    7: "Disconnection Response",
    8: "Echo req",
    9: "Echo rsp",
    10: "Information Request",
    11: "Information Response",
    12: "Echo req",
}
ECHO_MODES = {8, 12}
LOOP_PACKETS = 16


def _payload(sim: Simulation, mode: int, size: int) -> bytes:
    if mode == 12:
        return sim.rng.randbytes(size)
    return stack.echo_payload(size)


def fuzz(sim: Simulation, attacker: Device, target: AddrLike, mode: int = 12,
         size: int = 1000, loop: bool = False) -> FuzzOutcome:
    """Send the malformed packet family for ``mode``.

    Only echo modes reach the echo handler, so only firmware flagged with
    the echo overflow bug can be knocked over.  ``loop`` repeats the packet
    a fixed number of times, stopping once the target goes silent.
    """
    if mode not in FUZZ_MODES:
        raise ValueError(f"fuzz mode must be 1-12, got {mode}")
    if size < 0:
        raise ValueError("size must be non-negative")
    target = BdAddr.coerce(target)
    dev = sim.lookup(target)
    if dev is None or dev.crashed:
        raise Timeout(f"{target} does not respond")

    for _ in range(LOOP_PACKETS if loop else 1):
        payload = _payload(sim, mode, size)
        if mode in ECHO_MODES:
            stack.send_echo(sim, attacker, target, payload)
        else:
            sim.emit(attacker, target, L2cap(FUZZ_MODES[mode], cid=0x0001, payload=payload))
        if dev.crashed:
            return FuzzOutcome.CRASHED
    return FuzzOutcome.NO_EFFECT
