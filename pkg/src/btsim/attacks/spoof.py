"""Identity cloning (name, class and address) of a victim device."""

from __future__ import annotations

from .. import stack
from ..simcore import AddrLike, BdAddr, Device, HciCmd, HciEvt, Simulation
from ..stack import AdapterInfo


def spoof(sim: Simulation, attacker: Device, victim: AddrLike) -> AdapterInfo:
    """Adopt the victim's name, class and address.

    The victim stays registered; traffic addressed to the shared address is
    still delivered to the victim, while inquiry now lists the identity twice.
    """
    victim = BdAddr.coerce(victim)
    name = stack.remote_name(sim, attacker, victim)
    original = sim.device(victim)
    sim.emit(attacker, victim, HciCmd.of("Read Class of Device"))
    cod = original.profile.device_class.cod
    sim.emit(original, attacker.addr, HciEvt.of("Command Complete", status=0, cod=cod),
             direction="received")
    stack.set_class(sim, attacker, cod)
    stack.set_name(sim, attacker, name)
    return stack.set_addr(sim, attacker, victim, clone=True)


def restore(sim: Simulation, attacker: Device, snapshot: AdapterInfo) -> AdapterInfo:
    """Undo a spoof by reapplying a saved :func:`stack.adapter_info` snapshot."""
    stack.set_class(sim, attacker, snapshot.cod)
    stack.set_name(sim, attacker, snapshot.name)
    return stack.set_addr(sim, attacker, snapshot.addr)


def render_spoof(before: AdapterInfo, after: AdapterInfo) -> str:
    return "\n".join([
        f"Class Set: 0x{after.cod:06x}",
        f"Name Set: {after.name}",
        f"Manufacturer: {after.manufacturer}",
        f"Device address: {before.addr}",
        f"New BD address: {after.addr}",
    ])
