"""Piconet disruption by impersonating one of its slaves towards the master."""

from __future__ import annotations

from dataclasses import dataclass

from .. import stack
from ..errors import AlreadyMember, EmptyPiconet
from ..simcore import BdAddr, Device, HciCmd, HciEvt, Piconet, Simulation


@dataclass(frozen=True)
class ChopReport:
    master: BdAddr
    spoofed: BdAddr
    attacker_original: BdAddr

    def render(self) -> str:
        return (f"spoofed slave {self.spoofed} towards master {self.master} "
                f"(attacker was {self.attacker_original}); slave desynchronized")


def bluechop(sim: Simulation, attacker: Device, piconet: Piconet) -> ChopReport:
    if not piconet.active_slaves:
        raise EmptyPiconet(f"piconet of {piconet.master} has no active slaves")
    if attacker.addr == piconet.master or attacker.addr in piconet.active_slaves:
        raise AlreadyMember("the attacker must not be part of the target piconet")
    original = attacker.addr
    victim = sim.rng.choice(piconet.active_slaves)
    stack.set_addr(sim, attacker, victim, clone=True)
    master = sim.device(piconet.master)
    sim.emit(attacker, master.addr, HciCmd.of("Create Connection", bdaddr=master.addr,
                                              ptype="DM1 DH1"))
    sim.emit(master, attacker.addr, HciEvt.of("Connect Complete", status=0,
                                              handle=sim.acl_handle(attacker.addr, master.addr),
                                              bdaddr=victim),
             direction="received")
    master.desynchronized.add(victim)
    return ChopReport(master.addr, victim, original)
