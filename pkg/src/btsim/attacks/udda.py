"""Unauthorized direct data access over RFCOMM AT channels (snarf / bug)."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .. import stack
from ..errors import NotFound
from ..simcore import AddrLike, BdAddr, Contact, Device, Simulation

MAX_PHONEBOOK_INDEX = 500


@dataclass(frozen=True)
class ReadRange:
    lo: int
    hi: int


@dataclass(frozen=True)
class Find:
    name: str


@dataclass(frozen=True)
class Delete:
    index: int


@dataclass(frozen=True)
class Dial:
    number: str


SnarfAction = Union[ReadRange, Find, Delete, Dial]

_CPBR_LINE = re.compile(r'^\+CPBR: (\d+),"([^"]*)",\d+,"([^"]*)"$')


def _parse_cpbr(text: str) -> list[Contact]:
    out = []
    for line in text.splitlines():
        if m := _CPBR_LINE.match(line):
            out.append(Contact(int(m.group(1)), m.group(3), m.group(2)))
    return out


def snarf(sim: Simulation, attacker: Device, target: AddrLike, action: SnarfAction,
          channel: int = 1):
    """Phonebook and call access over an AT channel.

    Returns a contact list for reads and searches, the deleted contact for
    ``Delete`` and the target's call state string for ``Dial``.  The RFCOMM
    connect may prompt the victim; a decline raises ``Refused``.
    """
    ep = stack.rfcomm_connect(sim, attacker, target, channel)
    try:
        if isinstance(action, ReadRange):
            return _parse_cpbr(stack.at_execute(sim, ep, f"AT+CPBR={action.lo},{action.hi}"))
        if isinstance(action, Find):
            book = _parse_cpbr(stack.at_execute(sim, ep, f"AT+CPBR=1,{MAX_PHONEBOOK_INDEX}"))
            hits = [c for c in book if action.name.lower() in c.name.lower()]
            if not hits:
                raise NotFound(f"no contact matching {action.name!r}")
            return hits
        if isinstance(action, Delete):
            entry = _parse_cpbr(stack.at_execute(sim, ep, f"AT+CPBR={action.index}"))
            if not entry or stack.at_execute(sim, ep, f"AT+CPBW={action.index}") != "OK":
                raise NotFound(f"no contact at index {action.index}")
            return entry[0]
        if isinstance(action, Dial):
            if stack.at_execute(sim, ep, f"ATD{action.number};") != "OK":
                raise NotFound(f"{BdAddr.coerce(target)} cannot place calls")
            return sim.device(target).call_state
        raise TypeError(f"unsupported snarf action {action!r}")
    finally:
        stack.rfcomm_close(sim, ep)


def render_contacts(contacts: list[Contact], search: str | None = None) -> str:
    lines = [f"start to search name: {search}"] if search is not None else []
    lines += [f"+ {c.index} - {c.name} : {c.number}" for c in contacts]
    lines.append("bluesnarfer: release rfcomm ok")
    return "\n".join(lines)


@dataclass(frozen=True)
class BugInfo:
    addr: BdAddr
    name: str
    manufacturer: str
    model: str
    revision: str
    imei: str
    capability: str

    def render(self) -> str:
        return "\n".join([
            f"Target Device: '{self.addr}'",
            f"Target Name: '{self.name}'",
            f"Manufacturer: {self.manufacturer}",
            f"Model: {self.model}",
            f"Revision: {self.revision}",
            f"PSN/IMEI: {self.imei}",
            f"Capability: {self.capability}",
        ])


def bug_info(sim: Simulation, attacker: Device, target: AddrLike, channel: int = 1) -> BugInfo:
    target = BdAddr.coerce(target)
    name = stack.remote_name(sim, attacker, target)
    ep = stack.rfcomm_connect(sim, attacker, target, channel)
    try:
        ask = lambda cmd: stack.at_execute(sim, ep, cmd)  # noqa: E731
        gcap = ask("AT+GCAP")
        return BugInfo(
            addr=target,
            name=name,
            manufacturer=ask("AT+CGMI"),
            model=ask("AT+CGMM"),
            revision=ask("AT+CGMR"),
            imei=ask("AT+CGSN"),
            capability=gcap.removeprefix("+GCAP: ").strip(),
        )
    finally:
        stack.rfcomm_close(sim, ep)


def bug_dial(sim: Simulation, attacker: Device, target: AddrLike, number: str,
             channel: int = 1) -> str:
    """Place a call from the victim phone; returns its call state."""
    return snarf(sim, attacker, target, Dial(number), channel)


def bug_hangup(sim: Simulation, attacker: Device, target: AddrLike, channel: int = 1) -> None:
    ep = stack.rfcomm_connect(sim, attacker, target, channel)
    try:
        stack.at_execute(sim, ep, "ATH")
    finally:
        stack.rfcomm_close(sim, ep)
