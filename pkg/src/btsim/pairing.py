"""Passkey-entry pairing (plain and hardened), forced re-pairing and the
legacy PIN pairing event trace.

Passkey bits are committed least-significant bit first: round ``i`` (1-based)
carries ``(value >> (i - 1)) & 1``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Literal, Optional, Union

from . import crypto
from .crypto import DEFAULT_GROUP, ModpGroup, NonceSource
from .errors import HostUnreachable, NoExistingBond, Refused, TargetCrashed
from .simcore import AddrLike, BdAddr, CaptureLog, Device, HciCmd, HciEvt, L2cap, Simulation

DEFAULT_K = 20
MIN_K = 4
PAIRING_CID = 0x0007
HARDENED_FLAG = 0x01


@dataclass(frozen=True)
class Passkey:
    value: int
    k: int = DEFAULT_K

    def __post_init__(self):
        if not MIN_K <= self.k <= DEFAULT_K:
            raise ValueError(f"k must be in {MIN_K}..{DEFAULT_K}, got {self.k}")
        if not 0 <= self.value < self.limit(self.k):
            raise ValueError(f"passkey {self.value} out of range for k={self.k}")

    @staticmethod
    def limit(k: int) -> int:
        return min(10**6, 1 << k)

    @classmethod
    def random(cls, rng: random.Random, k: int = DEFAULT_K) -> "Passkey":
        return cls(rng.randrange(cls.limit(k)), k)

    @classmethod
    def from_bits(cls, bits: list[int], k: int = DEFAULT_K) -> "Passkey":
        return cls(sum(b << i for i, b in enumerate(bits)), k)

    def bit(self, i: int) -> int:
        if not 1 <= i <= self.k:
            raise IndexError(f"round index {i} outside 1..{self.k}")
        return (self.value >> (i - 1)) & 1

    def bits(self) -> list[int]:
        return [self.bit(i) for i in range(1, self.k + 1)]

    def __str__(self) -> str:
        return f"{self.value:06d}"


@dataclass(frozen=True)
class Round:
    index: int
    c_a: bytes
    c_b: bytes
    n_a: Optional[bytes]
    n_b: Optional[bytes]
    encrypted: bool = False


@dataclass(frozen=True)
class PairingTranscript:
    pk_a: bytes
    pk_b: bytes
    rounds: tuple[Round, ...]
    hardened: bool = False
    k: int = DEFAULT_K

    @property
    def complete(self) -> bool:
        return len(self.rounds) == self.k and all(
            r.n_a is not None and r.n_b is not None for r in self.rounds)


@dataclass(frozen=True)
class Success:
    link_key: bytes


@dataclass(frozen=True)
class Abort:
    round_index: int
    party: Literal["initiator", "responder"]


PairingOutcome = Union[Success, Abort]


class FixedPasskey:
    def __init__(self, passkey: Passkey):
        self.passkey = passkey

    @property
    def k(self) -> int:
        return self.passkey.k

    def next_session(self) -> Passkey:
        return self.passkey


class RotatingPasskey:
    """Fresh uniform passkey for every pairing session."""

    def __init__(self, seed: int, k: int = DEFAULT_K):
        self._rng = random.Random(seed)
        self.k = k

    def next_session(self) -> Passkey:
        return Passkey.random(self._rng, self.k)


PasskeyPolicy = Union[FixedPasskey, RotatingPasskey]


def policy_for(sim: Simulation, device: Device, k: int = DEFAULT_K) -> PasskeyPolicy:
    """The device's passkey policy, created once from its firmware flags.

    Devices with neither a fixed nor an explicitly rotating passkey show a
    fresh one per session, which is the rotating behaviour.
    """
    policy = device.passkey_policy
    if policy is None or policy.k != k:
        fixed = device.profile.firmware.fixed_passkey
        if fixed is not None:
            policy = FixedPasskey(Passkey(fixed % Passkey.limit(k), k))
        else:
            policy = RotatingPasskey(sim.rng.getrandbits(64), k)
        device.passkey_policy = policy
    return policy


def _peer(sim: Simulation, addr: AddrLike) -> Device:
    dev = sim.lookup(addr)
    if dev is None:
        raise HostUnreachable(f"no device at {BdAddr.coerce(addr)}")
    if dev.crashed:
        raise TargetCrashed(f"{dev.addr} is crashed")
    return dev


def link_key(dhkey: bytes) -> bytes:
    return crypto.hmac_sha256(dhkey, b"link")[:16]


def pair_passkey_entry(sim: Simulation, initiator: Device, responder: AddrLike,
                       passkey_a: Passkey, passkey_b: Passkey, hardened: bool = False,
                       group: ModpGroup = DEFAULT_GROUP
                       ) -> tuple[PairingOutcome, PairingTranscript]:
    """Run public key exchange then ``k`` commitment rounds between A and B.

    Per round: A commits, B commits, A opens (B checks against its own bit
    and may abort), B opens (A checks).  When ``hardened`` the DH key is
    derived right after key exchange and every round field travels XORed
    with that round's keystream.
    """
    if initiator.crashed:
        raise TargetCrashed(f"{initiator.addr} is crashed")
    b_dev = _peer(sim, responder)
    a_dev = initiator
    if passkey_a.k != passkey_b.k:
        raise ValueError("both passkeys must have the same bit length")
    k = passkey_a.k

    def a_send(kind, payload=b""):
        sim.emit(a_dev, b_dev.addr, L2cap(kind, cid=PAIRING_CID, payload=payload))

    def b_send(kind, payload=b""):
        sim.emit(b_dev, a_dev.addr, L2cap(kind, cid=PAIRING_CID, payload=payload),
                 direction="received")

    flags = bytes([HARDENED_FLAG if hardened else 0, k])
    a_send("Pairing Request", flags)
    b_send("Pairing Response", flags)

    sk_a, pk_a = group.keygen(sim.rng)
    a_send("Pairing Public Key", pk_a)
    sk_b, pk_b = group.keygen(sim.rng)
    b_send("Pairing Public Key", pk_b)
    dhkey_a = group.shared(sk_a, pk_b)
    dhkey_b = group.shared(sk_b, pk_a)

    nonce_a = NonceSource(sim.rng)
    nonce_b = NonceSource(sim.rng)
    rounds: list[Round] = []
    outcome: PairingOutcome

    for i in range(1, k + 1):
        pad = crypto.keystream(dhkey_a, i, 64) if hardened else bytes(64)

        def wire(value: bytes, slot: int) -> bytes:
            return crypto.xor(value, pad[16 * slot:16 * slot + 16]) if hardened else value

        ra, rb = passkey_a.bit(i), passkey_b.bit(i)
        n_a, n_b = nonce_a(), nonce_b()
        c_a = crypto.commit(pk_a, pk_b, n_a, ra)
        a_send("Pairing Confirm", wire(c_a, 0))
        c_b = crypto.commit(pk_b, pk_a, n_b, rb)
        b_send("Pairing Confirm", wire(c_b, 1))
        a_send("Pairing Random", wire(n_a, 2))
        if crypto.commit(pk_a, pk_b, n_a, rb) != c_a:
            b_send("Pairing Failed", b"\x04")
            rounds.append(Round(i, wire(c_a, 0), wire(c_b, 1), wire(n_a, 2), None, hardened))
            outcome = Abort(i, "responder")
            break
        b_send("Pairing Random", wire(n_b, 3))
        rounds.append(Round(i, wire(c_a, 0), wire(c_b, 1), wire(n_a, 2), wire(n_b, 3), hardened))
        if crypto.commit(pk_b, pk_a, n_b, ra) != c_b:
            a_send("Pairing Failed", b"\x04")
            outcome = Abort(i, "initiator")
            break
    else:
        key_a, key_b = link_key(dhkey_a), link_key(dhkey_b)
        a_dev.bonds[b_dev.addr] = key_a
        b_dev.bonds[a_dev.addr] = key_b
        sim.emit(b_dev, a_dev.addr, HciEvt.of("Simple Pairing Complete", status=0,
                                              bdaddr=b_dev.addr), direction="received")
        outcome = Success(key_a)

    if isinstance(outcome, Abort):
        sim.emit(b_dev, a_dev.addr, HciEvt.of("Simple Pairing Complete", status=0x05,
                                              bdaddr=b_dev.addr), direction="received")
    return outcome, PairingTranscript(pk_a, pk_b, tuple(rounds), hardened, k)


def decrypt_transcript(transcript: PairingTranscript, dhkey: bytes) -> PairingTranscript:
    """Strip the hardened-mode encryption given the session's DH key."""
    if not transcript.hardened:
        return transcript
    rounds = []
    for r in transcript.rounds:
        pad = crypto.keystream(dhkey, r.index, 64)

        def clear(value, slot):
            return None if value is None else crypto.xor(value, pad[16 * slot:16 * slot + 16])

        rounds.append(Round(r.index, clear(r.c_a, 0), clear(r.c_b, 1),
                            clear(r.n_a, 2), clear(r.n_b, 3), encrypted=False))
    return replace(transcript, rounds=tuple(rounds), hardened=False)


# -----------------------------------------------------------------------------
# Bonds
# -----------------------------------------------------------------------------
@dataclass(frozen=True)
class ConnectResult:
    fresh_pairing: bool
    outcome: Optional[PairingOutcome] = None
    transcript: Optional[PairingTranscript] = None


def connect(sim: Simulation, a: Device, b: AddrLike, hardened: bool = False,
            k: int = DEFAULT_K, group: ModpGroup = DEFAULT_GROUP) -> ConnectResult:
    """Authenticate a link, reusing a stored key or pairing from scratch.

    For a fresh pairing the responder's policy picks the passkey and the
    initiator's user types the same value.
    """
    b_dev = _peer(sim, b)
    if b_dev.addr in a.bonds and a.addr in b_dev.bonds:
        sim.emit(a, b_dev.addr, HciCmd.of("Authentication Requested",
                                          handle=sim.acl_handle(a.addr, b_dev.addr)))
        sim.emit(b_dev, a.addr, HciEvt.of("Auth Complete", status=0,
                                          handle=sim.acl_handle(a.addr, b_dev.addr)),
                 direction="received")
        return ConnectResult(fresh_pairing=False)
    passkey = policy_for(sim, b_dev, k).next_session()
    outcome, transcript = pair_passkey_entry(sim, a, b_dev.addr, passkey, passkey,
                                             hardened=hardened, group=group)
    return ConnectResult(True, outcome, transcript)


def force_repair(sim: Simulation, attacker: Device, a: AddrLike, b: AddrLike) -> None:
    """Make ``a`` and ``b`` forget their shared link key."""
    a_dev, b_dev = sim.device(a), sim.device(b)
    if b_dev.addr not in a_dev.bonds or a_dev.addr not in b_dev.bonds:
        raise NoExistingBond(f"{a_dev.addr} and {b_dev.addr} are not bonded")
    for victim, peer in ((a_dev, b_dev), (b_dev, a_dev)):
        sim.emit(attacker, victim.addr, HciCmd.of("Delete Stored Link Key",
                                                  bdaddr=peer.addr, delete_all=0))
        del victim.bonds[peer.addr]


# -----------------------------------------------------------------------------
# Legacy PIN pairing trace
# -----------------------------------------------------------------------------
LEGACY_TRACE = (
    ("HCI_CMD", "Create Connection"),
    ("HCI_EVT", "Connect Complete"),
    ("HCI_EVT", "Read Remote Supported Features"),
    ("L2CAP", "Information Request"),
    ("HCI_CMD", "Remote Name Request"),
    ("HCI_CMD", "Authentication Requested"),
    ("L2CAP", "Information Response"),
    ("L2CAP", "Connection Request"),
    ("HCI_EVT", "PIN Code Request"),
    ("L2CAP", "Connection Response"),
    ("L2CAP", "Configure Request"),
    ("L2CAP", "Connection oriented channel"),
    ("HCI_CMD", "Read RSSI"),
    ("HCI_CMD", "Read Link Quality"),
    ("HCI_CMD", "Read Tx Power Level"),
    ("HCI_CMD", "PIN Code Request Reply"),
    ("HCI_EVT", "Auth Complete"),
    ("HCI_EVT", "Disconnect Complete"),
    ("HCI_CMD", "Delete Stored Link Key"),
)


def pair_legacy(sim: Simulation, initiator: Device, responder: AddrLike,
                pin: str) -> tuple[bool, CaptureLog]:
    """Replay the PIN pairing event sequence; the link comes up iff PINs match."""
    if initiator.crashed:
        raise TargetCrashed(f"{initiator.addr} is crashed")
    b_dev = _peer(sim, responder)
    their_pin = b_dev.profile.firmware.fixed_pin or b_dev.profile.user_pin
    if their_pin is None:
        raise Refused(f"{b_dev.name} has no PIN to enter")
    match = pin == their_pin
    a, b = initiator.addr, b_dev.addr
    handle = sim.acl_handle(a, b)
    params = {
        "Create Connection": dict(bdaddr=b, ptype="DM1 DM3 DM5 DH1 DH3 DH5"),
        "Connect Complete": dict(status=0, handle=handle, bdaddr=b),
        "Read Remote Supported Features": dict(status=0, handle=handle),
        "Remote Name Request": dict(bdaddr=b),
        "Authentication Requested": dict(handle=handle),
        "PIN Code Request": dict(bdaddr=b),
        "Read RSSI": dict(handle=handle),
        "Read Link Quality": dict(handle=handle),
        "Read Tx Power Level": dict(handle=handle, type=0),
        "PIN Code Request Reply": dict(bdaddr=b, len=len(pin), pin=pin),
        "Auth Complete": dict(status=0x00 if match else 0x05, handle=handle),
        "Disconnect Complete": dict(status=0, handle=handle, reason=0x13),
        "Delete Stored Link Key": dict(bdaddr=b, delete_all=0),
    }
    log = sim.tap(owner=str(a))
    try:
        for tag, kind in LEGACY_TRACE:
            if tag == "HCI_CMD":
                sim.emit(initiator, b, HciCmd.of(kind, **params[kind]))
            elif tag == "HCI_EVT":
                sim.emit(b_dev, a, HciEvt.of(kind, **params[kind]), direction="received")
            else:
                cid = 0x0040 if kind == "Connection oriented channel" else 0x0001
                sim.emit(b_dev, a, L2cap(kind, cid=cid), direction="received")
            if kind == "Auth Complete" and not match:
                break
    finally:
        sim.untap(log)
    return match, log


def trace_rows(log: CaptureLog) -> list[str]:
    """Kind column in the "<n>\\t<layer>\\t[Rcvd ]<kind>" tabular style."""
    rows = []
    for n, packet in enumerate(log, start=1):
        kind = packet.kind
        if packet.layer_tag == "L2CAP" and packet.direction == "received":
            kind = "Rcvd " + kind
        rows.append(f"{n}\t{packet.layer_tag}\t{kind}")
    return rows
