"""Exception hierarchy shared by every layer of the simulator."""

from __future__ import annotations


class BtSimError(Exception):
    """Base class for all simulator errors."""


class DuplicateAddress(BtSimError):
    pass


class UnknownDevice(BtSimError):
    pass


class ScannerCrashed(BtSimError):
    pass


class PiconetFull(BtSimError):
    pass


class AlreadyMember(BtSimError):
    pass


class EmptyPiconet(BtSimError):
    pass


class Timeout(BtSimError):
    """The remote side never answered (crashed, absent or silent)."""


class HostUnreachable(Timeout):
    """No device is registered under the destination address."""


class TargetCrashed(BtSimError):
    pass


class Refused(BtSimError):
    pass


class BadChannel(BtSimError):
    pass


class AuthRequired(BtSimError):
    pass


class NotFound(BtSimError):
    pass


class NoSession(BtSimError):
    pass


class FrameTooLarge(BtSimError):
    pass


class InvalidPublic(BtSimError):
    pass


class NoExistingBond(BtSimError):
    pass


class HardenedTranscript(BtSimError):
    def __init__(self, msg: str = "hardened transcript: round fields are encrypted"):
        super().__init__(msg)


class IncompleteTranscript(BtSimError):
    pass


class ExceededAttempts(BtSimError):
    """Active recovery gave up; carries what the attacker had learned so far."""

    def __init__(self, attempts: int, aborted: int, best_guess: int):
        super().__init__(
            f"exceeded {attempts} pairing attempts ({aborted} aborted), "
            f"best guess {best_guess:06d}"
        )
        self.attempts = attempts
        self.aborted = aborted
        self.best_guess = best_guess


class ScenarioError(BtSimError):
    pass


class ParseError(ScenarioError):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(msg + where)
        self.line = line
        self.column = column


class UnknownAddress(ScenarioError):
    pass


class MissingSeed(ScenarioError):
    pass
