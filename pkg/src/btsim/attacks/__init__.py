from .bluechop import ChopReport, bluechop
from .fuzz import FuzzOutcome, fuzz
from .passkey import RecoveryResult, active_recover, extract_transcripts, passive_recover
from .sniff import hexdump, sniff_format
from .spoof import restore, spoof
from .surveil import AuditReport, surveil
from .udda import (
    BugInfo, Delete, Dial, Find, ReadRange, bug_dial, bug_hangup, bug_info, render_contacts, snarf,
)
from .whisper import WhisperResult, whisper

__all__ = [
    "AuditReport", "BugInfo", "ChopReport", "Delete", "Dial", "Find", "FuzzOutcome",
    "ReadRange", "RecoveryResult", "WhisperResult", "active_recover", "bluechop",
    "bug_dial", "bug_hangup", "bug_info", "extract_transcripts", "fuzz", "hexdump",
    "passive_recover", "render_contacts", "restore", "sniff_format", "snarf", "spoof", "surveil",
    "whisper",
]
