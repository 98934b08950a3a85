"""Raw audio files: headerless signed 16-bit little-endian, 8000 Hz, mono."""

from __future__ import annotations

import wave
from pathlib import Path

SAMPLE_RATE = 8000
SAMPLE_WIDTH = 2
CHANNELS = 1


def read_raw(path: str | Path) -> bytes:
    data = Path(path).read_bytes()
    if len(data) % SAMPLE_WIDTH:
        raise ValueError(f"{path}: odd byte count, not 16-bit samples")
    return data


def write_raw(path: str | Path, data: bytes) -> None:
    Path(path).write_bytes(data)


def write_wav(path: str | Path, data: bytes) -> None:
    """Same samples as :func:`write_raw`, wrapped in a RIFF/WAVE header."""
    with wave.open(str(path), "wb") as w:
        w.setnchannels(CHANNELS)
        w.setsampwidth(SAMPLE_WIDTH)
        w.setframerate(SAMPLE_RATE)
        w.writeframes(data)
