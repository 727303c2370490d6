"""16-bit PCM mono WAV input/output."""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

PROTOCOL_RATE = 16000


class WavFormatError(ValueError):
    """Raised for WAV files that are not 16-bit mono PCM."""


@dataclass(frozen=True)
class AudioBuffer:
    """Signed 16-bit PCM samples with their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio only")
        object.__setattr__(self, "samples", samples.astype(np.int16, copy=False))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def as_float(self) -> np.ndarray:
        """Samples scaled to [-1, 1)."""
        return self.samples.astype(np.float64) / 32768.0

    @classmethod
    def from_float(cls, signal, sample_rate: int) -> "AudioBuffer":
        """Quantize a float signal in [-1, 1] to 16-bit PCM (with clipping)."""
        scaled = np.round(np.asarray(signal, dtype=np.float64) * 32767.0)
        return cls(np.clip(scaled, -32768, 32767).astype(np.int16), sample_rate)


def read_wav(path) -> AudioBuffer:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            raw = handle.readframes(handle.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated WAV header") from exc
    if width != 2:
        raise WavFormatError(f"{path}: expected 16-bit samples, found {8 * width}-bit")
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono audio, found {channels} channels")
    if rate != PROTOCOL_RATE:
        logger.warning("%s: sample rate %d Hz differs from the 16 kHz protocol", path, rate)
    samples = np.frombuffer(raw, dtype="<i2").astype(np.int16)
    return AudioBuffer(samples, rate)


def write_wav(path, audio: AudioBuffer) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(audio.sample_rate)
        handle.writeframes(audio.samples.astype("<i2").tobytes())


def check_wav_header(path) -> tuple[int, int, int]:
    """Return (channels, sample width in bytes, rate) without reading samples."""
    with wave.open(str(path), "rb") as handle:
        return handle.getnchannels(), handle.getsampwidth(), handle.getframerate()
