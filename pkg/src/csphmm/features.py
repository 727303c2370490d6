"""Acoustic and prosodic front end.

Two observation streams are produced from one utterance:

* a framewise acoustic stream of 16 static MFCCs plus 16 deltas
  (30 ms Hamming window every 5 ms), and
* a segmentwise prosodic stream with one :class:`ProsodicVector` per
  segment, built from per-frame pitch and energy tracks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.fft import dct

from .audio import AudioBuffer


@dataclass(frozen=True)
class FeatureConfig:
    frame_len: float = 0.030
    frame_hop: float = 0.005
    n_fft: int = 512
    n_filters: int = 26
    n_ceps: int = 16
    delta_width: int = 2
    pre_emphasis: float = 0.0
    log_floor: float = 1e-10
    f0_min: float = 60.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.3
    # must hold two periods of f0_min
    pitch_window: float = 0.040


DEFAULT_FEATURES = FeatureConfig()


class SignalTooShortError(ValueError):
    pass


class ProsodicVector(NamedTuple):
    f0_mean: float
    f0_slope: float
    log_energy_mean: float
    duration: float
    speaking_rate: float


PROSODIC_DIM = len(ProsodicVector._fields)


@dataclass
class ObservationSequence:
    """Per-frame acoustic vectors (static MFCC followed by delta MFCC)."""

    frames: np.ndarray
    frame_hop: float = DEFAULT_FEATURES.frame_hop
    frame_len: float = DEFAULT_FEATURES.frame_len

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class FrameTracks:
    """Per-frame pitch (0 = unvoiced) and natural-log energy, aligned with the
    acoustic frames of the same utterance."""

    f0: np.ndarray
    log_energy: np.ndarray
    frame_hop: float

    def __len__(self) -> int:
        return len(self.f0)


def _as_signal(audio, sample_rate):
    if isinstance(audio, AudioBuffer):
        return audio.as_float(), audio.sample_rate
    if sample_rate is None:
        raise TypeError("sample_rate is required when framing a raw array")
    return np.asarray(audio, dtype=np.float64), int(sample_rate)


def frame_count(n_samples: int, window: int, hop: int) -> int:
    if n_samples < window:
        return 0
    return (n_samples - window) // hop + 1


def frame_signal(audio, frame_len=DEFAULT_FEATURES.frame_len,
                 frame_hop=DEFAULT_FEATURES.frame_hop, sample_rate=None,
                 pre_emphasis=0.0, window=True):
    """Slice a signal into overlapping frames, Hamming-windowed by default.

    ``audio`` may be an :class:`AudioBuffer` (scaled to [-1, 1)) or a plain
    array, in which case ``sample_rate`` must be given and the values are
    used as they are.

    Returns an array of shape ``(n_frames, window_length)``.
    """
    signal, rate = _as_signal(audio, sample_rate)
    if pre_emphasis:
        signal = np.append(signal[0], signal[1:] - pre_emphasis * signal[:-1])
    width = int(round(frame_len * rate))
    hop = int(round(frame_hop * rate))
    n_frames = frame_count(len(signal), width, hop)
    if n_frames == 0:
        raise SignalTooShortError(
            f"signal too short: {len(signal)} samples, one window needs {width}")
    frames = np.lib.stride_tricks.sliding_window_view(signal, width)[::hop][:n_frames]
    if window:
        return frames * np.hamming(width)
    return frames.copy()


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_filters, n_fft, sample_rate, fmin=0.0, fmax=None):
    """Triangular filters equally spaced on the mel scale, shape
    ``(n_filters, n_fft // 2 + 1)``."""
    fmax = sample_rate / 2.0 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    bank = np.zeros((n_filters, len(bins)))
    for m in range(n_filters):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bins - lo) / (mid - lo)
        falling = (hi - bins) / (hi - mid)
        bank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def log_mel_energies(frames, sample_rate=16000, config: FeatureConfig = DEFAULT_FEATURES):
    frames = np.atleast_2d(frames)
    spectrum = np.fft.rfft(frames, n=config.n_fft, axis=1)
    power = (spectrum.real ** 2 + spectrum.imag ** 2) / config.n_fft
    bank = mel_filterbank(config.n_filters, config.n_fft, sample_rate)
    energies = power @ bank.T
    return np.log(np.maximum(energies, config.log_floor))


def compute_mfcc(frames, sample_rate=16000, config: FeatureConfig = DEFAULT_FEATURES):
    """Static MFCCs c0..c15 (c0 carries the log energy) for windowed frames."""
    logmel = log_mel_energies(frames, sample_rate, config)
    return dct(logmel, type=2, norm="ortho", axis=1)[:, :config.n_ceps]


def compute_delta(static, width=DEFAULT_FEATURES.delta_width):
    """Regression deltas over +/- ``width`` frames, edge frames replicated."""
    static = np.asarray(static, dtype=np.float64)
    n = len(static)
    if n < 2 * width + 1:
        raise ValueError(f"too few frames for deltas: {n} < {2 * width + 1}")
    padded = np.pad(static, ((width, width), (0, 0)), mode="edge")
    denom = 2.0 * sum(k * k for k in range(1, width + 1))
    delta = np.zeros_like(static)
    for k in range(1, width + 1):
        delta += k * (padded[width + k:width + k + n] - padded[width - k:width - k + n])
    return delta / denom


def acoustic_features(audio: AudioBuffer, config: FeatureConfig = DEFAULT_FEATURES):
    frames = frame_signal(audio, config.frame_len, config.frame_hop,
                          pre_emphasis=config.pre_emphasis)
    static = compute_mfcc(frames, audio.sample_rate, config)
    delta = compute_delta(static, config.delta_width)
    return ObservationSequence(np.hstack([static, delta]), config.frame_hop, config.frame_len)


def _pitch_from_frames(frames, sample_rate, fmin, fmax, threshold):
    """Autocorrelation pitch for each row of ``frames`` (0 where unvoiced)."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    frames = frames - frames.mean(axis=1, keepdims=True)
    width = frames.shape[1]
    n_fft = 1 << int(np.ceil(np.log2(2 * width)))
    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    acf = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, n=n_fft, axis=1)[:, :width]

    lo = max(1, int(np.floor(sample_rate / fmax)))
    hi = min(width - 2, int(np.ceil(sample_rate / fmin)))
    f0 = np.zeros(len(frames))
    energy = acf[:, 0]
    for i in np.flatnonzero(energy > 0):
        norm = acf[i] / energy[i]
        lag = lo + int(np.argmax(norm[lo:hi + 1]))
        if norm[lag] < threshold:
            continue
        # interpolate on the unbiased estimate so the window taper doesn't pull the peak
        unbiased = acf[i, lag - 1:lag + 2] / (width - np.arange(lag - 1, lag + 2))
        left, mid, right = unbiased
        curvature = left - 2.0 * mid + right
        shift = 0.5 * (left - right) / curvature if curvature < 0 else 0.0
        period = lag + float(np.clip(shift, -0.5, 0.5))
        f0[i] = sample_rate / period
    return f0


def estimate_f0(frame, sample_rate, config: FeatureConfig = DEFAULT_FEATURES) -> float:
    """Fundamental frequency of one frame in Hz, or 0.0 when unvoiced."""
    frame = np.asarray(frame, dtype=np.float64)
    needed = int(np.ceil(2 * sample_rate / config.f0_min))
    if len(frame) < needed:
        raise ValueError(
            f"frame of {len(frame)} samples is shorter than two periods of "
            f"{config.f0_min} Hz ({needed} samples)")
    return float(_pitch_from_frames(frame, sample_rate, config.f0_min,
                                    config.f0_max, config.voicing_threshold)[0])


def frame_tracks(audio: AudioBuffer, config: FeatureConfig = DEFAULT_FEATURES) -> FrameTracks:
    """Pitch and log-energy per acoustic frame.

    Pitch uses a longer window (``config.pitch_window``) centred on each
    acoustic frame so the lowest searched F0 fits twice.
    """
    signal, rate = audio.as_float(), audio.sample_rate
    width = int(round(config.frame_len * rate))
    hop = int(round(config.frame_hop * rate))
    n_frames = frame_count(len(signal), width, hop)
    if n_frames == 0:
        raise SignalTooShortError(
            f"signal too short: {len(signal)} samples, one window needs {width}")

    raw = frame_signal(signal, config.frame_len, config.frame_hop, sample_rate=rate,
                       window=False)
    log_energy = np.log(np.maximum(np.mean(raw ** 2, axis=1), config.log_floor))

    pitch_width = int(round(config.pitch_window * rate))
    offset = (pitch_width - width) // 2
    padded = np.pad(signal, (max(offset, 0), pitch_width))
    starts = np.arange(n_frames) * hop
    pitch_frames = np.lib.stride_tricks.sliding_window_view(padded, pitch_width)[starts]
    f0 = _pitch_from_frames(pitch_frames, rate, config.f0_min, config.f0_max,
                            config.voicing_threshold)
    return FrameTracks(f0, log_energy, config.frame_hop)


def segment_prosody(tracks: FrameTracks, boundaries: Sequence[int]) -> list[ProsodicVector]:
    """One prosodic vector per segment of a precomputed frame track.

    ``boundaries`` lists segment start frames followed by the end frame,
    e.g. ``[0, 40, 100]`` for two segments over 100 frames.
    """
    bounds = np.asarray(boundaries, dtype=int)
    if len(bounds) < 2:
        raise ValueError("need at least one segment (two boundaries)")
    if np.any(np.diff(bounds) <= 0):
        raise ValueError("empty segment: boundaries must be strictly increasing")
    if bounds[0] != 0 or bounds[-1] != len(tracks):
        raise ValueError(
            f"boundaries must cover frames 0..{len(tracks)}, got {bounds[0]}..{bounds[-1]}")

    hop = tracks.frame_hop
    total = len(tracks) * hop
    rate = (len(bounds) - 1) / total
    out = []
    for start, end in zip(bounds[:-1], bounds[1:]):
        f0 = tracks.f0[start:end]
        voiced = np.flatnonzero(f0 > 0)
        f0_mean = float(f0[voiced].mean()) if len(voiced) else 0.0
        f0_slope = 0.0
        if len(voiced) >= 2:
            times = voiced * hop
            f0_slope = float(np.polyfit(times, f0[voiced], 1)[0])
        out.append(ProsodicVector(
            f0_mean=f0_mean,
            f0_slope=f0_slope,
            log_energy_mean=float(tracks.log_energy[start:end].mean()),
            duration=(end - start) * hop,
            speaking_rate=rate,
        ))
    return out


def prosodic_features(audio: AudioBuffer, segment_boundaries: Sequence[int],
                      config: FeatureConfig = DEFAULT_FEATURES) -> list[ProsodicVector]:
    return segment_prosody(frame_tracks(audio, config), segment_boundaries)


def prosodic_array(vectors: Sequence[ProsodicVector]) -> np.ndarray:
    return np.array(vectors, dtype=np.float64).reshape(len(vectors), PROSODIC_DIM)


@dataclass
class UtteranceFeatures:
    """Everything the models need from one utterance, computed once."""

    obs: ObservationSequence
    tracks: FrameTracks

    @classmethod
    def from_audio(cls, audio: AudioBuffer, config: FeatureConfig = DEFAULT_FEATURES):
        return cls(acoustic_features(audio, config), frame_tracks(audio, config))
