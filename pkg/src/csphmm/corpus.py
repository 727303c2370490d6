"""Corpus manifests, WAV ingestion and a synthetic neutral/shouted corpus.

The synthetic generator is a small source-filter synthesizer: a glottal
pulse train (or noise for fricatives) through a one-pole spectral-tilt
filter and a cascade of formant resonators.  Each sentence is a fixed
script of phone-like segments; each speaker has its own pitch register,
vocal-tract scaling, loudness, tempo and intonation habits.  Shouted takes
apply the speaker's :class:`ShoutTransform`.
"""

from __future__ import annotations

import csv
import io
import logging
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import sosfilt

from .audio import AudioBuffer, WavFormatError, check_wav_header, write_wav

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ("path", "speaker", "gender", "sentence", "environment", "session", "take")
ENVIRONMENTS = ("neutral", "shouted")
SESSIONS = ("train", "test")
GENDERS = ("male", "female")

# (environment, session) -> takes per speaker and sentence
MAX_SYLLABLES = 5
PROTOCOL_TAKES = {("neutral", "train"): 5, ("neutral", "test"): 4, ("shouted", "test"): 9}


class CorpusError(ValueError):
    """Manifest validation failure; ``problems`` itemizes every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True, order=True)
class ManifestEntry:
    path: str
    speaker: str
    gender: str
    sentence: str
    environment: str
    session: str
    take: int

    @property
    def key(self):
        return (self.speaker, self.sentence, self.environment, self.session, self.take)


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return Path(self.root) / entry.path

    def select(self, **criteria) -> list[ManifestEntry]:
        return [e for e in self.entries
                if all(getattr(e, k) == v for k, v in criteria.items())]

    @property
    def speakers(self) -> list[str]:
        return sorted({e.speaker for e in self.entries})

    @property
    def sentences(self) -> list[str]:
        return sorted({e.sentence for e in self.entries})

    def genders(self) -> dict[str, str]:
        return {e.speaker: e.gender for e in self.entries}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in self.entries:
            writer.writerow([e.path, e.speaker, e.gender, e.sentence, e.environment,
                             e.session, e.take])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def protocol_problems(self) -> list[str]:
        """Deviations from 5 neutral-train, 4 neutral-test and 9 shouted-test
        takes per (speaker, sentence)."""
        counts: dict[tuple, int] = {}
        for e in self.entries:
            key = (e.speaker, e.sentence, e.environment, e.session)
            counts[key] = counts.get(key, 0) + 1
        problems = []
        for spk in self.speakers:
            for sent in self.sentences:
                for (env, sess), want in PROTOCOL_TAKES.items():
                    got = counts.get((spk, sent, env, sess), 0)
                    if got != want:
                        problems.append(f"{spk}/{sent} {env}/{sess}: {got} takes, expected {want}")
        extra = {k for k in counts if (k[2], k[3]) not in PROTOCOL_TAKES}
        problems += [f"{k[0]}/{k[1]}: unexpected {k[2]}/{k[3]} takes" for k in sorted(extra)]
        return problems


def parse_manifest(text: str) -> list[ManifestEntry]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
        raise CorpusError([f"manifest header must be {','.join(MANIFEST_HEADER)}, "
                           f"got {','.join(reader.fieldnames or [])}"])
    entries, problems = [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            take = int(row["take"])
        except (TypeError, ValueError):
            problems.append(f"line {lineno}: take {row['take']!r} is not an integer")
            continue
        if row["environment"] not in ENVIRONMENTS:
            problems.append(f"line {lineno}: unknown environment {row['environment']!r}")
        if row["session"] not in SESSIONS:
            problems.append(f"line {lineno}: unknown session {row['session']!r}")
        if row["gender"] not in GENDERS:
            problems.append(f"line {lineno}: unknown gender {row['gender']!r}")
        entries.append(ManifestEntry(row["path"], row["speaker"], row["gender"],
                                     row["sentence"], row["environment"], row["session"], take))
    if problems:
        raise CorpusError(problems)
    return entries


def ingest_corpus(root, manifest_file=None, protocol: bool = False) -> CorpusManifest:
    """Load and validate a manifest; every problem is reported at once."""
    root = Path(root)
    manifest_file = root / "manifest.csv" if manifest_file is None else Path(manifest_file)
    entries = parse_manifest(manifest_file.read_text(encoding="utf-8"))
    if not entries:
        raise CorpusError(["no entries"])
    problems = []
    seen: dict[tuple, str] = {}
    for e in entries:
        if e.key in seen:
            problems.append(f"duplicate key {e.key} ({seen[e.key]} and {e.path})")
        seen.setdefault(e.key, e.path)
        path = root / e.path
        if not path.is_file():
            problems.append(f"missing file: {e.path}")
            continue
        try:
            channels, width, _ = check_wav_header(path)
        except (WavFormatError, wave.Error, OSError, EOFError) as exc:
            problems.append(f"bad header: {e.path} ({exc})")
            continue
        if width != 2 or channels != 1:
            problems.append(f"bad header: {e.path} ({channels} channels, {8 * width}-bit)")
    manifest = CorpusManifest(entries, root)
    if protocol:
        problems += manifest.protocol_problems()
    if problems:
        raise CorpusError(problems)
    return manifest


# --------------------------------------------------------------------------
# synthetic corpus


@dataclass(frozen=True)
class ShoutTransform:
    f0_scale: float = 1.5
    energy_gain_db: float = 12.0
    duration_scale: float = 0.8
    # fraction by which the glottal low-pass coefficient is reduced (brighter source)
    tilt_shift: float = 0.3

    def __post_init__(self):
        if not (self.f0_scale > 1 and self.energy_gain_db > 0 and 0 < self.duration_scale < 1):
            raise ValueError("a shout must raise F0 and energy and shorten duration")


@dataclass(frozen=True)
class SyntheticVoiceSpec:
    speaker_id: str
    gender: str
    base_f0: float
    # speaker's F1..F4 for a neutral vowel, Hz
    formant_profile: tuple[float, float, float, float]
    energy: float           # gain, dB
    tempo: float            # duration multiplier
    tilt: float             # glottal one-pole coefficient
    intonation: float       # accent excursion as a fraction of F0
    # per-syllable habits: accent offsets in [-1, 1] and lengthening factors
    accent_habit: tuple[float, ...] = (0.0,) * MAX_SYLLABLES
    rhythm_habit: tuple[float, ...] = (1.0,) * MAX_SYLLABLES
    shout_transform: ShoutTransform = ShoutTransform()


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: int = 16000
    # per-take jitter (relative standard deviations)
    f0_jitter: float = 0.02
    tempo_jitter: float = 0.03
    formant_jitter: float = 0.01
    gain_jitter_db: float = 0.5
    noise_floor: float = 3e-4
    shout: ShoutTransform = ShoutTransform()


# weight of the speaker's own accent habit against the sentence's accents
HABIT_WEIGHT = 0.5

NEUTRAL_FORMANTS = (500.0, 1500.0, 2500.0, 3500.0)

# F1, F2, F3 of vowel targets for the reference (neutral-profile) speaker
VOWELS = {
    "i": (280, 2250, 2900), "I": (400, 1950, 2550), "E": (530, 1800, 2450),
    "ae": (660, 1700, 2400), "a": (730, 1100, 2450), "O": (570, 850, 2400),
    "U": (440, 1050, 2250), "u": (310, 880, 2250), "V": (620, 1200, 2400),
    "R": (490, 1350, 1700),
}
NASALS = {"m": (260, 1000, 2200), "n": (260, 1500, 2500)}
FRICATIVES = {"s": (5000.0, 0.6), "sh": (3000.0, 0.5), "f": (1800.0, 1.2)}


@dataclass(frozen=True)
class Phone:
    kind: str                 # vowel | nasal | fricative | silence
    targets: tuple            # formants (voiced) or (centre Hz, relative bandwidth)
    duration: float           # seconds, neutral tempo
    accent: float             # relative F0 offset at segment centre


def sentence_script(sentence_index: int, seed: int) -> list[Phone]:
    """Deterministic pseudo-sentence: 3-5 CV(C) syllables between pauses."""
    rng = np.random.default_rng([seed, 7919, sentence_index])
    phones = [Phone("silence", (), 0.06, 0.0)]
    vowels, nasals, frics = list(VOWELS), list(NASALS), list(FRICATIVES)
    for _ in range(int(rng.integers(3, MAX_SYLLABLES + 1))):
        if rng.random() < 0.5:
            name = frics[rng.integers(len(frics))]
            phones.append(Phone("fricative", FRICATIVES[name], rng.uniform(0.05, 0.09), 0.0))
        else:
            name = nasals[rng.integers(len(nasals))]
            phones.append(Phone("nasal", NASALS[name], rng.uniform(0.04, 0.07), 0.0))
        vowel = VOWELS[vowels[rng.integers(len(vowels))]]
        phones.append(Phone("vowel", vowel, rng.uniform(0.09, 0.16), rng.uniform(-1, 1)))
    phones.append(Phone("silence", (), 0.06, 0.0))
    return phones


def make_voice(index: int, gender: str, seed: int,
               shout: ShoutTransform = ShoutTransform()) -> SyntheticVoiceSpec:
    rng = np.random.default_rng([seed, 104729, index])
    if gender == "male":
        base_f0 = rng.uniform(95, 150)
        scale = rng.uniform(0.90, 1.02)
    else:
        base_f0 = rng.uniform(165, 230)
        scale = rng.uniform(1.08, 1.22)
    profile = tuple(float(f * scale * rng.uniform(0.92, 1.08)) for f in NEUTRAL_FORMANTS)
    return SyntheticVoiceSpec(
        speaker_id=f"spk{index + 1:02d}", gender=gender, base_f0=float(base_f0),
        formant_profile=profile, energy=float(rng.uniform(-3, 3)),
        tempo=float(rng.uniform(0.85, 1.15)), tilt=float(rng.uniform(0.85, 0.95)),
        intonation=float(rng.uniform(0.05, 0.2)),
        accent_habit=tuple(float(a) for a in rng.uniform(-1, 1, MAX_SYLLABLES)),
        rhythm_habit=tuple(float(r) for r in np.exp(rng.normal(0, 0.25, MAX_SYLLABLES))),
        shout_transform=shout,
    )


def _resonator_sos(freq, bandwidth, rate):
    r = np.exp(-np.pi * bandwidth / rate)
    theta = 2 * np.pi * min(freq, 0.45 * rate) / rate
    a1, a2 = -2 * r * np.cos(theta), r * r
    # unity gain at DC keeps levels comparable across formant settings
    return [1 + a1 + a2, 0.0, 0.0, 1.0, a1, a2]


def _noise_band_sos(centre, rel_bw, rate):
    bw = centre * rel_bw
    return _resonator_sos(centre, bw, rate)


def synthesize(voice: SyntheticVoiceSpec, script: list[Phone], rng: np.random.Generator,
               shouted: bool = False, config: SynthConfig = SynthConfig()) -> AudioBuffer:
    rate = config.sample_rate
    shout = voice.shout_transform
    tempo = voice.tempo * (1 + config.tempo_jitter * rng.standard_normal())
    f0_base = voice.base_f0 * (1 + config.f0_jitter * rng.standard_normal())
    gain_db = voice.energy + config.gain_jitter_db * rng.standard_normal()
    tilt = voice.tilt
    formant_mult = (np.asarray(voice.formant_profile) / NEUTRAL_FORMANTS
                    * (1 + config.formant_jitter * rng.standard_normal(4)))
    if shouted:
        tempo *= shout.duration_scale
        f0_base *= shout.f0_scale
        gain_db += shout.energy_gain_db
        tilt *= 1 - shout.tilt_shift

    syllable = np.cumsum([p.kind == "vowel" for p in script]) - 1
    habit = np.array([voice.rhythm_habit[s] if p.kind == "vowel" and 0 <= s < MAX_SYLLABLES
                      else 1.0 for p, s in zip(script, syllable)])
    durations = np.array([p.duration for p in script]) * habit * tempo
    lengths = np.maximum(np.round(durations * rate).astype(int), 1)
    total = int(lengths.sum())
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])

    # F0 contour: declination plus smooth per-vowel accents
    t = np.arange(total) / rate
    contour = np.ones(total) * (1.08 - 0.16 * t / max(t[-1], 1e-9))
    for phone, start, length, syl in zip(script, starts, lengths, syllable):
        if phone.kind == "vowel":
            centre = start + length / 2
            width = length / 2.5
            accent = ((1 - HABIT_WEIGHT) * phone.accent
                      + HABIT_WEIGHT * voice.accent_habit[min(syl, MAX_SYLLABLES - 1)])
            contour += voice.intonation * accent * np.exp(-0.5 * ((np.arange(total) - centre) / width) ** 2)
    f0 = f0_base * contour

    phase = np.cumsum(f0 / rate)
    pulses = np.zeros(total)
    pulses[1:][np.diff(np.floor(phase)) > 0] = 1.0
    glottal = sosfilt([[1.0, 0, 0, 1.0, -tilt, 0]], pulses) * (1 - tilt)

    out = np.zeros(total)
    zi_voiced = np.zeros((4, 2))
    for phone, start, length in zip(script, starts, lengths):
        seg = slice(start, start + length)
        if phone.kind == "silence":
            continue
        if phone.kind == "fricative":
            centre, rel_bw = phone.targets
            noise = rng.standard_normal(length)
            band = sosfilt([_noise_band_sos(centre * formant_mult[2] ** 0.5, rel_bw, rate),
                            [1.0, -1.0, 0, 1.0, 0, 0]], noise)
            out[seg] += 0.02 * band
            continue
        formants = list(phone.targets) + [NEUTRAL_FORMANTS[3]]
        freqs = np.asarray(formants) * formant_mult
        bws = (60.0, 90.0, 120.0, 160.0) if phone.kind == "vowel" else (80.0, 200.0, 250.0, 300.0)
        sos = np.array([_resonator_sos(f, b, rate) for f, b in zip(freqs, bws)])
        level = 1.0 if phone.kind == "vowel" else 0.35
        # ramp the source to avoid clicks at segment edges
        ramp = np.minimum(1.0, np.minimum(np.arange(length) + 1, length - np.arange(length))
                          / (0.01 * rate))
        shaped, zi_voiced = sosfilt(sos, glottal[seg] * ramp, zi=zi_voiced)
        out[seg] += level * shaped

    out *= 0.3 * 10 ** (gain_db / 20.0)
    out += config.noise_floor * rng.standard_normal(total)
    return AudioBuffer.from_float(out, rate)


def _take_rng(seed, speaker_idx, sentence_idx, env, session, take):
    return np.random.default_rng(
        [seed, speaker_idx, sentence_idx, ENVIRONMENTS.index(env), SESSIONS.index(session), take])


def synth_corpus(root, num_speakers: int, num_sentences: int, seed: int = 20100101,
                 config: SynthConfig = SynthConfig(),
                 takes: dict | None = None) -> CorpusManifest:
    """Write a synthetic corpus under ``root`` and return its manifest.

    ``takes`` maps (environment, session) to takes per speaker and
    sentence; it defaults to the 5/4/9 protocol.
    """
    if num_speakers < 2:
        raise ValueError("need at least 2 speakers")
    root = Path(root)
    takes = PROTOCOL_TAKES if takes is None else takes
    voices = [make_voice(i, GENDERS[i % 2], seed, config.shout) for i in range(num_speakers)]
    scripts = [sentence_script(s, seed) for s in range(num_sentences)]
    entries = []
    for si, voice in enumerate(voices):
        for ji, script in enumerate(scripts):
            sentence = f"s{ji + 1}"
            for (env, session), count in takes.items():
                for take in range(1, count + 1):
                    rng = _take_rng(seed, si, ji, env, session, take)
                    audio = synthesize(voice, script, rng, env == "shouted", config)
                    rel = f"wav/{voice.speaker_id}/{sentence}/{env}_{session}_{take}.wav"
                    write_wav(root / rel, audio)
                    entries.append(ManifestEntry(rel, voice.speaker_id, voice.gender,
                                                 sentence, env, session, take))
    manifest = CorpusManifest(entries, root)
    manifest.write(root / "manifest.csv")
    return manifest


def voices_for(num_speakers: int, seed: int, shout: ShoutTransform = ShoutTransform()):
    return [make_voice(i, GENDERS[i % 2], seed, shout) for i in range(num_speakers)]
