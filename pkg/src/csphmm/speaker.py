"""Speaker enrollment and closed-set, text-dependent identification."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .audio import AudioBuffer
from .features import (
    DEFAULT_FEATURES,
    FeatureConfig,
    UtteranceFeatures,
    prosodic_array,
    segment_prosody,
)
from .hmm import Hmm, Kind, TopologySpec, TrainingError, initialize_hmm, train_em
from .hmm import lattice as _lat
from .suprasegmental import (
    CombinedScore,
    SuprasegmentalHmm,
    combined_log_score,
    segments_from_path,
    train_suprasegmental,
)

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


class Variant(str, Enum):
    LTRSPHMM1 = "LTRSPHMM1"
    LTRSPHMM2 = "LTRSPHMM2"
    CSPHMM1 = "CSPHMM1"
    CSPHMM2 = "CSPHMM2"

    @property
    def kind(self) -> Kind:
        return Kind.CIRCULAR if self.name.startswith("C") else Kind.LEFT_TO_RIGHT

    @property
    def order(self) -> int:
        return int(self.value[-1])

    @property
    def acoustic_name(self) -> str:
        """Name of the acoustic-only counterpart (LTRHMM1, CHMM2, ...)."""
        return self.value.replace("SPHMM", "HMM")


class EnrollmentError(RuntimeError):
    pass


class IdentificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_states: int = 9
    group_size: int = 3
    num_components: int = 4
    prosodic_components: int = 2
    var_floor: float = 1e-4
    rel_var_floor: float = 0.01
    prosodic_rel_var_floor: float = 0.05
    # f0 mean (Hz^2), f0 slope ((Hz/s)^2), log energy, duration (s^2), rate ((1/s)^2)
    prosodic_var_floor: tuple[float, ...] = (16.0, 400.0, 0.01, 1e-4, 0.01)
    max_iters: int = 15
    rel_tol: float = 1e-4
    seed: int = 20100101


DEFAULT_MODEL = ModelConfig()


@dataclass
class SpeakerModel:
    speaker_id: str
    sentence_id: str
    variant: Variant
    acoustic: Hmm
    suprasegmental: SuprasegmentalHmm
    acoustic_trace: list[float] = field(default_factory=list, compare=False)
    prosodic_trace: list[float] = field(default_factory=list, compare=False)

    def __post_init__(self):
        self.variant = Variant(self.variant)
        for part in (self.acoustic, self.suprasegmental.hmm):
            if (part.kind, part.order) != (self.variant.kind, self.variant.order):
                raise ValueError(f"{self.variant.value} needs {self.variant.kind.value} "
                                 f"order-{self.variant.order} sub-models")

    def to_dict(self) -> dict:
        return {
            "format": "csphmm-speaker-model",
            "version": MODEL_FORMAT_VERSION,
            "speaker": self.speaker_id,
            "sentence": self.sentence_id,
            "variant": self.variant.value,
            "acoustic": self.acoustic.to_dict(),
            "suprasegmental": self.suprasegmental.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, doc: dict) -> "SpeakerModel":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model document version {doc.get('version')}")
        return cls(doc["speaker"], doc["sentence"], Variant(doc["variant"]),
                   Hmm.from_dict(doc["acoustic"]),
                   SuprasegmentalHmm.from_dict(doc["suprasegmental"]))

    @classmethod
    def loads(cls, text: str) -> "SpeakerModel":
        return cls.from_dict(json.loads(text))


def _features(utterance, config: FeatureConfig) -> UtteranceFeatures:
    if isinstance(utterance, UtteranceFeatures):
        return utterance
    if isinstance(utterance, AudioBuffer):
        return UtteranceFeatures.from_audio(utterance, config)
    raise TypeError(f"expected AudioBuffer or UtteranceFeatures, got {type(utterance)!r}")


def enroll(speaker_id: str, sentence_id: str, variant, training_utterances,
           config: ModelConfig = DEFAULT_MODEL,
           features: FeatureConfig = DEFAULT_FEATURES) -> SpeakerModel:
    """Train the acoustic model, then the suprasegmental model on top of it."""
    variant = Variant(variant)
    utts = [_features(u, features) for u in training_utterances]
    if not utts:
        raise EnrollmentError(f"{speaker_id}/{sentence_id}: no training utterances")
    seqs = [u.obs.frames for u in utts]
    topo = TopologySpec(variant.kind, variant.order, config.num_states)
    try:
        init = initialize_hmm(topo, seqs, config.num_components, config.seed,
                              var_floor=config.var_floor, rel_var_floor=config.rel_var_floor)
        acoustic = train_em(init, seqs, config.max_iters, config.rel_tol)
        prosodic, pros_result = train_suprasegmental(
            acoustic.model, [(u.tracks, u.obs) for u in utts], config.group_size,
            config.prosodic_components, config.seed, config.max_iters, config.rel_tol,
            config.prosodic_var_floor, config.prosodic_rel_var_floor, features)
    except TrainingError as exc:
        raise EnrollmentError(
            f"enrollment of {speaker_id}/{sentence_id} ({variant.value}) failed: {exc}") from exc
    for note in acoustic.warnings + pros_result.warnings:
        logger.info("%s/%s %s: %s", speaker_id, sentence_id, variant.value, note)
    return SpeakerModel(speaker_id, sentence_id, variant, acoustic.model, prosodic,
                        acoustic.trace, pros_result.trace)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Registry:
    """Reference models keyed by (sentence, variant), then by speaker.

    With a ``root`` directory every added model is written to
    ``models/<variant>/<sentence>/<speaker>.json`` and ``index.json`` is
    rewritten atomically.
    """

    INDEX = "index.json"

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)
        self._models: dict[tuple[str, Variant], dict[str, SpeakerModel]] = {}
        self._paths: dict[tuple[str, str, Variant], str] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return sum(len(group) for group in self._models.values())

    def add(self, model: SpeakerModel) -> None:
        with self._lock:
            key = (model.sentence_id, model.variant)
            self._models.setdefault(key, {})[model.speaker_id] = model
            if self.root is not None:
                rel = f"models/{model.variant.value}/{model.sentence_id}/{model.speaker_id}.json"
                _atomic_write(self.root / rel, model.dumps())
                self._paths[(model.speaker_id, model.sentence_id, model.variant)] = rel
                _atomic_write(self.root / self.INDEX, self._index_text())

    def models(self, sentence_id: str, variant) -> dict[str, SpeakerModel]:
        group = self._models.get((sentence_id, Variant(variant)), {})
        return {spk: group[spk] for spk in sorted(group)}

    def speakers(self, sentence_id: str, variant) -> list[str]:
        return list(self.models(sentence_id, variant))

    def _index_text(self) -> str:
        entries = [
            {"speaker": spk, "sentence": sent, "variant": var.value, "path": path}
            for (spk, sent, var), path in sorted(
                self._paths.items(), key=lambda kv: (kv[0][1], kv[0][2].value, kv[0][0]))
        ]
        return json.dumps({"version": MODEL_FORMAT_VERSION, "entries": entries},
                          sort_keys=True, indent=1)

    @classmethod
    def load(cls, root) -> "Registry":
        root = Path(root)
        index = json.loads((root / cls.INDEX).read_text(encoding="utf-8"))
        registry = cls()
        for entry in index["entries"]:
            model = SpeakerModel.loads((root / entry["path"]).read_text(encoding="utf-8"))
            registry.add(model)
            registry._paths[(model.speaker_id, model.sentence_id, model.variant)] = entry["path"]
        registry.root = root
        return registry


@dataclass(frozen=True)
class UtteranceScore:
    """Alpha-independent scores of one utterance against one speaker model."""

    acoustic_logp: float
    prosodic_logp: float
    num_frames: int
    num_segments: int


def score_model(model: SpeakerModel, utterance: UtteranceFeatures) -> UtteranceScore:
    """Acoustic log-likelihood plus the suprasegmental log-likelihood of the
    prosody segmented by this speaker's own acoustic model."""
    acoustic = model.acoustic
    logb = acoustic.log_emissions(utterance.obs)
    lat = acoustic.lattice()
    _, _, acoustic_logp = _lat.forward(lat, logb)
    path, _ = _lat.viterbi(lat, logb)
    labels, bounds = segments_from_path(path, model.suprasegmental.group_size)
    vectors = prosodic_array(segment_prosody(utterance.tracks, bounds))
    prosodic_logp = model.suprasegmental.log_likelihood(vectors)
    return UtteranceScore(acoustic_logp, prosodic_logp, len(utterance.obs), len(vectors))


def score_utterance(utterance, models: dict[str, SpeakerModel],
                    features: FeatureConfig = DEFAULT_FEATURES) -> dict[str, UtteranceScore]:
    utt = _features(utterance, features)
    return {spk: score_model(model, utt) for spk, model in sorted(models.items())}


@dataclass
class IdentificationResult:
    ranked: list[tuple[str, CombinedScore]]
    winner: str
    margin: float | None
    tie: bool = False


def rank_scores(scores: dict[str, UtteranceScore], alpha: float,
                normalize: bool = False) -> IdentificationResult:
    """Fuse and rank; exact ties go to the lexicographically smallest id."""
    if not scores:
        raise IdentificationError("no reference models to score against")
    fused = {}
    for spk, s in scores.items():
        a, p = s.acoustic_logp, s.prosodic_logp
        if normalize:
            a, p = a / s.num_frames, p / s.num_segments
        fused[spk] = combined_log_score(a, p, alpha)
    ranked = sorted(fused.items(), key=lambda kv: (-kv[1].fused, kv[0]))
    if all(c.fused == -math.inf for _, c in ranked):
        raise IdentificationError("utterance unscorable: every model gives zero likelihood")
    margin = None
    tie = False
    if len(ranked) > 1:
        top, second = ranked[0][1].fused, ranked[1][1].fused
        margin = top - second if np.isfinite(second) else math.inf
        tie = top == second
    return IdentificationResult(ranked, ranked[0][0], margin, tie)


def identify(utterance, sentence_id: str, variant, alpha: float, registry: Registry,
             normalize: bool = False,
             features: FeatureConfig = DEFAULT_FEATURES) -> IdentificationResult:
    models = registry.models(sentence_id, variant)
    if not models:
        raise IdentificationError(
            f"no {Variant(variant).value} models enrolled for sentence {sentence_id!r}")
    return rank_scores(score_utterance(utterance, models, features), alpha, normalize)
