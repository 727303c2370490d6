"""Suprasegmental (prosodic) models layered on an acoustic HMM.

Contiguous blocks of ``group_size`` acoustic states form one
suprasegmental state.  A Viterbi alignment under the acoustic model cuts an
utterance into runs of suprasegmental states; each run becomes one
prosodic observation.  The suprasegmental HMM mirrors the acoustic
model's kind and order and scores that prosodic sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import (
    DEFAULT_FEATURES,
    FeatureConfig,
    FrameTracks,
    frame_tracks,
    prosodic_array,
    segment_prosody,
)
from .hmm import (
    Hmm,
    TopologySpec,
    TrainingError,
    forward_log_likelihood,
    initialize_hmm,
    runs,
    train_em,
    viterbi_segment,
)


class InsufficientProsodyError(TrainingError):
    pass


@dataclass
class SuprasegmentalHmm:
    hmm: Hmm
    group_size: int

    @property
    def num_states(self) -> int:
        return self.hmm.num_states

    @property
    def topology(self) -> TopologySpec:
        return self.hmm.topology

    def log_likelihood(self, prosody) -> float:
        return forward_log_likelihood(self.hmm, prosody)

    def to_dict(self) -> dict:
        return {"group_size": self.group_size, "hmm": self.hmm.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "SuprasegmentalHmm":
        return cls(Hmm.from_dict(data["hmm"]), int(data["group_size"]))


@dataclass
class ProsodicObservation:
    vectors: np.ndarray      # (S, 5)
    labels: np.ndarray       # suprasegmental state (0-based) of each segment
    boundaries: np.ndarray   # segment start frames followed by the end frame


@dataclass(frozen=True)
class CombinedScore:
    acoustic_logp: float
    prosodic_logp: float
    alpha: float
    fused: float


def suprasegmental_labels(path, group_size: int) -> np.ndarray:
    """Map 0-based acoustic states to 0-based suprasegmental states."""
    return np.asarray(path, dtype=int) // group_size


def segments_from_path(path, group_size: int):
    """(labels, boundaries) of the runs of equal suprasegmental state."""
    if len(path) == 0:
        raise ValueError("empty state path")
    segs = runs(suprasegmental_labels(path, group_size))
    labels = np.array([s.state for s in segs], dtype=int)
    boundaries = np.array([s.start for s in segs] + [segs[-1].end], dtype=int)
    return labels, boundaries


def derive_suprasegmental_obs(acoustic_hmm: Hmm, audio, obs, group_size: int = 3,
                              config: FeatureConfig = DEFAULT_FEATURES) -> ProsodicObservation:
    """Prosodic observations of an utterance as segmented by ``acoustic_hmm``.

    ``audio`` may be the :class:`AudioBuffer` or precomputed
    :class:`FrameTracks` of the same utterance as ``obs``.
    """
    tracks = audio if isinstance(audio, FrameTracks) else frame_tracks(audio, config)
    if len(tracks) != len(obs):
        raise ValueError(f"pitch/energy track has {len(tracks)} frames, "
                         f"observations have {len(obs)}")
    path = viterbi_segment(acoustic_hmm, obs).path
    labels, boundaries = segments_from_path(path, group_size)
    vectors = prosodic_array(segment_prosody(tracks, boundaries))
    return ProsodicObservation(vectors, labels, boundaries)


def train_suprasegmental(acoustic_hmm: Hmm, training_set, group_size: int = 3,
                         num_components: int = 2, seed: int = 0, max_iters: int = 20,
                         rel_tol: float = 1e-4, var_floor=1e-4,
                         rel_var_floor: float = 0.0,
                         config: FeatureConfig = DEFAULT_FEATURES):
    """Fit the suprasegmental model over ``acoustic_hmm``.

    ``training_set`` holds ``(audio_or_tracks, obs)`` pairs or already
    derived :class:`ProsodicObservation` objects.  Returns the model and
    the EM :class:`~csphmm.hmm.TrainResult`.
    """
    n = acoustic_hmm.num_states
    if n % group_size:
        raise ValueError(f"{n} acoustic states cannot be split into groups of {group_size}")
    derived = []
    for item in training_set:
        if isinstance(item, ProsodicObservation):
            derived.append(item)
        else:
            audio, obs = item
            derived.append(derive_suprasegmental_obs(acoustic_hmm, audio, obs,
                                                     group_size, config))
    if not derived:
        raise InsufficientProsodyError("no training utterances")
    # with a single suprasegmental state one segment per utterance is all there is
    if n // group_size > 1 and all(len(d.vectors) < 2 for d in derived):
        raise InsufficientProsodyError(
            "insufficient prosodic evidence: every utterance yields fewer than 2 segments")

    topo = TopologySpec(acoustic_hmm.kind, acoustic_hmm.order, n // group_size)
    init = initialize_hmm(topo, [d.vectors for d in derived], num_components, seed,
                          assignments=[d.labels for d in derived], var_floor=var_floor,
                          rel_var_floor=rel_var_floor)
    result = train_em(init, [d.vectors for d in derived], max_iters, rel_tol)
    return SuprasegmentalHmm(result.model, group_size), result


def combined_log_score(acoustic_logp: float, prosodic_logp: float, alpha: float) -> CombinedScore:
    """(1 - alpha) * acoustic + alpha * prosodic, with -inf propagated."""
    if not 0.0 <= alpha <= 1.0 or math.isnan(alpha):
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 0.0:
        fused = float(acoustic_logp)
    elif alpha == 1.0:
        fused = float(prosodic_logp)
    elif acoustic_logp == -math.inf or prosodic_logp == -math.inf:
        fused = -math.inf
    else:
        fused = (1.0 - alpha) * acoustic_logp + alpha * prosodic_logp
    return CombinedScore(float(acoustic_logp), float(prosodic_logp), float(alpha), fused)
