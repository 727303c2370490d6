"""Speaker identification with acoustic and suprasegmental HMMs.

Each reference speaker is modelled by an acoustic HMM over MFCC frames and
a suprasegmental HMM over segment-level prosody (pitch, energy, duration).
Both come in left-to-right or circular form and in first or second order;
their log-likelihoods are fused as ``(1 - alpha) * acoustic + alpha * prosodic``.
"""

from .audio import AudioBuffer, WavFormatError, read_wav, write_wav
from .corpus import CorpusError, CorpusManifest, ShoutTransform, SynthConfig, ingest_corpus, synth_corpus
from .evaluation import AccuracyTable, TTestResult, accuracy_table, alpha_sweep, partition, t_statistic
from .experiment import ExperimentConfig, cross_validate, load_config, run_experiment
from .features import (
    FeatureConfig,
    ObservationSequence,
    ProsodicVector,
    UtteranceFeatures,
    acoustic_features,
    compute_delta,
    compute_mfcc,
    estimate_f0,
    frame_signal,
    prosodic_features,
)
from .hmm import Hmm, Kind, TopologySpec, forward_log_likelihood, train_em, viterbi_segment
from .speaker import ModelConfig, Registry, SpeakerModel, Variant, enroll, identify
from .suprasegmental import SuprasegmentalHmm, combined_log_score, derive_suprasegmental_obs, train_suprasegmental

__version__ = "0.1.0"
