"""First- and second-order HMMs with left-to-right or circular structure."""

from .emissions import GmmEmissions, init_emissions, logsumexp
from .model import (
    Hmm,
    Segment,
    TrainingError,
    TrainResult,
    ViterbiResult,
    forward_log_likelihood,
    initialize_hmm,
    runs,
    total_log_likelihood,
    train_em,
    uniform_assignment,
    viterbi_segment,
)
from .topology import (
    Kind,
    TopologySpec,
    TransitionModel,
    build_topology,
    first_order_mask,
    is_irreducible,
    second_order_mask,
)

__all__ = [
    "GmmEmissions", "Hmm", "Kind", "Segment", "TopologySpec", "TrainResult",
    "TrainingError", "TransitionModel", "ViterbiResult", "build_topology",
    "first_order_mask", "forward_log_likelihood", "init_emissions",
    "initialize_hmm", "is_irreducible", "logsumexp", "runs",
    "second_order_mask", "total_log_likelihood", "train_em",
    "uniform_assignment", "viterbi_segment",
]
