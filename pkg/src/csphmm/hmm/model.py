from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import lattice as _lat
from .emissions import GmmEmissions, init_emissions, logsumexp
from .topology import Kind, TopologySpec, TransitionModel, build_topology

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


def _frames(obs) -> np.ndarray:
    frames = np.asarray(getattr(obs, "frames", obs), dtype=np.float64)
    if frames.ndim != 2 or len(frames) == 0:
        raise ValueError("observation sequence must be a non-empty (T, D) array")
    return frames


@dataclass
class Segment:
    state: int
    start: int
    end: int  # exclusive


@dataclass
class ViterbiResult:
    path: np.ndarray
    log_score: float
    segments: list[Segment]


def runs(labels) -> list[Segment]:
    """Maximal runs of equal consecutive labels."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return []
    change = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(labels)]])
    return [Segment(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


@dataclass
class Hmm:
    """Continuous-density HMM of order 1 or 2 with a structural mask."""

    topology: TopologySpec
    transitions: TransitionModel
    emissions: GmmEmissions

    def __post_init__(self):
        n = self.topology.num_states
        if self.transitions.num_states != n or self.emissions.num_states != n:
            raise ValueError("topology, transitions and emissions disagree on N")
        if self.transitions.order != self.topology.order:
            raise ValueError("transition order does not match topology")

    @property
    def num_states(self) -> int:
        return self.topology.num_states

    @property
    def order(self) -> int:
        return self.topology.order

    @property
    def kind(self) -> Kind:
        return self.topology.kind

    def copy(self) -> "Hmm":
        return Hmm(self.topology, self.transitions.copy(), self.emissions.copy())

    def lattice(self) -> _lat.Lattice:
        return _lat.Lattice.from_transitions(self.transitions)

    def log_emissions(self, obs) -> np.ndarray:
        return self.emissions.log_likelihoods(_frames(obs))

    def log_likelihood(self, obs) -> float:
        return forward_log_likelihood(self, obs)

    def to_dict(self) -> dict:
        return {
            "topology": {
                "kind": self.topology.kind.value,
                "order": self.topology.order,
                "num_states": self.topology.num_states,
            },
            "transitions": self.transitions.to_dict(),
            "emissions": self.emissions.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Hmm":
        topo = data["topology"]
        return cls(
            TopologySpec(Kind(topo["kind"]), int(topo["order"]), int(topo["num_states"])),
            TransitionModel.from_dict(data["transitions"]),
            GmmEmissions.from_dict(data["emissions"]),
        )

    def dumps(self) -> str:
        return json.dumps({"format": "csphmm-hmm", "version": FORMAT_VERSION,
                           "model": self.to_dict()}, sort_keys=True, indent=1)

    @classmethod
    def loads(cls, text: str) -> "Hmm":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model document version {doc.get('version')}")
        return cls.from_dict(doc["model"])


def forward_log_likelihood(hmm: Hmm, obs) -> float:
    """Natural-log P(O | model).  Returns -inf if no path can emit O."""
    logb = hmm.log_emissions(obs)
    _, _, log_prob = _lat.forward(hmm.lattice(), logb)
    if log_prob == -np.inf:
        logger.warning("observation sequence has zero probability under the model")
    return log_prob


def viterbi_segment(hmm: Hmm, obs) -> ViterbiResult:
    logb = hmm.log_emissions(obs)
    path, score = _lat.viterbi(hmm.lattice(), logb)
    if score == -np.inf:
        logger.warning("no path of non-zero probability; Viterbi path is arbitrary")
    return ViterbiResult(path, score, runs(path))


def uniform_assignment(length: int, num_states: int) -> np.ndarray:
    """Split ``length`` frames into ``num_states`` contiguous equal blocks."""
    return np.minimum((np.arange(length) * num_states) // length, num_states - 1)


def initialize_hmm(topology: TopologySpec, sequences, num_components: int = 4,
                   seed: int = 0, assignments=None, var_floor: float = 1e-4,
                   rel_var_floor: float = 0.0) -> Hmm:
    """Uniform transitions over the mask plus k-means mixtures.

    Without explicit ``assignments`` each sequence is cut into N equal
    contiguous blocks, block s seeding state s.
    """
    frames = [_frames(seq) for seq in sequences]
    if assignments is None:
        assignments = [uniform_assignment(len(f), topology.num_states) for f in frames]
    rng = np.random.default_rng(seed)
    emissions = init_emissions(frames, assignments, topology.num_states, num_components,
                               rng, var_floor, rel_var_floor)
    return Hmm(topology, build_topology(topology), emissions)


@dataclass
class TrainResult:
    model: Hmm
    trace: list[float]
    warnings: list[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


@dataclass
class _Stats:
    first: np.ndarray
    trans: np.ndarray
    initial: np.ndarray         # (N,) expected first-frame occupancy
    occupancy: np.ndarray       # (N,)
    comp_occ: np.ndarray        # (N, C)
    resp: list                  # per sequence (T, N, C) responsibilities


def _e_step(model: Hmm, lat: _lat.Lattice, seqs) -> tuple[float, _Stats]:
    n, c = model.emissions.num_states, model.emissions.num_components
    stats = _Stats(np.zeros_like(lat.log_first), np.zeros_like(lat.log_trans),
                   np.zeros(n), np.zeros(n), np.zeros((n, c)), [])
    total = 0.0
    for x in seqs:
        comp = model.emissions.component_log_densities(x)
        logb = logsumexp(comp, axis=-1)
        post = _lat.posteriors(lat, logb)
        total += post.log_prob
        if not np.isfinite(post.log_prob):
            stats.resp.append(None)
            continue
        stats.first += post.first_counts
        stats.trans += post.trans_counts
        stats.initial += post.occupancy[0]
        with np.errstate(invalid="ignore", under="ignore"):
            within = np.exp(comp - logb[:, :, None])
        within = np.nan_to_num(within, nan=0.0)
        resp = post.occupancy[:, :, None] * within
        stats.occupancy += post.occupancy.sum(axis=0)
        stats.comp_occ += resp.sum(axis=0)
        stats.resp.append(resp)
    return total, stats


def _renormalize(counts: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Normalize the last axis; groups without evidence keep their values."""
    totals = counts.sum(axis=-1, keepdims=True)
    fresh = np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)
    return np.where(totals > 0, fresh, current)


def _m_step(model: Hmm, lat: _lat.Lattice, seqs, stats: _Stats, notes: list[str]) -> None:
    trans = model.transitions
    n = model.num_states
    trans.initial = _renormalize(stats.initial, trans.initial)
    if trans.order == 1:
        counts = stats.first + stats.trans
        counts = np.where(trans.matrix_mask, counts, 0.0)
        trans.matrix = _renormalize(counts, trans.matrix)
    else:
        first = np.zeros((n, n))
        pairs = lat.pairs
        np.add.at(first, (np.arange(n)[:, None].repeat(len(pairs), 1),
                          np.broadcast_to(pairs[:, 1], (n, len(pairs)))), stats.first)
        first = np.where(trans.matrix_mask, first, 0.0)
        trans.matrix = _renormalize(first, trans.matrix)

        tensor = np.zeros((n, n, n))
        src, dst = np.nonzero(np.isfinite(lat.log_trans))
        np.add.at(tensor, (pairs[src, 0], pairs[src, 1], pairs[dst, 1]),
                  stats.trans[src, dst])
        tensor = np.where(trans.tensor_mask, tensor, 0.0)
        trans.tensor = _renormalize(tensor, trans.tensor)

    em = model.emissions
    sums = np.zeros_like(em.means)
    for x, resp in zip(seqs, stats.resp):
        if resp is not None:
            sums += np.einsum("tnc,td->ncd", resp, x)
    live_comp = stats.comp_occ > 0
    new_means = np.where(live_comp[:, :, None],
                         sums / np.where(live_comp, stats.comp_occ, 1.0)[:, :, None],
                         em.means)
    sq = np.zeros_like(em.means)
    for x, resp in zip(seqs, stats.resp):
        if resp is not None:
            diff = x[:, None, None, :] - new_means[None]
            sq += np.einsum("tnc,tncd->ncd", resp, diff * diff)
    new_vars = np.where(live_comp[:, :, None],
                        sq / np.where(live_comp, stats.comp_occ, 1.0)[:, :, None],
                        em.variances)
    new_vars = np.maximum(new_vars, em.var_floor)

    for state in range(n):
        if stats.comp_occ[state].sum() <= 0:
            notes.append(f"state {state + 1} received zero occupancy; emission kept")
            continue
        em.weights[state] = stats.comp_occ[state] / stats.comp_occ[state].sum()
        em.means[state] = new_means[state]
        em.variances[state] = new_vars[state]


def total_log_likelihood(hmm: Hmm, sequences) -> float:
    lat = hmm.lattice()
    return float(sum(_lat.forward(lat, hmm.log_emissions(x))[2] for x in sequences))


def train_em(hmm: Hmm, training_sequences, max_iters: int = 20,
             rel_tol: float = 1e-4) -> TrainResult:
    """Baum-Welch re-estimation of the initial distribution, transitions and
    mixtures.

    Structural zeros stay zero since forbidden transitions never collect
    expected counts.  ``trace[k]`` is the total log-likelihood of the
    parameters after ``k`` updates.
    """
    seqs = [_frames(x) for x in training_sequences]
    if not seqs:
        raise TrainingError("no training sequences")
    model = hmm.copy()
    notes: list[str] = []
    trace: list[float] = []
    for it in range(max_iters + 1):
        lat = model.lattice()
        total, stats = _e_step(model, lat, seqs)
        if total == -np.inf:
            if not trace:
                raise TrainingError("every training sequence has zero likelihood "
                                    "under the initial model")
            raise TrainingError("training diverged to zero likelihood")
        trace.append(total)
        if it > 0:
            gain = trace[-1] - trace[-2]
            if gain < rel_tol * abs(trace[-2]):
                break
        if it == max_iters:
            break
        _m_step(model, lat, seqs, stats, notes)
    for note in dict.fromkeys(notes):
        logger.warning(note)
    return TrainResult(model, trace, list(dict.fromkeys(notes)))
