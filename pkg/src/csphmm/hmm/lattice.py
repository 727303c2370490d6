"""Log-space forward, backward and Viterbi over a first-order chain.

A second-order model is evaluated on the equivalent first-order chain whose
states are the allowed (previous, current) pairs.  Because the first
observation has no predecessor, the chain has two layers: an entry layer
of single states used at t = 0 and a steady layer used from t = 1 on.
For a first-order model both layers are the original states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emissions import logsumexp
from .topology import TransitionModel


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


@dataclass
class Lattice:
    log_init: np.ndarray     # (S0,)
    emit0: np.ndarray        # (S0,) state emitted by each entry-layer node
    log_first: np.ndarray    # (S0, S1)
    log_trans: np.ndarray    # (S1, S1)
    emit1: np.ndarray        # (S1,)
    pairs: np.ndarray | None = None  # (S1, 2) for second order

    @property
    def num_states(self) -> int:
        return len(self.emit0)

    @classmethod
    def from_transitions(cls, trans: TransitionModel) -> "Lattice":
        n = trans.num_states
        states = np.arange(n)
        log_a = _log(trans.matrix)
        if trans.order == 1:
            return cls(_log(trans.initial), states, log_a, log_a, states)

        pairs = np.argwhere(trans.matrix_mask)
        index = {(int(i), int(j)): p for p, (i, j) in enumerate(pairs)}
        s1 = len(pairs)
        first = np.full((n, s1), -np.inf)
        steady = np.full((s1, s1), -np.inf)
        log_a2 = _log(trans.tensor)
        for p, (i, j) in enumerate(pairs):
            first[i, p] = log_a[i, j]
            for k in np.flatnonzero(trans.tensor_mask[i, j]):
                steady[p, index[(int(j), int(k))]] = log_a2[i, j, k]
        return cls(_log(trans.initial), states, first, steady, pairs[:, 1].copy(), pairs)


def forward(lat: Lattice, logb: np.ndarray):
    """Returns (alpha0, alpha, log_prob); alpha[t - 1] belongs to time t >= 1."""
    T = len(logb)
    alpha0 = lat.log_init + logb[0, lat.emit0]
    alpha = np.empty((T - 1, len(lat.emit1)))
    if T == 1:
        return alpha0, alpha, float(logsumexp(alpha0, axis=0))
    alpha[0] = logsumexp(alpha0[:, None] + lat.log_first, axis=0) + logb[1, lat.emit1]
    for t in range(2, T):
        alpha[t - 1] = (logsumexp(alpha[t - 2][:, None] + lat.log_trans, axis=0)
                        + logb[t, lat.emit1])
    return alpha0, alpha, float(logsumexp(alpha[-1], axis=0))


def backward(lat: Lattice, logb: np.ndarray):
    """Returns (beta0, beta) laid out like :func:`forward`."""
    T = len(logb)
    beta = np.zeros((T - 1, len(lat.emit1)))
    if T == 1:
        return np.zeros(len(lat.emit0)), beta
    for t in range(T - 1, 1, -1):
        nxt = logb[t, lat.emit1] + beta[t - 1]
        beta[t - 2] = logsumexp(lat.log_trans + nxt[None, :], axis=1)
    nxt = logb[1, lat.emit1] + beta[0]
    beta0 = logsumexp(lat.log_first + nxt[None, :], axis=1)
    return beta0, beta


@dataclass
class Posteriors:
    log_prob: float
    occupancy: np.ndarray     # (T, N) state posteriors
    first_counts: np.ndarray  # (S0, S1) expected entry -> steady transitions
    trans_counts: np.ndarray  # (S1, S1) expected steady transitions


def posteriors(lat: Lattice, logb: np.ndarray) -> Posteriors:
    T, n = logb.shape
    alpha0, alpha, log_prob = forward(lat, logb)
    s0, s1 = len(lat.emit0), len(lat.emit1)
    if not np.isfinite(log_prob):
        return Posteriors(log_prob, np.zeros((T, n)), np.zeros((s0, s1)), np.zeros((s1, s1)))
    beta0, beta = backward(lat, logb)

    occupancy = np.zeros((T, n))
    with np.errstate(under="ignore"):
        np.add.at(occupancy[0], lat.emit0, np.exp(alpha0 + beta0 - log_prob))
        if T > 1:
            gamma = np.exp(alpha + beta - log_prob)
            onehot = np.zeros((s1, n))
            onehot[np.arange(s1), lat.emit1] = 1.0
            occupancy[1:] = gamma @ onehot

        first = np.zeros((s0, s1))
        trans = np.zeros((s1, s1))
        if T > 1:
            nxt = logb[1, lat.emit1] + beta[0]
            first = np.exp(alpha0[:, None] + lat.log_first + nxt[None, :] - log_prob)
        if T > 2:
            nxt = logb[2:, lat.emit1] + beta[1:]
            log_xi = (alpha[:-1][:, :, None] + lat.log_trans[None]
                      + nxt[:, None, :] - log_prob)
            trans = np.exp(logsumexp(log_xi, axis=0))
    return Posteriors(log_prob, occupancy, first, trans)


def viterbi(lat: Lattice, logb: np.ndarray):
    """Best path as original state indices and its log score.

    Ties go to the lowest-numbered node at every step.
    """
    T = len(logb)
    delta0 = lat.log_init + logb[0, lat.emit0]
    if T == 1:
        best = int(np.argmax(delta0))
        return np.array([lat.emit0[best]]), float(delta0[best])

    cand = delta0[:, None] + lat.log_first
    back_first = np.argmax(cand, axis=0)
    delta = cand[back_first, np.arange(cand.shape[1])] + logb[1, lat.emit1]
    back = np.empty((T - 2, len(lat.emit1)), dtype=int)
    cols = np.arange(len(lat.emit1))
    for t in range(2, T):
        cand = delta[:, None] + lat.log_trans
        back[t - 2] = np.argmax(cand, axis=0)
        delta = cand[back[t - 2], cols] + logb[t, lat.emit1]

    node = int(np.argmax(delta))
    score = float(delta[node])
    nodes = np.empty(T - 1, dtype=int)
    nodes[-1] = node
    for t in range(T - 1, 1, -1):
        nodes[t - 2] = back[t - 2, nodes[t - 1]]
    start = back_first[nodes[0]]
    path = np.concatenate([[lat.emit0[start]], lat.emit1[nodes]])
    return path, score
