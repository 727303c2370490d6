"""Diagonal-covariance Gaussian mixture emissions, one mixture per state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GmmEmissions:
    """Per-state mixtures stacked into arrays.

    weights: (N, C); means, variances: (N, C, D); var_floor: (D,).
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    var_floor: np.ndarray

    @property
    def num_states(self) -> int:
        return self.weights.shape[0]

    @property
    def num_components(self) -> int:
        return self.weights.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[2]

    def copy(self) -> "GmmEmissions":
        return GmmEmissions(self.weights.copy(), self.means.copy(),
                            self.variances.copy(), self.var_floor.copy())

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """log(w_c) + log N(x_t; mu_c, var_c) for every frame, state and
        component, shape (T, N, C)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(
                f"observation dimension mismatch: model expects {self.dim}, "
                f"got shape {x.shape}")
        const = -0.5 * (self.dim * LOG_2PI + np.log(self.variances).sum(axis=-1))
        diff = x[:, None, None, :] - self.means[None]
        quad = np.einsum("tncd,ncd->tnc", diff * diff, 1.0 / self.variances)
        with np.errstate(divide="ignore"):
            log_w = np.log(self.weights)
        return log_w[None] + const[None] - 0.5 * quad

    def log_likelihoods(self, x: np.ndarray) -> np.ndarray:
        """log b_j(o_t), shape (T, N)."""
        return logsumexp(self.component_log_densities(x), axis=-1)

    def validate(self, atol: float = 1e-12) -> None:
        if not np.allclose(self.weights.sum(axis=1), 1.0, atol=atol, rtol=0):
            raise ValueError("mixture weights do not sum to one")
        if np.any(self.variances < self.var_floor * (1 - 1e-12)):
            raise ValueError("variance below floor")

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "var_floor": self.var_floor.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmEmissions":
        return cls(*(np.array(data[key], dtype=np.float64)
                     for key in ("weights", "means", "variances", "var_floor")))


def logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    """log(sum(exp(a))) along ``axis``; rows that are all -inf give -inf."""
    peak = np.max(a, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore", under="ignore"):
        out = np.log(np.sum(np.exp(a - peak), axis=axis, keepdims=True)) + peak
    return np.squeeze(out, axis=axis)


def variance_floor(data: np.ndarray, absolute, relative: float) -> np.ndarray:
    """max(absolute, relative * pooled variance) per dimension.

    ``absolute`` is a scalar or one value per dimension.
    """
    pooled = np.var(data, axis=0) if len(data) > 1 else np.zeros(data.shape[1])
    return np.maximum(np.broadcast_to(np.asarray(absolute, dtype=np.float64), pooled.shape),
                      relative * pooled)


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iters: int = 20):
    """Lloyd's algorithm with k-means++ seeding; returns labels and centers."""
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        pick = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers[c] = x[pick]
        closest = np.minimum(closest, np.sum((x - centers[c]) ** 2, axis=1))
    labels = np.zeros(n, dtype=int)
    for _ in range(iters):
        dist = ((x[:, None, :] - centers[None]) ** 2).sum(axis=-1)
        new_labels = np.argmin(dist, axis=1)
        for c in range(k):
            members = x[new_labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centers


def init_emissions(sequences, assignments, num_states: int, num_components: int,
                   rng: np.random.Generator, var_floor: float = 1e-4,
                   rel_var_floor: float = 0.0) -> GmmEmissions:
    """k-means initialization from frames pooled per state.

    ``assignments[s][t]`` names the state that frame ``t`` of sequence ``s``
    seeds.  A state that receives no frames is seeded from all frames.
    """
    pooled = np.vstack([np.asarray(seq, dtype=np.float64) for seq in sequences])
    labels = np.concatenate([np.asarray(a, dtype=int) for a in assignments])
    dim = pooled.shape[1]
    floor = variance_floor(pooled, var_floor, rel_var_floor)

    weights = np.empty((num_states, num_components))
    means = np.empty((num_states, num_components, dim))
    variances = np.empty((num_states, num_components, dim))
    for state in range(num_states):
        data = pooled[labels == state]
        if len(data) == 0:
            data = pooled
        state_var = np.maximum(np.var(data, axis=0), floor)
        comp_labels, centers = _kmeans(data, num_components, rng)
        counts = np.bincount(comp_labels, minlength=num_components).astype(np.float64)
        for c in range(num_components):
            members = data[comp_labels == c]
            means[state, c] = centers[c]
            if len(members) > 1:
                variances[state, c] = np.maximum(members.var(axis=0), floor)
            else:
                variances[state, c] = state_var
        counts = np.maximum(counts, 1e-3 * max(counts.sum(), 1.0))
        weights[state] = counts / counts.sum()
    return GmmEmissions(weights, means, variances, floor)
