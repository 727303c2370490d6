"""Left-to-right and circular transition structures of order 1 and 2."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Kind(str, Enum):
    LEFT_TO_RIGHT = "left-to-right"
    CIRCULAR = "circular"


@dataclass(frozen=True)
class TopologySpec:
    kind: Kind
    order: int
    num_states: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        minimum = 2 if self.kind is Kind.CIRCULAR else 1
        if self.num_states < minimum:
            raise ValueError(
                f"{self.kind.value} topology needs at least {minimum} states, "
                f"got {self.num_states}")


def first_order_mask(kind: Kind, n: int) -> np.ndarray:
    """Allowed i -> j moves: self loop and successor, plus n -> 1 for a ring."""
    mask = np.eye(n, dtype=bool)
    idx = np.arange(n - 1)
    mask[idx, idx + 1] = True
    if Kind(kind) is Kind.CIRCULAR:
        mask[n - 1, 0] = True
    return mask


def second_order_mask(kind: Kind, n: int) -> np.ndarray:
    """(i, j) -> k is allowed exactly when i -> j and j -> k both are."""
    m1 = first_order_mask(kind, n)
    return m1[:, :, None] & m1[None, :, :]


def _normalize_groups(mask: np.ndarray) -> np.ndarray:
    weights = mask.astype(np.float64)
    totals = weights.sum(axis=-1, keepdims=True)
    return np.divide(weights, totals, out=np.zeros_like(weights), where=totals > 0)


@dataclass
class TransitionModel:
    """Initial distribution and transition probabilities.

    For order 1, ``matrix`` holds a_ij.  For order 2, ``matrix`` holds the
    first-step transition out of the initial state and ``tensor`` holds
    a_ijk = P(q_t = k | q_{t-2} = i, q_{t-1} = j).
    """

    order: int
    initial: np.ndarray
    matrix: np.ndarray
    matrix_mask: np.ndarray
    tensor: np.ndarray | None = None
    tensor_mask: np.ndarray | None = None

    @property
    def num_states(self) -> int:
        return len(self.initial)

    @property
    def probabilities(self) -> np.ndarray:
        """The defining transition container: 2-D for order 1, 3-D for order 2."""
        return self.matrix if self.order == 1 else self.tensor

    @property
    def mask(self) -> np.ndarray:
        return self.matrix_mask if self.order == 1 else self.tensor_mask

    def copy(self) -> "TransitionModel":
        return TransitionModel(
            self.order, self.initial.copy(), self.matrix.copy(), self.matrix_mask.copy(),
            None if self.tensor is None else self.tensor.copy(),
            None if self.tensor_mask is None else self.tensor_mask.copy(),
        )

    def validate(self, atol: float = 1e-10) -> None:
        groups = [(self.matrix, self.matrix_mask)]
        if self.order == 2:
            groups.append((self.tensor, self.tensor_mask))
        for probs, mask in groups:
            if probs.shape != mask.shape:
                raise ValueError("transition array and mask differ in shape")
            if np.any(probs[~mask] != 0.0):
                raise ValueError("mass on a structurally forbidden transition")
            if np.any(probs < 0) or np.any(probs > 1):
                raise ValueError("transition probabilities outside [0, 1]")
            sums = probs.sum(axis=-1)
            live = mask.any(axis=-1)
            if not np.allclose(sums[live], 1.0, atol=atol, rtol=0):
                raise ValueError("transition groups do not sum to one")
        if not np.isclose(self.initial.sum(), 1.0, atol=atol, rtol=0):
            raise ValueError("initial distribution does not sum to one")

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "initial": self.initial.tolist(),
            "matrix": self.matrix.tolist(),
            "matrix_mask": self.matrix_mask.tolist(),
            "tensor": None if self.tensor is None else self.tensor.tolist(),
            "tensor_mask": None if self.tensor_mask is None else self.tensor_mask.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransitionModel":
        tensor = data.get("tensor")
        tensor_mask = data.get("tensor_mask")
        return cls(
            order=int(data["order"]),
            initial=np.array(data["initial"], dtype=np.float64),
            matrix=np.array(data["matrix"], dtype=np.float64),
            matrix_mask=np.array(data["matrix_mask"], dtype=bool),
            tensor=None if tensor is None else np.array(tensor, dtype=np.float64),
            tensor_mask=None if tensor_mask is None else np.array(tensor_mask, dtype=bool),
        )


def initial_distribution(kind: Kind, n: int) -> np.ndarray:
    if Kind(kind) is Kind.LEFT_TO_RIGHT:
        pi = np.zeros(n)
        pi[0] = 1.0
        return pi
    return np.full(n, 1.0 / n)


def build_topology(spec: TopologySpec) -> TransitionModel:
    """Structural masks with transitions uniform over each allowed group."""
    n = spec.num_states
    m1 = first_order_mask(spec.kind, n)
    model = TransitionModel(
        order=spec.order,
        initial=initial_distribution(spec.kind, n),
        matrix=_normalize_groups(m1),
        matrix_mask=m1,
    )
    if spec.order == 2:
        m2 = second_order_mask(spec.kind, n)
        model.tensor = _normalize_groups(m2)
        model.tensor_mask = m2
    return model


def is_irreducible(mask: np.ndarray) -> bool:
    """Whether every state can reach every other state under ``mask``."""
    n = len(mask)
    reach = mask.astype(bool) | np.eye(n, dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(n, 2)))) + 1):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return bool(reach.all())
