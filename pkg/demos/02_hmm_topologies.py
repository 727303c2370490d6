"""
Left-to-right and circular HMMs of first and second order
=========================================================

Allowed transitions, a Baum-Welch fit on sequences drawn from a known
model, and the Viterbi segmentation the suprasegmental layer builds on.
"""

import numpy as np

from csphmm.hmm import Kind, TopologySpec, build_topology, initialize_hmm, train_em, viterbi_segment

# which first-order transitions exist with 4 states
for kind in Kind:
    mask = build_topology(TopologySpec(kind, 1, 4)).matrix_mask
    print(f"{kind.value}:\n{mask.astype(int)}")

###############################################################################
# Draw data from a 3-state left-to-right chain whose states emit at -3, 0, 3.
# Every sequence dwells in each state for a random stretch.

rng = np.random.default_rng(0)


def draw(length=60):
    states = np.sort(rng.integers(0, 3, length))
    return rng.normal(3.0 * (states - 1), 0.7)[:, None]


train = [draw() for _ in range(30)]

###############################################################################
# Fit every topology and compare the training log-likelihood traces.
# EM never lowers the likelihood, whichever topology it runs on.

for kind in Kind:
    for order in (1, 2):
        topo = TopologySpec(kind, order, 3)
        result = train_em(initialize_hmm(topo, train, num_components=1), train,
                          max_iters=15)
        steps = np.diff(result.trace)
        means = result.model.emissions.means[:, 0, 0]
        print(f"{kind.value:13s} order {order}: {result.iterations:2d} iterations, "
              f"log L {result.trace[0]:8.1f} -> {result.trace[-1]:8.1f}, "
              f"min step {steps.min():+.1e}, state means {np.round(means, 2)}")

###############################################################################
# The Viterbi path of a fresh sequence, summarised as runs of one state.

model = train_em(initialize_hmm(TopologySpec(Kind.LEFT_TO_RIGHT, 2, 3), train, 1),
                 train).model
best = viterbi_segment(model, draw())
print("runs (state, start, end):", [(s.state, s.start, s.end) for s in best.segments])
