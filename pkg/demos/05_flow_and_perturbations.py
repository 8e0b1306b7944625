"""Spectral flow and robustness of the index.

For a symmetric path A(t) the number of eigenvalues that cross zero,
counted with sign, equals the index.  Here an upward crossing counts -1,
matching the endpoint count u(A-) - u(A+) of positive eigenvalues.
"""

import math

import numpy as np

from dichotomy_lab import (
    SelfadjointPath,
    get_problem,
    index_for_family,
    perturbation_invariance,
    piecewise_pipeline,
    random_vanishing_perturbation,
    spectral_flow,
)

path = SelfadjointPath(lambda t: np.diag([math.tanh(t), -1.0]), 2)
flow = spectral_flow(path)
print("flow of diag(tanh t, -1):", flow.flow, " crossings (t, eigen index, direction):", flow.crossings)
print("index of the matching operator:", index_for_family(get_problem("flow-2d").family, 20).index)

# A rank-one symmetric term switched on smoothly.
p = get_problem("commensurable-pair")
f = spectral_flow(p.selfadjoint_path())
print("commensurable pair: flow", f.flow, "endpoint dims", f.endpoint_unstable_dims)

# Random low-rank perturbations that die out at both ends never move the index.
base = get_problem("piecewise-diag-plus2").family
rng = np.random.default_rng(7)
changed = 0
for _ in range(25):
    B = random_vanishing_perturbation(2, rng)
    rep = perturbation_invariance(base, B, 20)
    changed += not rep.preserved
print("perturbations that changed the index:", changed, "of 25")

# Piecewise-constant coefficients: node, pair and finite section in one call.
E = np.array([[0.0, 1.0], [1.0, 0.0]])
rep = piecewise_pipeline(np.diag([-1.0, 1.0]), np.diag([1.0, -1.0]), B=lambda t: 0.4 * math.exp(-t * t) * E)
print("piecewise pipeline:", rep.D.as_tuple(), "perturbed index", rep.perturbed.index, "consistent", rep.consistent)
