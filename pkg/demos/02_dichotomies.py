"""Exponential dichotomies on half-lines.

Take u' = -tanh(t) u.  For large positive t the coefficient is close to -1
so every solution decays; for large negative t it is close to +1 so every
solution grows going forward (decays going backward).  The dichotomy on
[0, inf) is therefore all stable, the one on (-inf, 0] all unstable.
"""

import math

import numpy as np

from dichotomy_lab import ContinuousCoefficients, halfline_dichotomy, verify_dichotomy
from dichotomy_lab.dichotomy import dichotomy_constants, extend_discrete_to_continuous
from dichotomy_lab.problems import get_problem

fam = ContinuousCoefficients(lambda t: np.array([[-math.tanh(t)]]), 1)

plus = halfline_dichotomy(fam, "plus", 20)
minus = halfline_dichotomy(fam, "minus", 20)
print(f"rank P+ = {plus.rank}, rank P- = {minus.rank}")
print(f"fitted constants on [0, 20]: M = {plus.M:.3f}, alpha = {plus.alpha:.3f}")

# Far from the switch the decay rate approaches 1, and tanh(2) bounds it from below.
M, alpha = dichotomy_constants(plus.restrict(2, 20))
print(f"on [2, 20]: alpha = {alpha:.4f} >= tanh(2) = {math.tanh(2):.4f}")

# The same record built by QR iteration of the step matrices, with no knowledge of the limits.
qr = halfline_dichotomy(fam, "plus", 20, "qr-product")
print("qr-product record verifies:", verify_dichotomy(qr, tolerance=1e-6).passed)

# A record with the roles of P and I - P swapped is caught by the estimates.
bad = verify_dichotomy(plus.swapped())
print("swapped record verifies:", bad.passed, "|", bad.failures[0])

# Between grid points the projector is transported with the flow.
P_half = extend_discrete_to_continuous(plus, fam, 0.5)
U = fam.propagate(1.0, 0.5)
print("intertwining at t = 0.5:", np.linalg.norm(plus.projector_at(1).matrix @ U - U @ P_half.matrix))

# Periodic coefficients: the monodromy matrix of u'' = (4 + cos t) u has one
# multiplier inside the unit circle, so the Floquet projector has rank one.
hill = get_problem("hill-hyperbolic")
rec = halfline_dichotomy(hill.family, "plus", 10, "floquet")
print("Hill equation, rank of the Floquet projector:", rec.rank)
