"""Passing between functions of t and sequences indexed by n.

Three maps tie the differential operator -d/dt + A(t) to the difference
operator D:

* R averages a forcing f over [n-1, n] with the propagator,
* S spreads a sequence into a function using a bump that vanishes at the integers,
* B interpolates a sequence by the flow, sending kernel sequences to solutions.
"""

import math

import numpy as np

from dichotomy_lab import ContinuousCoefficients, SampledFunction, map_R, map_S, verify_correspondence
from dichotomy_lab.reduction import WeightFunction, map_B

fam = ContinuousCoefficients(lambda t: np.array([[-math.tanh(t)]]), 1)


def u(t):
    return np.array([math.exp(-t * t)])


def du(t):
    return np.array([-2.0 * t * math.exp(-t * t)])


# With f = A u - u', R f reproduces D applied to the samples u(n).
for h in (1e-2, 5e-3, 2.5e-3):
    rep = verify_correspondence(fam, u, du, window=(-6, 6), h=h)
    print(f"h = {h:<7} |Rf - D u(n)| = {rep.r_residual:.2e}   |R(-Sy) + Dy - y| = {rep.surjectivity_residual:.2e}")

# The weight used by S: vanishes at the integers and integrates to one.
w = WeightFunction.default()
print("weight:", w.name, " mean:", w.mean())

# The kernel of D for this problem is sech(n); B turns it into the solution sech(t).
x = np.array([[1.0 / math.cosh(n)] for n in range(-8, 9)])
Bx = map_B(x, fam, -8, h=0.1)
err = max(abs(Bx(t)[0] - 1.0 / math.cosh(t)) for t in Bx.times)
print(f"B(sech(n)) vs sech(t): max error {err:.1e}")

# S of an impulse is a single bump on [0, 1].
x = np.zeros((3, 1))
x[0, 0] = 1.0
Sx = map_S(x, fam, 0, h=0.25)
print("S(impulse) samples:", np.round(Sx.values[:, 0], 4))

# R of zero forcing is zero.
zero = SampledFunction.from_rule(lambda t: np.zeros(1), (-2, 2), 0.1)
print("R(0):", map_R(zero, fam)[1].ravel())
