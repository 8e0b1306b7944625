"""Subspaces, Fredholm pairs and spectral projections.

Everything downstream is built from three pieces of linear algebra: a
rank rule that refuses to guess, Fredholm pairs of subspaces, and the
Riesz projection of a matrix onto the spectrum inside the unit circle.
"""

import numpy as np

from dichotomy_lab import config, fredholm_pair, riesz_projection, eigen_projection, relative_dimension
from dichotomy_lab.errors import RankAmbiguous, SpectrumOnContour
from dichotomy_lab.subspace import complement, hyperbolicity_gap, orthonormalize

rng = np.random.default_rng(0)

# A 5x3 matrix whose third column is the sum of the first two spans a plane.
a = rng.standard_normal((5, 2))
W = orthonormalize(np.column_stack([a, a.sum(axis=1)]))
print("dimension of the column span:", W.dim)

# The rank rule insists on a clear gap in the singular values. Without one it raises.
with config.tolerances(rank_rtol=1e-3):
    try:
        orthonormalize(np.diag([1.0, 2e-3, 5e-4]))
    except RankAmbiguous as exc:
        print("ambiguous rank refused:", exc)

# Fredholm pair of two generic planes in R^3: they meet in a line and span everything.
V = orthonormalize(rng.standard_normal((3, 2)))
U = orthonormalize(rng.standard_normal((3, 2)))
pair = fredholm_pair(U, V)
print(f"pair of planes in R^3: alpha={pair.alpha} beta={pair.beta} index={pair.index}")

# The diagonal of R^k + R^k against the orthogonal complement of the first factor.
k = 3
I = np.eye(k)
diag = orthonormalize(np.vstack([I, I]))
first = orthonormalize(np.vstack([I, np.zeros((k, k))]))
p = fredholm_pair(diag, complement(first))
print(f"diagonal vs complement of first factor: index {p.index} (alpha {p.alpha}, beta {p.beta})")
print("relative dimension of the diagonal to the first factor:", relative_dimension(diag, first))

# Riesz projection for the unit disc, checked against an eigenvector construction.
lam = np.array([0.3, -0.6, 0.5j, 1.8, -2.2, 1.5j])
S = np.eye(6) + 0.4 * rng.standard_normal((6, 6))
M = S @ np.diag(lam) @ np.linalg.inv(S)
P = riesz_projection(M)
Q = eigen_projection(M, lambda z: abs(z) < 1)
print(f"rank {P.rank}, contour vs eigenvectors: {np.linalg.norm(P.matrix - Q.matrix, 2):.2e}")

# An eigenvalue on the circle has no Riesz projection.
try:
    riesz_projection(np.diag([1.0, 0.2]))
except SpectrumOnContour as exc:
    print("refused:", exc)

# Hyperbolicity of a generator is measured on exp(A).
print("gap of diag(-1, 1):", hyperbolicity_gap(np.diag([-1.0, 1.0])))
print("gap of a rotation: ", hyperbolicity_gap(np.array([[0.0, 1.0], [-1.0, 0.0]])))
