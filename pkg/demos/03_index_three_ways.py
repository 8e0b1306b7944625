"""The same integer three ways.

For the switch A(t) = diag(1, -1) before 0 and diag(-1, 1) after, one
channel decays in both directions (a kernel) and the other grows in both
(a cokernel).  The index is 0 with dim ker = codim im = 1, and it appears as

* the defect numbers of the difference operator (x_n) -> (x_n - U(n, n-1) x_{n-1}),
* the node operator (I - P+) U(b, a) on ker P-,
* the Fredholm pair (ker P-_0, Im P+_0).
"""

import numpy as np

from dichotomy_lab import (
    PiecewiseConstantPerturbed,
    assemble_truncated_D,
    halfline_dichotomy,
    index_of_D,
    kernel_basis,
    node_operator,
)
from dichotomy_lab.fredholm import kernel_fibers, pair_vs_node_crosscheck
from dichotomy_lab.problems import get_problem, list_problems
from dichotomy_lab.fredholm import dichotomy_theorem_verify

fam = PiecewiseConstantPerturbed(np.diag([-1.0, 1.0]), np.diag([1.0, -1.0]))
N = 20
rm = halfline_dichotomy(fam, "minus", N)
rp = halfline_dichotomy(fam, "plus", N)

T = assemble_truncated_D(fam, (-N, N), (rm, rp))
print("finite section:", T.assembled.shape, "->", index_of_D(T).as_tuple())

node = node_operator(rm, rp, fam, -3, 4)
print("node N(4, -3):", node.numbers.as_tuple())

cross = pair_vs_node_crosscheck(rm.projector_at(0), rp.projector_at(0))
print("pair at 0:", (cross.pair.alpha, cross.pair.beta, cross.pair.index))

# The kernel vector lives in the first channel and looks like e^{-|n|}.
v = kernel_basis(T)[:, 0]
first = [abs(T.block(v, n)[0]) for n in range(-3, 4)]
print("kernel vector, first channel near 0:", np.round(np.array(first) / max(first), 4))
print("fiber dimensions:", sorted(set(kernel_fibers(T).values())))

# And across the registry.
print()
for name in list_problems():
    r = dichotomy_theorem_verify(get_problem(name))
    print(f"{name:26} D {r.D.as_tuple()}  node {r.node_00.as_tuple()}  "
          f"pair {(r.pair.alpha, r.pair.beta, r.pair.index)}  {'ok' if r.consistent else r.failures}")
