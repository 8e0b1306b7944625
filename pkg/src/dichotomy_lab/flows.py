"""Spectral flow of symmetric paths, vanishing perturbations, piecewise-constant pipelines.

Sign convention for crossings: the flow is ``u(A_minus) - u(A_plus)`` with
``u`` the number of positive eigenvalues, so an eigenvalue moving upward
through zero as ``t`` increases contributes ``-1``.  This makes the signed
crossing count equal to the endpoint formula, and both equal to the index of
``D`` for the same coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import config
from .errors import (
    HyperbolicityRequired,
    NonHyperbolicEndpoint,
    NonSymmetric,
    NotAsymptoticallyConstant,
    NotHyperbolic,
    PerturbationNotVanishing,
)
from .evolution import ContinuousCoefficients, EvolutionFamily, PiecewiseConstantPerturbed
from .dichotomy import halfline_dichotomy
from .fredholm import (
    ConsistencyReport,
    FredholmNumbers,
    assemble_truncated_D,
    index_of_D,
    pair_vs_node_crosscheck,
)
from .subspace import (
    PairReport,
    Projector,
    fredholm_pair,
    hyperbolicity_gap,
    relative_dimension,
    spectral_projection_generator,
)

__all__ = [
    "SelfadjointPath",
    "SpectralFlowResult",
    "InvarianceReport",
    "FredholmReport",
    "CommensurabilityReport",
    "spectral_flow",
    "eigenvalue_paths",
    "perturbation_invariance",
    "random_vanishing_perturbation",
    "index_for_family",
    "piecewise_pipeline",
    "commensurability_check",
]


@dataclass(frozen=True)
class SelfadjointPath:
    """``t -> A(t)`` symmetric (Hermitian), with limits at ``±inf``.

    ``span`` is the half-width of the crossing-detection interval; the path is
    assumed to have settled to its limits' inertia outside it.
    """

    rule: Callable = field(repr=False)
    dim: int
    A_minus: np.ndarray | None = field(default=None, repr=False)
    A_plus: np.ndarray | None = field(default=None, repr=False)
    span: float = 20.0
    name: str = "path"

    def __post_init__(self):
        step = config.current().flow_grid
        ts = np.arange(-self.span, self.span + 0.5 * step, step)
        for t in ts[:: max(1, len(ts) // 200)]:
            a = np.asarray(self.rule(t))
            if np.linalg.norm(a - a.conj().T) > 1e-12 * max(1.0, np.linalg.norm(a)):
                raise NonSymmetric(f"A({t:g}) is not symmetric")
        fam = ContinuousCoefficients(self.rule, self.dim, limit_plus=self.A_plus,
                                     limit_minus=self.A_minus)
        for side, attr in (("minus", "A_minus"), ("plus", "A_plus")):
            if getattr(self, attr) is None:
                try:
                    object.__setattr__(self, attr, np.asarray(fam.limit(side)))
                except NotAsymptoticallyConstant:
                    edge = self.span if side == "plus" else -self.span
                    object.__setattr__(self, attr, np.asarray(self.rule(edge)))

    def __call__(self, t):
        return np.asarray(self.rule(t))

    def family(self, h=None) -> ContinuousCoefficients:
        return ContinuousCoefficients(self.rule, self.dim, h=h, limit_plus=self.A_plus,
                                      limit_minus=self.A_minus)


@dataclass(frozen=True)
class SpectralFlowResult:
    flow: int
    endpoint_unstable_dims: tuple
    crossings: tuple = ()

    def __post_init__(self):
        um, up = self.endpoint_unstable_dims
        if self.flow != um - up:
            raise ValueError("flow must equal the unstable-dimension difference")

    @property
    def crossing_count(self) -> int:
        return -sum(direction for _, _, direction in self.crossings)


def _unstable_dim(A, tol):
    lam = np.linalg.eigvalsh(np.asarray(A))
    if np.min(np.abs(lam)) <= tol:
        raise NonHyperbolicEndpoint(f"eigenvalue {lam[np.argmin(np.abs(lam))]:.3e} at zero")
    return int(np.count_nonzero(lam > 0))


def eigenvalue_paths(path: SelfadjointPath, step=None):
    """``(times, eigenvalues)`` with ascending eigenvalues per row."""
    step = config.current().flow_grid if step is None else step
    ts = np.arange(-path.span, path.span + 0.5 * step, step)
    return ts, np.array([np.linalg.eigvalsh(path(t)) for t in ts])


def spectral_flow(path: SelfadjointPath) -> SpectralFlowResult:
    """Endpoint flow ``u(A_minus) - u(A_plus)`` plus located zero crossings.

    Crossings are sign changes of the ``i``-th ordered eigenvalue between grid
    points, refined by Brent's method to ``flow_refine`` in ``t``.  Each is
    reported as ``(t, i, direction)`` with ``direction = +1`` for upward.
    """
    tol = config.current()
    um = _unstable_dim(path.A_minus, tol.hyperbolicity)
    up = _unstable_dim(path.A_plus, tol.hyperbolicity)
    ts, lam = eigenvalue_paths(path)
    crossings = []
    for i in range(lam.shape[1]):
        col = lam[:, i]
        sgn = np.sign(col)
        for j in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
            def g(t, i=i):
                return np.linalg.eigvalsh(path(t))[i]
            t0 = brentq(g, ts[j], ts[j + 1], xtol=tol.flow_refine)
            crossings.append((float(t0), i, 1 if col[j + 1] > col[j] else -1))
        # zeros landing exactly on a grid point
        for j in np.nonzero(sgn == 0)[0]:
            if 0 < j < len(col) - 1 and sgn[j - 1] * sgn[j + 1] < 0:
                crossings.append((float(ts[j]), i, 1 if col[j + 1] > col[j - 1] else -1))
    crossings.sort()
    return SpectralFlowResult(um - up, (um, up), tuple(crossings))


def index_for_family(fam: EvolutionFamily, window=None, methods=None) -> FredholmNumbers:
    """Defect numbers of the boundary-closed finite section on ``[-N, N]``."""
    N = config.current().window if window is None else window
    methods = methods or {}
    rm = halfline_dichotomy(fam, "minus", N, methods.get("minus"))
    rp = halfline_dichotomy(fam, "plus", N, methods.get("plus"))
    return index_of_D(assemble_truncated_D(fam, (-N, N), (rm, rp)))


@dataclass(frozen=True)
class InvarianceReport:
    base: FredholmNumbers
    perturbed: FredholmNumbers
    edge_norm: float

    @property
    def preserved(self) -> bool:
        return self.base.index == self.perturbed.index


def _perturb(base, B):
    if hasattr(base, "perturbed"):
        return base.perturbed(B)
    return ContinuousCoefficients(lambda t: base.coefficient(t) + np.asarray(B(t)), base.dim,
                                  limit_plus=base.limit("plus"), limit_minus=base.limit("minus"))


def perturbation_invariance(base: EvolutionFamily, B, window=None, base_numbers=None,
                            methods=None) -> InvarianceReport:
    """Index of ``A`` and ``A + B`` on the same window; ``B`` must vanish at its edges."""
    N = config.current().window if window is None else window
    edge = max(float(np.linalg.norm(np.asarray(B(-N)), 2)), float(np.linalg.norm(np.asarray(B(N)), 2)))
    if edge >= config.current().vanishing:
        raise PerturbationNotVanishing(f"|B(±{N})| = {edge:.3e} is not below the vanishing tolerance")
    if base_numbers is None:
        base_numbers = index_for_family(base, N, methods)
    pert = index_for_family(_perturb(base, B), N, methods)
    return InvarianceReport(base_numbers, pert, edge)


def random_vanishing_perturbation(dim, rng, amplitude=0.5, max_rank=None, width=(0.5, 2.0),
                                  center=(-3.0, 3.0), dtype=float):
    """``B(t) = a exp(-((t - c)/w)^2) X Y^T`` with rank at most ``max(1, dim // 4)``."""
    max_rank = max(1, dim // 4) if max_rank is None else max_rank
    r = int(rng.integers(1, max_rank + 1))
    X = rng.standard_normal((dim, r))
    Y = rng.standard_normal((dim, r))
    if dtype == complex:
        X = X + 1j * rng.standard_normal((dim, r))
        Y = Y + 1j * rng.standard_normal((dim, r))
    K = X @ Y.conj().T
    K = K / np.linalg.norm(K, 2)
    a = float(rng.uniform(0.1, 1.0)) * amplitude
    w = float(rng.uniform(*width))
    c = float(rng.uniform(*center))

    def B(t):
        return (a * np.exp(-(((t - c) / w) ** 2))) * K

    B.rank = r
    return B


@dataclass(frozen=True)
class FredholmReport:
    node: FredholmNumbers
    pair: PairReport
    D: FredholmNumbers
    perturbed: FredholmNumbers | None = None
    relative_dimension: int | None = None
    failures: tuple = ()

    @property
    def consistent(self) -> bool:
        return not self.failures

    @property
    def index(self) -> int:
        return self.D.index


def piecewise_pipeline(A_plus, A_minus, B=None, window=None) -> FredholmReport:
    """Node, pair, and finite-section numbers for the switch at ``t = 0``.

    Without ``B`` all three triples must coincide; with ``B`` only the index of
    the perturbed section has to match.  For symmetric limits the relative
    dimension of the two unstable subspaces is checked against the index too.
    """
    A_plus, A_minus = np.asarray(A_plus), np.asarray(A_minus)
    projs = {}
    for label, A in (("A_plus", A_plus), ("A_minus", A_minus)):
        gap, ok = hyperbolicity_gap(A)
        if not ok:
            raise HyperbolicityRequired(f"{label} is not hyperbolic (gap {gap:.2e})")
        try:
            projs[label] = spectral_projection_generator(A)
        except NotHyperbolic as exc:
            raise HyperbolicityRequired(f"{label}: {exc}") from exc
    Pp, Pm = projs["A_plus"], projs["A_minus"]
    cross: ConsistencyReport = pair_vs_node_crosscheck(Pm, Pp)
    N = config.current().window if window is None else window
    D = index_for_family(PiecewiseConstantPerturbed(A_plus, A_minus), N)
    failures = list(cross.failures)
    if D != cross.node:
        failures.append(f"D numbers {D.as_tuple()} != node numbers {cross.node.as_tuple()}")
    pert = None
    if B is not None:
        pert = index_for_family(PiecewiseConstantPerturbed(A_plus, A_minus, B), N)
        if pert.index != D.index:
            failures.append(f"perturbed index {pert.index} != {D.index}")
    rel = None
    sym = (np.allclose(A_plus, A_plus.conj().T, atol=1e-12)
           and np.allclose(A_minus, A_minus.conj().T, atol=1e-12))
    if sym:
        rel = relative_dimension(Pm.kernel(), Pp.kernel())
        if rel != D.index:
            failures.append(f"relative dimension {rel} != index {D.index}")
    return FredholmReport(cross.node, cross.pair, D, pert, rel, tuple(failures))


@dataclass(frozen=True)
class CommensurabilityReport:
    singular_values: np.ndarray = field(repr=False)
    node_fredholm: bool
    consistency: ConsistencyReport
    image_kernel_pair: PairReport

    @property
    def numerical_rank(self) -> int:
        s = self.singular_values
        return int(np.count_nonzero(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))


def commensurability_check(P1: Projector, P2: Projector) -> CommensurabilityReport:
    """Singular-value profile of ``P1 - P2`` plus the node/pair cross-check.

    Every finite-dimensional difference is compact, so ``node_fredholm`` is
    always true; the profile is the diagnostic (fast decay suggests a truncated
    commensurable pair).
    """
    s = np.linalg.svd(P1.matrix - P2.matrix, compute_uv=False)
    cross = pair_vs_node_crosscheck(P1, P2)
    pair = fredholm_pair(P1.image(), P2.kernel())
    return CommensurabilityReport(s, True, cross, pair)
