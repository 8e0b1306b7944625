"""Builtin problems with known defect numbers.

Each entry builds its evolution family on demand (families memoise
propagators, so every caller gets a fresh one).  ``expected`` is the triple
``(dim ker, codim im, index)`` derived independently (closed forms, channel
counting), and ``tags`` drive filtering in the verification suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .evolution import ContinuousCoefficients, DiscreteSequence, PiecewiseConstantPerturbed
from .flows import SelfadjointPath

__all__ = ["Problem", "REGISTRY", "REFUSALS", "get_problem", "list_problems", "hill_coefficient"]


@dataclass(frozen=True)
class Problem:
    name: str
    build: Callable = field(repr=False)
    expected: tuple | None = None
    window: int = 20
    methods: dict = field(default_factory=dict)
    period: int = 1
    tags: tuple = ()
    path: Callable | None = field(default=None, repr=False)
    description: str = ""
    rank_plus: int | None = None

    @property
    def family(self):
        fam = self.__dict__.get("_fam")
        if fam is None:
            fam = self.build()
            object.__setattr__(self, "_fam", fam)
        return fam

    def fresh(self):
        """Same problem with a new (empty-cache) family."""
        return Problem(self.name, self.build, self.expected, self.window, dict(self.methods),
                       self.period, self.tags, self.path, self.description, self.rank_plus)

    def selfadjoint_path(self) -> SelfadjointPath | None:
        return None if self.path is None else self.path()


def _scalar(sign):
    def rule(t):
        return np.array([[sign * math.tanh(t)]])
    return rule


def _scalar_path(sign):
    return lambda: SelfadjointPath(_scalar(sign), 1, np.array([[-sign]]), np.array([[sign]]))


def _scalar_family(sign):
    return lambda: ContinuousCoefficients(_scalar(sign), 1, limit_plus=[[sign]], limit_minus=[[-sign]])


def _autonomous_4d():
    # non-normal, eigenvalues -2, -0.5, 0.7, 1.5
    T = np.array([[-2.0, 1.0, 0.3, 0.0],
                  [0.0, -0.5, 0.8, 0.2],
                  [0.0, 0.0, 0.7, 1.0],
                  [0.0, 0.0, 0.0, 1.5]])
    S = np.array([[1.0, 0.2, 0.0, 0.1],
                  [0.0, 1.0, 0.3, 0.0],
                  [0.1, 0.0, 1.0, 0.4],
                  [0.0, 0.2, 0.0, 1.0]])
    return S @ T @ np.linalg.inv(S)


def petrovskij_matrix(K=8, a=1.0, b=1.0, coupling=0.5):
    """Modes ``xi = -K..K`` of the symbol ``[[i xi - a, c], [0, i xi + b]]``."""
    blocks = [np.array([[1j * k - a, coupling], [0.0, 1j * k + b]]) for k in range(-K, K + 1)]
    n = 2 * len(blocks)
    A = np.zeros((n, n), dtype=complex)
    for i, blk in enumerate(blocks):
        A[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = blk
    return A


def hill_coefficient(q0, q1):
    """First-order form of ``u'' = (q0 + q1 cos t) u`` with time rescaled to period 1."""
    two_pi = 2.0 * math.pi

    def rule(s):
        return two_pi * np.array([[0.0, 1.0], [q0 + q1 * math.cos(two_pi * s), 0.0]])

    return rule


def _flow2d(t):
    return np.diag([math.tanh(t), -1.0])


_S_COMM = np.diag([-1.5, -0.4, 0.8, 2.0])
_V_COMM = np.array([1.0, 1.0, -1.0, 0.5]) / np.linalg.norm([1.0, 1.0, -1.0, 0.5])


def _commensurable(t):
    sigma = 0.5 * (1.0 + math.tanh(t))
    return _S_COMM + sigma * 3.0 * np.outer(_V_COMM, _V_COMM)


def _block_projectors(k=2):
    I, Z = np.eye(k), np.zeros((k, k))
    PW = 0.5 * np.block([[I, I], [I, I]])
    PV = np.block([[I, Z], [Z, Z]])
    return PW, PV


def _block_pair():
    PW, PV = _block_projectors()
    I = np.eye(PW.shape[0])
    return PiecewiseConstantPerturbed(2 * PV - I, 2 * PW - I)


def _discrete_switch():
    e = math.e

    def rule(n):
        return np.diag([e, 1.0 / e]) if n < 0 else np.diag([1.0 / e, 1.0 / e])

    return DiscreteSequence(rule, start=0, dim=2)


def _pw(A_plus, A_minus):
    return lambda: PiecewiseConstantPerturbed(np.asarray(A_plus), np.asarray(A_minus))


REGISTRY: dict = {}


def _register(p: Problem):
    REGISTRY[p.name] = p


_register(Problem("scalar-tanh", _scalar_family(-1.0), (1, 0, 1), tags=("core", "flow", "scalar"),
                  path=_scalar_path(-1.0), description="A(t) = -tanh t; kernel sech t"))
_register(Problem("scalar-plus-tanh", _scalar_family(1.0), (0, 1, -1),
                  tags=("core", "flow", "scalar"), path=_scalar_path(1.0),
                  description="A(t) = tanh t; one-dimensional cokernel"))
_register(Problem("autonomous-hyperbolic-4d", _pw(_autonomous_4d(), _autonomous_4d()), (0, 0, 0),
                  tags=("core", "autonomous"), rank_plus=2,
                  description="constant non-normal hyperbolic 4x4 coefficient"))
_register(Problem("piecewise-diag-plus2", _pw(-np.eye(2), np.eye(2)), (2, 0, 2),
                  tags=("core", "piecewise", "selfadjoint"),
                  description="A = I for t < 0, -I for t >= 0"))
_register(Problem("mixed-channel-0", _pw(np.diag([-1.0, 1.0]), np.diag([1.0, -1.0])), (1, 1, 0),
                  tags=("core", "piecewise", "selfadjoint"),
                  description="one decaying channel, one cokernel channel"))
_register(Problem("petrovskij-k8", _pw(petrovskij_matrix(), petrovskij_matrix()), (0, 0, 0),
                  tags=("autonomous", "large"), rank_plus=17,
                  description="17 Fourier modes of [[i xi - 1, 0.5], [0, i xi + 1]], complex dim 34"))
_register(Problem("hill-hyperbolic", lambda: ContinuousCoefficients(hill_coefficient(4.0, 1.0), 2),
                  (0, 0, 0), methods={"plus": "floquet", "minus": "floquet"},
                  tags=("periodic",), rank_plus=1,
                  description="u'' = (4 + cos t) u, period rescaled to 1"))
_register(Problem("flow-2d", lambda: ContinuousCoefficients(_flow2d, 2, limit_plus=np.diag([1.0, -1.0]),
                                                            limit_minus=np.diag([-1.0, -1.0])),
                  (0, 1, -1), tags=("flow", "core"),
                  path=lambda: SelfadjointPath(_flow2d, 2, np.diag([-1.0, -1.0]), np.diag([1.0, -1.0])),
                  description="diag(tanh t, -1); one upward crossing at t = 0"))
_register(Problem("commensurable-pair",
                  lambda: ContinuousCoefficients(_commensurable, 4, limit_plus=_commensurable(math.inf),
                                                 limit_minus=_S_COMM),
                  (0, 1, -1), tags=("flow", "commensurable"),
                  path=lambda: SelfadjointPath(_commensurable, 4, _S_COMM, _commensurable(math.inf)),
                  description="diagonal S plus a rank-one term switched on by (1 + tanh t)/2"))
_register(Problem("block-pair", _block_pair, (0, 0, 0), tags=("commensurable", "piecewise", "selfadjoint"),
                  description="A = 2 P_W - I before 0, 2 P_V - I after, with P_W - P_V invertible"))
_register(Problem("discrete-switch", _discrete_switch, (1, 0, 1), tags=("discrete",),
                  methods={"plus": "qr-product", "minus": "qr-product"},
                  description="steps diag(e, 1/e) for n < 0 and diag(1/e, 1/e) after"))


_ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _center(t):
    return _ROTATION + 0.5 * math.exp(-t * t) * np.eye(2)


REFUSALS: dict = {
    "imaginary-limit": Problem(
        "imaginary-limit",
        lambda: ContinuousCoefficients(_center, 2, limit_plus=_ROTATION, limit_minus=_ROTATION),
        None, tags=("necessity",),
        description="limit matrix with eigenvalues +-i; no dichotomy at either end"),
    "hill-pocket": Problem(
        "hill-pocket", lambda: ContinuousCoefficients(hill_coefficient(-0.6, -0.1), 2), None,
        methods={"plus": "floquet", "minus": "floquet"}, tags=("necessity", "periodic"),
        description="u'' + (0.6 + 0.1 cos t) u = 0 sits in a stability pocket"),
}


def get_problem(name) -> Problem:
    if name in REGISTRY:
        return REGISTRY[name].fresh()
    if name in REFUSALS:
        return REFUSALS[name].fresh()
    raise KeyError(f"unknown builtin problem {name!r}")


def list_problems(include_refusals=False):
    names = list(REGISTRY)
    if include_refusals:
        names += list(REFUSALS)
    return names
