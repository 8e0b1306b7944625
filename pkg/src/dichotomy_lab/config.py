"""Numerical tolerances, overridable per problem.

The active set lives in a :class:`contextvars.ContextVar`, so worker threads
running different problems never see each other's overrides::

    with tolerances(rank_rtol=1e-10):
        index_of_D(T)
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    rank_rtol: float = 1e-8
    rank_gap: float = 1e3
    hyperbolicity: float = 1e-8
    contour_gap: float = 1e-8
    floquet_gap: float = 1e-6
    contour_nodes: int = 64
    riesz_target: float = 1e-14
    riesz_max_nodes: int = 1 << 15
    rk4_step: float = 1e-2
    gap_min: float = 0.05
    window: int = 20
    qr_padding: int = 10
    dichotomy: float = 1e-8
    series_cutoff: float = 1e-14
    quadrature: float = 1e-6
    flow_grid: float = 1e-2
    flow_refine: float = 1e-8
    vanishing: float = 1e-6


_ACTIVE: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "dichotomy_lab_tolerances", default=Tolerances()
)


def current() -> Tolerances:
    return _ACTIVE.get()


@contextlib.contextmanager
def tolerances(**overrides):
    """Temporarily override tolerance fields (unknown names raise TypeError)."""
    token = _ACTIVE.set(dataclasses.replace(_ACTIVE.get(), **overrides))
    try:
        yield _ACTIVE.get()
    finally:
        _ACTIVE.reset(token)
