"""Evolution families ``U(t, tau)`` and their unit-step skeletons.

Three generators are supported:

* :class:`DiscreteSequence` -- step matrices ``U(n+1, n)`` on integer times;
* :class:`ContinuousCoefficients` -- ``u' = A(t) u`` integrated by fixed-step RK4;
* :class:`PiecewiseConstantPerturbed` -- ``A_0(t) = A_plus`` for ``t >= s``,
  ``A_minus`` before, plus an optional perturbation ``B(t)``.

Families are immutable; propagators are memoised per ``(t, tau)`` pair, which
only changes speed, never results.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import config
from .errors import (
    BackwardTime,
    DimensionMismatch,
    NonIntegerTime,
    NotAsymptoticallyConstant,
    OutOfWindow,
)

__all__ = [
    "EvolutionFamily",
    "DiscreteSequence",
    "ContinuousCoefficients",
    "PiecewiseConstantPerturbed",
    "OrderedFactorization",
    "propagate",
    "discretize",
    "long_product",
    "rk4_propagator",
    "load_coefficient_table",
    "read_table",
    "write_coefficient_table",
]


def rk4_propagator(coeff, t, tau, h, dim, dtype=float):
    """Fixed-step RK4 for ``Y' = A(s) Y``, ``Y(tau) = I`` on ``[tau, t]``.

    The number of steps is ``ceil((t - tau) / h)`` and the step is shrunk
    uniformly to land exactly on ``t``.
    """
    Y = np.eye(dim, dtype=dtype)
    length = t - tau
    if length <= 0:
        return Y
    n = max(1, math.ceil(length / h - 1e-9))
    dt = length / n
    s = tau
    for i in range(n):
        a1 = coeff(s)
        am = coeff(s + 0.5 * dt)
        a4 = coeff(s + dt)
        k1 = a1 @ Y
        k2 = am @ (Y + 0.5 * dt * k1)
        k3 = am @ (Y + 0.5 * dt * k2)
        k4 = a4 @ (Y + dt * k3)
        Y = Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s = tau + (i + 1) * dt
    return Y


class EvolutionFamily:
    """Common interface: ``dim`` and ``propagate(t, tau)`` for ``t >= tau``."""

    dim: int
    dtype = float

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def propagate(self, t, tau):
        if t < tau:
            raise BackwardTime(f"t={t} < tau={tau}")
        key = (float(t), float(tau))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        U = self._propagate(float(t), float(tau))
        U.setflags(write=False)
        with self._lock:
            self._cache[key] = U
        return U

    def _propagate(self, t, tau):
        raise NotImplementedError

    def step(self, n):
        """``U(n+1, n)``."""
        return self.propagate(n + 1, n)

    def limit(self, side):
        """Limit coefficient matrix at ``+inf`` (``side='plus'``) or ``-inf``."""
        raise NotAsymptoticallyConstant(f"{type(self).__name__} has no coefficient limit")

    def coefficient(self, t):
        raise NotImplementedError(f"{type(self).__name__} has no coefficient function")


class DiscreteSequence(EvolutionFamily):
    """Step matrices ``U(n+1, n)`` given as a list starting at ``start`` or a rule.

    With a list, steps exist for ``n`` in ``[start, start + len(steps) - 1]``.
    """

    def __init__(self, steps, start=0, dim=None):
        super().__init__()
        if callable(steps):
            self._rule = steps
            self._steps = None
            probe = np.asarray(steps(start))
            self.window = None
        else:
            mats = [np.array(s) for s in steps]
            if not mats and dim is None:
                raise DimensionMismatch("empty step list needs an explicit dim")
            self._rule = None
            self._steps = mats
            probe = mats[0] if mats else np.eye(dim)
            self.window = (int(start), int(start) + len(mats))
        self.start = int(start)
        self.dim = probe.shape[0] if dim is None else int(dim)
        self.dtype = complex if np.iscomplexobj(probe) else float
        if self._steps is not None:
            for s in self._steps:
                if s.shape != (self.dim, self.dim):
                    raise DimensionMismatch(f"step of shape {s.shape}, expected {self.dim}")
                s.setflags(write=False)

    @property
    def steps(self):
        if self._steps is None:
            raise OutOfWindow("rule-based sequence has no finite step list")
        return list(self._steps)

    def step(self, n):
        n = int(n)
        if self._rule is not None:
            return np.asarray(self._rule(n))
        lo, hi = self.window
        if not lo <= n < hi:
            raise OutOfWindow(f"step {n} outside window [{lo}, {hi}]")
        return self._steps[n - lo]

    def _propagate(self, t, tau):
        if t != int(t) or tau != int(tau):
            raise NonIntegerTime(f"discrete family needs integer times, got {t}, {tau}")
        U = np.eye(self.dim, dtype=self.dtype)
        for n in range(int(tau), int(t)):
            U = self.step(n) @ U
        return np.array(U)


class ContinuousCoefficients(EvolutionFamily):
    """``u' = A(t) u`` with RK4 at fixed step ``h``.

    ``limit_plus`` / ``limit_minus`` give the coefficient limits at ``±inf``;
    when omitted they are extrapolated by sampling far out and checking that
    the samples agree.
    """

    def __init__(self, coeff, dim, h=None, limit_plus=None, limit_minus=None, dtype=None):
        super().__init__()
        self._coeff = coeff
        self.dim = int(dim)
        self.h = config.current().rk4_step if h is None else float(h)
        probe = np.asarray(coeff(0.0))
        if probe.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"A(0) has shape {probe.shape}, expected {self.dim}")
        self.dtype = dtype or (complex if np.iscomplexobj(probe) else float)
        self._limits = {"plus": limit_plus, "minus": limit_minus}

    def coefficient(self, t):
        return np.asarray(self._coeff(t))

    def _propagate(self, t, tau):
        return rk4_propagator(self._coeff, t, tau, self.h, self.dim, self.dtype)

    def limit(self, side):
        given = self._limits[side]
        if given is not None:
            return np.asarray(given)
        sign = 1.0 if side == "plus" else -1.0
        a1 = self.coefficient(sign * 1e3)
        a2 = self.coefficient(sign * 2e3)
        a3 = self.coefficient(sign * 3.7e3)
        scale = 1.0 + np.linalg.norm(a1)
        if max(np.linalg.norm(a1 - a2), np.linalg.norm(a2 - a3)) > 1e-9 * scale:
            raise NotAsymptoticallyConstant(f"coefficients do not settle at {side} infinity")
        return a3

    def perturbed(self, B):
        """Family for ``A(t) + B(t)`` with the same limits (``B`` must vanish)."""
        return ContinuousCoefficients(
            lambda t: self._coeff(t) + np.asarray(B(t)),
            self.dim,
            h=self.h,
            limit_plus=self._limits["plus"],
            limit_minus=self._limits["minus"],
            dtype=self.dtype,
        )

    def with_step(self, h):
        """Same coefficients integrated at step ``h``."""
        return ContinuousCoefficients(self._coeff, self.dim, h=h, limit_plus=self._limits["plus"],
                                      limit_minus=self._limits["minus"], dtype=self.dtype)

    @classmethod
    def from_table(cls, path, h=None):
        times, mats = load_coefficient_table(path)
        return cls.from_samples(times, mats, h=h)

    @classmethod
    def from_samples(cls, times, mats, h=None):
        """Linear interpolation between rows, constant extrapolation outside."""
        times = np.asarray(times, dtype=float)
        mats = np.asarray(mats)
        if times.ndim != 1 or len(times) != len(mats) or len(times) == 0:
            raise DimensionMismatch("times and matrices must have matching length")
        if np.any(np.diff(times) <= 0):
            raise DimensionMismatch("table times must be strictly increasing")
        d = mats.shape[1]
        flat = mats.reshape(len(times), -1)

        def coeff(t):
            row = np.array([np.interp(t, times, flat[:, j]) for j in range(flat.shape[1])])
            return row.reshape(d, d)

        return cls(coeff, d, h=h, limit_plus=mats[-1], limit_minus=mats[0])


class PiecewiseConstantPerturbed(EvolutionFamily):
    """``A(t) = A_0(t) + B(t)`` with ``A_0`` switching at ``switch_time``.

    Without ``B`` the propagator is the exact product of matrix exponentials;
    with ``B`` the full coefficient is integrated by RK4, with the step grid
    split at the switch.
    """

    def __init__(self, A_plus, A_minus, B=None, switch_time=0.0, h=None):
        super().__init__()
        self.A_plus = np.array(A_plus)
        self.A_minus = np.array(A_minus)
        if self.A_plus.shape != self.A_minus.shape or self.A_plus.ndim != 2:
            raise DimensionMismatch("A_plus and A_minus must be square of equal shape")
        self.A_plus.setflags(write=False)
        self.A_minus.setflags(write=False)
        self.dim = self.A_plus.shape[0]
        self.B = B
        self.switch_time = float(switch_time)
        self.h = config.current().rk4_step if h is None else float(h)
        cplx = np.iscomplexobj(self.A_plus) or np.iscomplexobj(self.A_minus)
        if B is not None:
            cplx = cplx or np.iscomplexobj(np.asarray(B(self.switch_time)))
        self.dtype = complex if cplx else float

    def coefficient(self, t):
        a = self.A_plus if t >= self.switch_time else self.A_minus
        if self.B is not None:
            a = a + np.asarray(self.B(t))
        return a

    def limit(self, side):
        return self.A_plus if side == "plus" else self.A_minus

    def perturbed(self, B):
        if self.B is None:
            newB = B
        else:
            oldB = self.B
            newB = lambda t: np.asarray(oldB(t)) + np.asarray(B(t))  # noqa: E731
        return PiecewiseConstantPerturbed(self.A_plus, self.A_minus, newB, self.switch_time, self.h)

    def _piece(self, A, t, tau):
        if self.B is None:
            return scipy.linalg.expm((t - tau) * A)
        B = self.B
        return rk4_propagator(lambda s: A + np.asarray(B(s)), t, tau, self.h, self.dim, self.dtype)

    def _propagate(self, t, tau):
        s = self.switch_time
        if tau >= s:
            return np.asarray(self._piece(self.A_plus, t, tau), dtype=self.dtype)
        if t <= s:
            return np.asarray(self._piece(self.A_minus, t, tau), dtype=self.dtype)
        return np.asarray(
            self._piece(self.A_plus, t, s) @ self._piece(self.A_minus, s, tau), dtype=self.dtype
        )


def propagate(fam: EvolutionFamily, t, tau):
    """``U(t, tau)`` for ``t >= tau``."""
    return fam.propagate(t, tau)


def discretize(fam: EvolutionFamily, window) -> DiscreteSequence:
    """Unit-step skeleton ``U(k+1, k)``, ``k = m, ..., n-1`` on ``window = (m, n)``."""
    m, n = int(window[0]), int(window[1])
    if n <= m:
        raise ValueError(f"empty window [{m}, {n}]")
    return DiscreteSequence([fam.propagate(k + 1, k) for k in range(m, n)], start=m)


@dataclass(frozen=True)
class OrderedFactorization:
    """``U(n, m) Q0 = Q_n R_n ... R_{m+1}`` with orthogonal ``Q``'s, triangular ``R``'s.

    ``factors[i] = (Q, R)`` after the ``i``-th step; ``q0`` is the starting frame.
    """

    n: int
    m: int
    factors: tuple = field(repr=False)
    q0: np.ndarray = field(repr=False)

    @property
    def log_diagonal(self) -> np.ndarray:
        if not self.factors:
            return np.zeros(self.q0.shape[1])
        with np.errstate(divide="ignore"):
            return sum(np.log(np.abs(np.diag(R))) for _, R in self.factors)

    @property
    def lyapunov_exponents(self) -> np.ndarray:
        """Finite-time exponents (log-diagonal over elapsed time), unsorted."""
        span = max(self.n - self.m, 1)
        return self.log_diagonal / span

    @property
    def frame(self) -> np.ndarray:
        return self.factors[-1][0] if self.factors else self.q0

    def triangular(self) -> np.ndarray:
        k = self.q0.shape[1]
        T = np.eye(k, dtype=self.q0.dtype)
        for _, R in self.factors:
            T = R @ T
        return T

    def matrix(self) -> np.ndarray:
        """Reconstruct ``U(n, m) Q0`` (may overflow for long windows)."""
        return self.frame @ self.triangular()


def _qr_positive(Z):
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    sgn = np.where(d == 0, 1.0, d / np.where(d == 0, 1.0, np.abs(d)))
    return Q * sgn, (R.T * sgn.conj()).T


def long_product(fam, n, m, q0=None) -> OrderedFactorization:
    """QR-reorthogonalised factorisation of ``U(n, m) q0`` (``q0 = I`` by default)."""
    n, m = int(n), int(m)
    if n < m:
        raise BackwardTime(f"n={n} < m={m}")
    Q = np.eye(fam.dim, dtype=fam.dtype) if q0 is None else np.asarray(q0)
    q_start = Q
    factors = []
    for k in range(m, n):
        Q, R = _qr_positive(fam.step(k) @ Q)
        factors.append((Q, R))
    return OrderedFactorization(n, m, tuple(factors), q_start)


def read_table(path):
    """Rows ``t, v_1, ..., v_k`` (comma separated, ``#`` comments) as ``(times, values)``."""
    times, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            vals = [complex(x.strip().replace(" ", "")) for x in rec if x.strip()]
            times.append(vals[0].real)
            rows.append(vals[1:])
    if not rows:
        raise DimensionMismatch(f"no rows in {path}")
    k = len(rows[0])
    if any(len(r) != k for r in rows):
        raise DimensionMismatch(f"rows of {path} have unequal length")
    arr = np.array(rows)
    if np.all(arr.imag == 0):
        arr = arr.real
    return np.array(times), arr


def load_coefficient_table(path):
    """Read rows ``t, a11, a12, ..., a_dd`` into ``(times, matrices)``."""
    times, arr = read_table(path)
    k = arr.shape[1]
    d = int(round(math.sqrt(k)))
    if d * d != k:
        raise DimensionMismatch(f"rows of {path} do not hold square matrices")
    return times, arr.reshape(len(times), d, d)


def write_coefficient_table(path, times, values, header=None):
    """Write ``t, v_1, ..., v_k`` rows; ``values`` is ``(len(times), ...)``."""
    values = np.asarray(values).reshape(len(times), -1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh)
        for t, row in zip(times, values):
            w.writerow([repr(float(t))] + [_fmt(v) for v in row])


def _fmt(v):
    if np.iscomplexobj(v) and v.imag != 0:
        return repr(complex(v)).strip("()")
    return repr(float(np.real(v)))
