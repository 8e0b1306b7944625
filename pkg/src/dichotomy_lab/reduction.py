"""Maps between sampled functions on ``[-N, N]`` and sequences on integer times.

* ``R f = (-int_{n-1}^n U(n, s) f(s) ds)_n`` turns a forcing into a sequence,
* ``S y (t) = alpha(t - n) U(t, n) y_n`` on ``[n, n+1]`` spreads a sequence into a
  forcing with zero boundary values,
* ``B x (t) = U(t, n) x_n`` on ``[n, n+1)`` interpolates a sequence by the flow.

Sign convention: ``u`` and ``f`` correspond when
``u(t) = U(t, tau) u(tau) - int_tau^t U(t, s) f(s) ds``, i.e. ``f = A u - u'``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import config
from .errors import DimensionMismatch, GridMisaligned
from .evolution import EvolutionFamily, read_table, write_coefficient_table

__all__ = [
    "SampledFunction",
    "WeightFunction",
    "CorrespondenceReport",
    "map_R",
    "map_S",
    "map_B",
    "apply_D_sequence",
    "verify_correspondence",
    "mild_residual",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _steps_per_unit(h):
    k = round(1.0 / h)
    if k < 1 or abs(k * h - 1.0) > 1e-12:
        raise GridMisaligned(f"grid step {h} does not divide 1")
    return int(k)


@dataclass(frozen=True)
class SampledFunction:
    """Values on the uniform grid ``start, start + h, ..., stop``.

    ``rule`` (optional) evaluates the function exactly between samples; without
    it a cubic spline through the samples is used.
    """

    start: int
    stop: int
    h: float
    values: np.ndarray = field(repr=False)
    rule: Callable | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        k = _steps_per_unit(self.h)
        if int(self.start) != self.start or int(self.stop) != self.stop:
            raise GridMisaligned("window ends must be integers")
        n = (int(self.stop) - int(self.start)) * k + 1
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != n:
            raise DimensionMismatch(f"expected {n} samples, got {v.shape[0]}")
        v = np.array(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "h", 1.0 / k)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def per_unit(self) -> int:
        return round(1.0 / self.h)

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(self.values.shape[0]) / self.per_unit

    @classmethod
    def from_rule(cls, rule, window, h, dim=None):
        """Sample ``rule`` on ``window = (m, n)``; the rule is kept for exact evaluation."""
        m, n = int(window[0]), int(window[1])
        k = _steps_per_unit(h)
        ts = m + np.arange((n - m) * k + 1) / k
        vals = np.array([np.atleast_1d(np.asarray(rule(t))) for t in ts])
        if dim is not None and vals.shape[1] != dim:
            raise DimensionMismatch(f"rule returns {vals.shape[1]}-vectors, expected {dim}")
        return cls(m, n, 1.0 / k, vals, rule)

    def __call__(self, t):
        if not self.start - 1e-12 <= t <= self.stop + 1e-12:
            return np.zeros(self.dim, dtype=self.values.dtype)
        if self.rule is not None:
            return np.atleast_1d(np.asarray(self.rule(t)))
        return self._spline()(t)

    def _spline(self):
        sp = self.__dict__.get("_sp")
        if sp is None:
            sp = CubicSpline(self.times, self.values, axis=0)
            object.__setattr__(self, "_sp", sp)
        return sp

    def at_integers(self) -> np.ndarray:
        return self.values[:: self.per_unit]

    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1))) if self.values.size else 0.0

    def to_csv(self, path, header=None):
        write_coefficient_table(path, self.times, self.values, header=header)

    @classmethod
    def from_csv(cls, path):
        times, vals = read_table(path)
        if len(times) < 2:
            raise DimensionMismatch("need at least two samples")
        h = float(times[1] - times[0])
        k = _steps_per_unit(h)
        if not np.allclose(np.diff(times), 1.0 / k, rtol=0, atol=1e-9):
            raise GridMisaligned("samples are not on a uniform grid")
        return cls(int(round(times[0])), int(round(times[-1])), 1.0 / k, vals)


@dataclass(frozen=True)
class WeightFunction:
    """1-periodic weight for ``S``, vanishing at the integers with unit mean.

    Unit mean (not zero mean) is what makes ``R(-S y) + D y = y`` hold; see
    the project notes.  ``antiderivative(r) = int_0^r alpha``.
    """

    rule: Callable = field(repr=False)
    antiderivative: Callable | None = field(default=None, repr=False)
    name: str = "custom"

    @classmethod
    def default(cls):
        two_pi = 2.0 * math.pi
        return cls(
            lambda s: 1.0 - math.cos(two_pi * s),
            lambda r: r - math.sin(two_pi * r) / two_pi,
            "1-cos(2 pi s)",
        )

    def __call__(self, s):
        return self.rule(s - math.floor(s)) if s != math.floor(s) else self.rule(0.0)

    def mean(self) -> float:
        if self.antiderivative is not None:
            return float(self.antiderivative(1.0) - self.antiderivative(0.0))
        x = 0.5 * (_GL_NODES + 1.0)
        return float(0.5 * np.sum(_GL_WEIGHTS * np.array([self.rule(v) for v in x])))

    def check(self, tol=None):
        tol = config.current().quadrature if tol is None else tol
        problems = []
        if abs(self.rule(0.0)) > tol or abs(self.rule(1.0)) > tol:
            problems.append("weight does not vanish at the integers")
        if abs(self.mean() - 1.0) > tol:
            problems.append(f"weight mean {self.mean():.3e} is not 1")
        return problems


def _gl(a, b):
    half = 0.5 * (b - a)
    return a + half * (_GL_NODES + 1.0), half * _GL_WEIGHTS


def _sequence_window(f: SampledFunction, indices):
    lo, hi = int(f.start) + 1, int(f.stop)
    if indices is None:
        return list(range(lo, hi + 1))
    out = [int(n) for n in indices]
    if any(n != v for n, v in zip(out, indices)):
        raise GridMisaligned("sequence indices must be integers")
    if out and (min(out) < lo or max(out) > hi):
        raise GridMisaligned(f"indices {min(out)}..{max(out)} need f on [{min(out) - 1}, {max(out)}]")
    return out


def map_R(f: SampledFunction, fam: EvolutionFamily, indices=None):
    """``(R f)_n = -int_{n-1}^n U(n, s) f(s) ds`` by 8-point Gauss-Legendre per interval.

    ``U(n, s)`` is written as ``U(n, n-1) U(s, n-1)^{-1}`` so that the same
    propagators from ``n - 1`` serve ``R``, ``S`` and ``B`` alike.
    Returns ``(indices, values)``.
    """
    idx = _sequence_window(f, indices)
    d = fam.dim
    out = np.zeros((len(idx), d), dtype=np.result_type(fam.dtype, f.values))
    for i, n in enumerate(idx):
        nodes, w = _gl(n - 1, n)
        acc = np.zeros(d, dtype=out.dtype)
        for s, ws in zip(nodes, w):
            acc = acc + ws * np.linalg.solve(fam.propagate(s, n - 1), f(s))
        out[i] = -(fam.propagate(n, n - 1) @ acc)
    return np.array(idx), out


def _sequence_rule(x, start, fam, weight):
    x = np.asarray(x)
    stop = start + len(x)

    def rule(t):
        n = math.floor(t)
        if n == t and n > start:
            # closed at the right end: S vanishes there, B uses the previous piece
            n -= 1
        if n < start or n >= stop:
            return np.zeros(fam.dim, dtype=np.result_type(fam.dtype, x))
        r = t - n
        a = 1.0 if weight is None else weight.rule(r)
        if a == 0.0:
            return np.zeros(fam.dim, dtype=np.result_type(fam.dtype, x))
        return a * (fam.propagate(t, n) @ x[n - start])

    return rule


def map_S(x, fam: EvolutionFamily, start, h=None, weight=None, stop=None) -> SampledFunction:
    """``(S x)(t) = alpha(t - n) U(t, n) x_n`` on ``[n, n+1]``; ``x[k]`` sits at ``start + k``."""
    weight = WeightFunction.default() if weight is None else weight
    h = fam_step(fam) if h is None else h
    stop = start + len(x) if stop is None else stop
    rule = _sequence_rule(x, start, fam, weight)
    vals = _chained_samples(x, start, stop, fam, h, weight, closed_right=False)
    return SampledFunction(start, stop, h, vals, rule)


def map_B(x, fam: EvolutionFamily, start, h=None, stop=None) -> SampledFunction:
    """``(B x)(t) = U(t, n) x_n`` on ``[n, n+1)``; the last sample is ``x`` at ``stop``."""
    x = np.asarray(x)
    h = fam_step(fam) if h is None else h
    stop = start + len(x) - 1 if stop is None else stop
    piece = _sequence_rule(x, start, fam, None)

    def rule(t):
        n = math.floor(t)
        if n == t and start <= n < start + len(x):
            return np.array(x[n - start])
        return piece(t)

    vals = _chained_samples(x, start, stop, fam, h, None, closed_right=True)
    return SampledFunction(start, stop, h, vals, rule)


def _chained_samples(x, start, stop, fam, h, weight, closed_right):
    """Grid samples of ``a(t - n) U(t, n) x_n`` using one-step propagators.

    ``U(t_{j+1}, n) = U(t_{j+1}, t_j) U(t_j, n)`` costs one integrator step per
    sample instead of ``j``.
    """
    x = np.asarray(x)
    k = _steps_per_unit(h)
    d = fam.dim
    dtype = np.result_type(fam.dtype, x)
    vals = np.zeros(((stop - start) * k + 1, d), dtype=dtype)
    for n in range(start, min(stop, start + len(x))):
        v = np.array(x[n - start], dtype=dtype)
        base = (n - start) * k
        t_prev = float(n)
        if closed_right or weight is None:
            vals[base] = v
        for j in range(1, k + 1):
            t = n + j / k
            v = fam.propagate(t, t_prev) @ v
            t_prev = t
            if j == k:
                break
            a = 1.0 if weight is None else weight.rule(j / k)
            vals[base + j] = a * v
    if closed_right:
        last = start + len(x) - 1
        if start <= stop <= last:
            vals[-1] = x[stop - start]
    return vals


def fam_step(fam) -> float:
    h = getattr(fam, "h", None)
    return config.current().rk4_step if h is None else float(h)


def apply_D_sequence(x, fam: EvolutionFamily, start):
    """``(D x)_n = x_n - U(n, n-1) x_{n-1}`` for ``n = start .. start+len(x)-1``,
    with ``x_{start-1} = 0``."""
    x = np.asarray(x)
    out = np.array(x, dtype=np.result_type(x, fam.dtype))
    for k in range(1, len(x)):
        n = start + k
        out[k] = x[k] - fam.propagate(n, n - 1) @ x[k - 1]
    return out


def _integral(fam, f, tau, t):
    """``int_tau^t U(t, s) f(s) ds`` split at the integers."""
    d = fam.dim
    acc = np.zeros(d, dtype=complex if fam.dtype == complex else float)
    pts = [tau] + [float(k) for k in range(math.floor(tau) + 1, math.ceil(t))] + [t]
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        nodes, w = _gl(a, b)
        part = np.zeros(d, dtype=acc.dtype)
        for s, ws in zip(nodes, w):
            part = part + ws * np.linalg.solve(fam.propagate(s, a), f(s))
        acc = acc + fam.propagate(t, b) @ (fam.propagate(b, a) @ part)
    return acc


def mild_residual(u, f, fam: EvolutionFamily, pairs):
    """``max |u(t) - U(t, tau) u(tau) + int_tau^t U(t, s) f(s) ds|`` over ``(t, tau)`` pairs."""
    worst = 0.0
    for t, tau in pairs:
        r = u(t) - fam.propagate(t, tau) @ u(tau) + _integral(fam, f, tau, t)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


@dataclass(frozen=True)
class CorrespondenceReport:
    h: float
    window: tuple
    r_residual: float
    mild_residual: float
    surjectivity_residual: float
    tolerance: float
    failures: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failures


def _sample_pairs(window, count, seed):
    rng = np.random.default_rng(seed)
    m, n = window
    pairs = []
    for _ in range(count):
        a, b = np.sort(rng.uniform(m, n, size=2))
        pairs.append((float(b), float(a)))
    return pairs


def verify_correspondence(fam: EvolutionFamily, u=None, du=None, window=(-6, 6), h=None,
                          y=None, seed=0, pairs=12, tolerance=None,
                          surjectivity_tolerance=1e-8) -> CorrespondenceReport:
    """Check the function/sequence correspondences on a manufactured pair.

    (a) with ``f = A u - u'`` (from ``du`` if given, else a central difference at
        ``h / 10``), ``R f`` must equal ``D (u(n))``;
    (b) for ``y = D x`` (``x`` random, or the supplied ``y`` taken as ``x``), the
        reconstruction ``u(t) = U(t, n)[(1 - a(t - n)) y_n - x_n]`` solves the mild
        identity with forcing ``S y``;
    (c) ``R(-S y) + D y = y``.

    A continuous family is re-integrated at step ``h`` when ``h`` differs from
    its own step, so ``h`` controls both sampling and integration.
    """
    tol = config.current().quadrature if tolerance is None else tolerance
    if h is None:
        h = fam_step(fam)
    elif hasattr(fam, "with_step") and fam_step(fam) != h:
        fam = fam.with_step(h)
    m, n = int(window[0]), int(window[1])
    d = fam.dim
    dtype = complex if fam.dtype == complex else float
    failures = []

    if u is None:
        def u(t):
            return np.zeros(d)
    if du is None:
        eps = h / 10.0

        def du(t, _u=u):
            return (np.asarray(_u(t + eps)) - np.asarray(_u(t - eps))) / (2 * eps)

    def f_rule(t):
        return fam.coefficient(t) @ np.asarray(u(t)) - np.asarray(du(t))

    f = SampledFunction.from_rule(f_rule, (m, n), h, d)
    idx, Rf = map_R(f, fam)
    xs = np.array([np.asarray(u(k), dtype=dtype) for k in range(m, n + 1)])
    Dx = apply_D_sequence(xs, fam, m)[1:]
    r_res = float(np.max(np.linalg.norm(Rf - Dx, axis=1))) if len(idx) else 0.0
    if not r_res <= tol:
        failures.append(f"|R f - D u(n)| = {r_res:.3e} > {tol:.1e}")

    # (b) and (c) on a finitely supported sequence strictly inside the window
    rng = np.random.default_rng(seed)
    inner = (m + 1, n - 1)
    L = inner[1] - inner[0]
    x = rng.standard_normal((L, d)) if y is None else np.asarray(y)
    x = np.array(x, dtype=dtype)
    x[-1] = 0.0
    yy = apply_D_sequence(x, fam, inner[0])
    weight = WeightFunction.default()
    Sy = map_S(yy, fam, inner[0], h, weight, stop=inner[1])

    def recon(t):
        k = math.floor(t)
        if k < inner[0] or k >= inner[1]:
            return np.zeros(d, dtype=dtype)
        r = t - k
        j = k - inner[0]
        return fam.propagate(t, k) @ ((1.0 - weight.antiderivative(r)) * yy[j] - x[j])

    lo_t, hi_t = inner[0] + 1e-9, float(inner[1])
    mres = mild_residual(recon, Sy, fam, _sample_pairs((lo_t, hi_t), pairs, seed))
    if not mres <= tol:
        failures.append(f"mild identity residual {mres:.3e} > {tol:.1e}")

    neg = SampledFunction(Sy.start, Sy.stop, Sy.h, -Sy.values, lambda t: -Sy(t))
    _, RS = map_R(neg, fam)
    yext = np.vstack([yy, np.zeros((1, d), dtype=yy.dtype)])
    Dy = apply_D_sequence(yext, fam, inner[0])
    surj = float(np.max(np.linalg.norm(RS + Dy[1:] - yext[1:], axis=1)))
    if not surj <= surjectivity_tolerance:
        failures.append(f"|R(-S y) + D y - y| = {surj:.3e} > {surjectivity_tolerance:.1e}")
    return CorrespondenceReport(h, (m, n), r_res, mres, surj, tol, tuple(failures))
