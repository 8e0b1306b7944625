"""Exponential dichotomies on half-lines: construction, constants, verification.

Records live on a grid of times.  Construction always follows the same two
transports, which are the numerically stable directions:

* the stable subspace ``Im P_t`` is *pulled back* from the far end of the
  window (preimages, computed through the adjoint sweep);
* the unstable subspace ``ker P_t`` is *pushed forward* (images,
  re-orthonormalised at every step).

The methods differ only in where the transported subspaces start: the
spectral projection of the limit coefficient (``spectral-limit``), the
dominant directions of a QR long product (``qr-product``), or the Riesz
projection of the monodromy matrix (``floquet``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import config
from .errors import (
    EstimateFailed,
    GridMismatch,
    NoSpectralGap,
    NotAsymptoticallyConstant,
    OutOfWindow,
    RankAmbiguous,
    SplitFailed,
)
from .evolution import EvolutionFamily, _qr_positive
from .subspace import (
    Projector,
    Subspace,
    complement,
    image,
    matrix_rank,
    oblique_projector,
    preimage,
    riesz_projection,
    spectral_projection_generator,
)

__all__ = [
    "DichotomyRecord",
    "VerificationReport",
    "halfline_dichotomy",
    "record_from_subspaces",
    "dichotomy_constants",
    "restricted_norms",
    "extend_discrete_to_continuous",
    "continuous_record",
    "verify_dichotomy",
    "floquet_projector",
    "user_record",
    "SIDES",
    "METHODS",
]

SIDES = ("plus", "minus", "full")
METHODS = ("spectral-limit", "qr-product", "floquet", "user-supplied")
_RNG_SEED = 20020101


@dataclass(frozen=True)
class DichotomyRecord:
    side: str
    grid: tuple
    projectors: tuple = field(repr=False)
    rank: int
    M: float
    alpha: float
    method: str
    steps: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if len(self.grid) != len(self.projectors):
            raise GridMismatch("one projector per grid time required")
        if any(p.rank != self.rank for p in self.projectors):
            raise ValueError("projector ranks vary along the grid")

    @property
    def dim(self) -> int:
        return self.projectors[0].ambient_dim

    @property
    def sup_norm(self) -> float:
        return max(p.norm for p in self.projectors)

    def index_of(self, t) -> int:
        for i, g in enumerate(self.grid):
            if abs(g - t) <= 1e-12:
                return i
        raise GridMismatch(f"time {t} is not on the {self.side} record grid")

    def projector_at(self, t) -> Projector:
        return self.projectors[self.index_of(t)]

    def step_at(self, i):
        return self.steps[i]

    def restrict(self, start, end) -> "DichotomyRecord":
        i, j = self.index_of(start), self.index_of(end)
        return replace(
            self,
            grid=self.grid[i : j + 1],
            projectors=self.projectors[i : j + 1],
            steps=self.steps[i:j] if self.steps else (),
        )

    def swapped(self) -> "DichotomyRecord":
        """``P -> I - P`` along the grid (an invalid record, used as a self-test)."""
        return replace(
            self,
            projectors=tuple(p.complementary() for p in self.projectors),
            rank=self.dim - self.rank,
        )


@dataclass(frozen=True)
class VerificationReport:
    intertwining: float
    min_kernel_sv: float
    stable_excess: float
    unstable_excess: float
    sup_projector_norm: float
    tolerance: float
    failures: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.failures


def _window(side, window):
    if window is None:
        window = config.current().window
    if isinstance(window, (int, np.integer)):
        N = int(window)
        lo, hi = (0, N) if side == "plus" else (-N, 0)
    else:
        lo, hi = int(window[0]), int(window[1])
        N = hi - lo
    if N < 4:
        raise ValueError(f"window length {N} < 4")
    return lo, hi


def _steps(fam, grid):
    return tuple(fam.propagate(grid[i + 1], grid[i]) for i in range(len(grid) - 1))


def _pull_back(steps, stable_end: Subspace):
    """Stable subspaces along the grid: preimages of ``stable_end`` at the last time."""
    perp = complement(stable_end)
    perps = [perp]
    for U in reversed(steps):
        c = perps[-1]
        perps.append(image(U.conj().T, c) if c.dim else c)
    perps.reverse()
    return [complement(c) for c in perps]


def _push_forward(steps, unstable_start: Subspace):
    out = [unstable_start]
    for U in steps:
        out.append(image(U, out[-1]))
    return out


def record_from_subspaces(side, grid, stables, unstables, method, fam=None, steps=None,
                          constants=True):
    """Assemble a record from per-time image/kernel subspaces."""
    projs = []
    for t, S, K in zip(grid, stables, unstables):
        if S.dim + K.dim != S.ambient_dim:
            raise SplitFailed(
                f"at t={t}: stable dim {S.dim} + unstable dim {K.dim} != {S.ambient_dim}"
            )
        try:
            projs.append(oblique_projector(S, K))
        except RankAmbiguous as exc:
            raise SplitFailed(f"at t={t}: {exc}") from exc
    ranks = {p.rank for p in projs}
    if len(ranks) != 1:
        raise SplitFailed(f"projector rank changes along the grid: {sorted(ranks)}")
    if steps is None:
        steps = _steps(fam, grid)
    rec = DichotomyRecord(side, tuple(grid), tuple(projs), projs[0].rank, 1.0, 1.0, method,
                          tuple(steps))
    if constants:
        M, alpha = dichotomy_constants(rec, fam)
        rec = replace(rec, M=M, alpha=alpha)
    return rec


def _has_limit(fam, side):
    try:
        fam.limit(side)
    except (NotAsymptoticallyConstant, NotImplementedError):
        return False
    return True


def _generic_frame(d, dtype):
    rng = np.random.default_rng(_RNG_SEED)
    Z = rng.standard_normal((d, d))
    if dtype == complex:
        Z = Z + 1j * rng.standard_normal((d, d))
    return np.linalg.qr(Z)[0]


def _count_unstable(exponents, gap_min):
    lam = np.sort(np.asarray(exponents))[::-1]
    band = np.abs(lam) < gap_min / 2
    if np.any(band):
        raise NoSpectralGap(
            f"finite-time exponents {np.round(lam, 4).tolist()} have no gap of width "
            f"{gap_min} around zero"
        )
    return int(np.count_nonzero(lam > 0))


def _padding(fam, edge, direction):
    """Up to ``qr_padding`` steps beyond ``edge``, in forward time order; stops where the family ends."""
    out = []
    for k in range(config.current().qr_padding):
        a, b = (edge + k, edge + k + 1) if direction > 0 else (edge - k - 1, edge - k)
        try:
            out.append(fam.propagate(b, a))
        except OutOfWindow:
            break
    return out if direction > 0 else out[::-1]


def _qr_sweep(steps, frame):
    """Frames along the product of ``steps`` applied to ``frame``, and finite-time exponents.

    The exponents average the log-diagonals over the second half of the sweep
    only, so the transient while the frame aligns does not bias them.
    """
    Q = frame
    frames = [Q]
    per_step = []
    for U in steps:
        Q, R = _qr_positive(U @ Q)
        frames.append(Q)
        with np.errstate(divide="ignore"):
            per_step.append(np.log(np.abs(np.diag(R))))
    tail = per_step[len(per_step) // 2:]
    return frames, np.mean(tail, axis=0)


def halfline_dichotomy(fam: EvolutionFamily, side="plus", window=None, method=None,
                       period=1) -> DichotomyRecord:
    """Dichotomy projections on ``[0, N]`` (``side='plus'``) or ``[-N, 0]``.

    ``method`` defaults to ``spectral-limit`` when the family has a coefficient
    limit on that side, and ``qr-product`` otherwise.
    """
    if side not in ("plus", "minus"):
        raise ValueError("side must be 'plus' or 'minus'")
    lo, hi = _window(side, window)
    grid = list(range(lo, hi + 1))
    if method is None:
        method = "spectral-limit" if _has_limit(fam, side) else "qr-product"
    steps = _steps(fam, grid)
    d = fam.dim

    if method == "floquet":
        P = [floquet_projector(fam, period, start=t) for t in grid[:period]]
        projs = [P[(i) % period] for i in range(len(grid))]
        stables = [p.image() for p in projs]
        unstables = [p.kernel() for p in projs]
        return _finish(side, grid, stables, unstables, method, fam, steps, projs)

    if method == "spectral-limit":
        A = fam.limit(side)
        PA = spectral_projection_generator(A)
        if side == "plus":
            stables = _pull_back(steps, PA.image())
            unstables = _push_forward(steps, complement(stables[0]))
        else:
            unstables = _push_forward(steps, PA.kernel())
            stables = _pull_back(steps, complement(unstables[-1]))
        return _finish(side, grid, stables, unstables, method, fam, steps)

    if method == "qr-product":
        # Sweeps start ``qr_padding`` steps outside the window so the frames
        # reaching the far end have already converged.
        gap_min = config.current().gap_min
        frame = _generic_frame(d, fam.dtype)
        if side == "plus":
            pad = _padding(fam, hi, +1)
            adj = [U.conj().T for U in reversed(list(steps) + pad)]
            frames, rates = _qr_sweep(adj, frame)
            u = _count_unstable(rates, gap_min)
            frames = frames[len(pad):]
            frames.reverse()
            stables = [complement(Subspace(d, Q[:, :u])) for Q in frames]
            unstables = _push_forward(steps, complement(stables[0]))
        else:
            pad = _padding(fam, lo, -1)
            frames, rates = _qr_sweep(pad + list(steps), frame)
            u = _count_unstable(rates, gap_min)
            frames = frames[len(pad):]
            unstables = _push_forward(steps, Subspace(d, frames[0][:, :u]))
            stables = _pull_back(steps, complement(unstables[-1]))
        return _finish(side, grid, stables, unstables, method, fam, steps)

    raise ValueError(f"unsupported construction method {method!r}")


def _finish(side, grid, stables, unstables, method, fam, steps, projs=None):
    if projs is None:
        return record_from_subspaces(side, grid, stables, unstables, method, fam, steps)
    rec = DichotomyRecord(side, tuple(grid), tuple(projs), projs[0].rank, 1.0, 1.0, method,
                          tuple(steps))
    M, alpha = dichotomy_constants(rec, fam)
    return replace(rec, M=M, alpha=alpha)


def _bases(rec):
    return [p.image() for p in rec.projectors], [p.kernel() for p in rec.projectors]


def _record_steps(rec, fam):
    if rec.steps and len(rec.steps) == len(rec.grid) - 1:
        return rec.steps
    if fam is None:
        raise ValueError("record carries no step matrices; pass the family")
    return _steps(fam, rec.grid)


def restricted_norms(rec: DichotomyRecord, fam=None):
    """All grid pairs ``tau < t``: ``(t - tau, |U|_Im P|, |(U|_ker P)^{-1}|)``.

    Restrictions are products of the per-step restricted matrices in the
    orthonormal image/kernel bases, so round-off along the other subspace is
    discarded at every step instead of being amplified.  Vacuous entries
    (zero-dimensional subspace) are ``nan``.
    """
    steps = _record_steps(rec, fam)
    S, K = _bases(rec)
    g = np.asarray(rec.grid, dtype=float)
    n = len(g)
    Ms, Mu_inv = [], []
    for i, U in enumerate(steps):
        Ms.append(S[i + 1].basis.conj().T @ U @ S[i].basis)
        Mu = K[i + 1].basis.conj().T @ U @ K[i].basis
        Mu_inv.append(np.linalg.inv(Mu) if Mu.size else Mu)
    out = []
    for j in range(n - 1):
        ps = np.eye(S[j].dim, dtype=complex if np.iscomplexobj(S[j].basis) else float)
        pu = np.eye(K[j].dim, dtype=complex if np.iscomplexobj(K[j].basis) else float)
        for i in range(j + 1, n):
            ps = Ms[i - 1] @ ps
            pu = pu @ Mu_inv[i - 1]
            ns = np.linalg.norm(ps, 2) if ps.size else np.nan
            nu = np.linalg.norm(pu, 2) if pu.size else np.nan
            out.append((g[i] - g[j], ns, nu))
    return np.array(out, dtype=float).reshape(-1, 3)


def dichotomy_constants(rec: DichotomyRecord, fam=None):
    """Fit ``(M, alpha)`` so that both dichotomy estimates hold on all grid pairs.

    Each nonvacuous estimate gets its own log-linear least-squares rate; the
    smaller rate is reported, and ``M = exp(max residual)`` (at least 1) makes
    the bounds hold on every sampled pair.
    """
    data = restricted_norms(rec, fam)
    s = data[:, 0]
    rates, logs = [], []
    with np.errstate(divide="ignore"):
        for col in (1, 2):
            y = np.log(data[:, col])
            ok = np.isfinite(y)
            if not ok.any():
                continue
            if np.unique(s[ok]).size < 2:
                rates.append(-float(np.max(y[ok] / s[ok])))
            else:
                slope = np.polyfit(s[ok], y[ok], 1)[0]
                rates.append(-float(slope))
            logs.append((s[ok], y[ok]))
    if not rates:
        raise EstimateFailed("both dichotomy estimates are vacuous")
    alpha = min(rates)
    if not alpha > 0:
        raise EstimateFailed(f"fitted dichotomy rate {alpha:.3e} is not positive")
    resid = max(float(np.max(y + alpha * ss)) for ss, y in logs)
    M = max(1.0, math.exp(resid))
    return M, alpha


def verify_dichotomy(rec: DichotomyRecord, fam=None, tolerance=1e-8) -> VerificationReport:
    """Check intertwining, invertibility on kernels, and both estimates with ``(M, alpha)``."""
    steps = _record_steps(rec, fam)
    failures = []
    inter = 0.0
    min_sv = np.inf
    S, K = _bases(rec)
    for i, U in enumerate(steps):
        P0, P1 = rec.projectors[i].matrix, rec.projectors[i + 1].matrix
        nu = np.linalg.norm(U, 2)
        res = np.linalg.norm(U @ P0 - P1 @ U, 2) / max(nu, 1e-300)
        inter = max(inter, res)
        if K[i].dim:
            if K[i + 1].dim != K[i].dim:
                min_sv = 0.0
            else:
                Mu = K[i + 1].basis.conj().T @ U @ K[i].basis
                min_sv = min(min_sv, np.linalg.svd(Mu, compute_uv=False).min())
    if inter > tolerance:
        failures.append(f"intertwining residual {inter:.3e} > {tolerance:.1e}")
    if min_sv <= tolerance:
        failures.append(f"restriction to kernels not invertible (sigma_min {min_sv:.3e})")
    st_ex = un_ex = 0.0
    try:
        data = restricted_norms(rec, fam)
    except np.linalg.LinAlgError:
        data = None
        failures.append("restricted kernel maps are singular")
    if data is not None and len(data):
        bound = rec.M * np.exp(-rec.alpha * data[:, 0])
        with np.errstate(invalid="ignore"):
            st = np.nanmax(np.append(data[:, 1] / bound - 1.0, -np.inf))
            un = np.nanmax(np.append(data[:, 2] / bound - 1.0, -np.inf))
        st_ex, un_ex = float(max(st, 0.0)), float(max(un, 0.0))
        if st_ex > tolerance:
            failures.append(f"stable estimate exceeded by factor {1 + st_ex:.3e}")
        if un_ex > tolerance:
            failures.append(f"unstable estimate exceeded by factor {1 + un_ex:.3e}")
    return VerificationReport(
        intertwining=float(inter),
        min_kernel_sv=float(min_sv),
        stable_excess=st_ex,
        unstable_excess=un_ex,
        sup_projector_norm=rec.sup_norm,
        tolerance=tolerance,
        failures=tuple(failures),
    )


def extend_discrete_to_continuous(rec: DichotomyRecord, fam: EvolutionFamily, t0) -> Projector:
    """Projector at a non-grid time ``t0`` from an integer-grid record.

    With ``n = floor(t0)``: the image is ``{x : U(n+1, t0) x in Im P_{n+1}}``
    and the kernel is ``U(t0, n) ker P_n``.
    """
    t0 = float(t0)
    lo, hi = rec.grid[0], rec.grid[-1]
    if not lo <= t0 <= hi:
        raise GridMismatch(f"t0={t0} outside record window [{lo}, {hi}]")
    if t0 == int(t0):
        return rec.projector_at(int(t0))
    n = math.floor(t0)
    Pn, Pn1 = rec.projector_at(n), rec.projector_at(n + 1)
    Xs = preimage(fam.propagate(n + 1, t0), Pn1.image())
    Xu = image(fam.propagate(t0, n), Pn.kernel())
    if Xs.dim + Xu.dim != rec.dim:
        raise SplitFailed(f"at t0={t0}: dims {Xs.dim} + {Xu.dim} != {rec.dim}")
    if Xs.dim and Xu.dim and matrix_rank(np.hstack([Xs.basis, Xu.basis])) < rec.dim:
        raise SplitFailed(f"at t0={t0}: transported subspaces are not complementary")
    try:
        return oblique_projector(Xs, Xu)
    except RankAmbiguous as exc:
        raise SplitFailed(str(exc)) from exc


def continuous_record(rec: DichotomyRecord, fam: EvolutionFamily, times) -> DichotomyRecord:
    """Record on the merged grid of ``rec`` and extra (possibly non-integer) ``times``."""
    grid = sorted(set(float(t) for t in rec.grid) | set(float(t) for t in times))
    projs = [extend_discrete_to_continuous(rec, fam, t) for t in grid]
    out = DichotomyRecord(rec.side, tuple(grid), tuple(projs), rec.rank, 1.0, 1.0, rec.method,
                          _steps(fam, grid))
    M, alpha = dichotomy_constants(out)
    return replace(out, M=M, alpha=alpha)


def floquet_projector(fam: EvolutionFamily, period: int, start=0) -> Projector:
    """Riesz projection of the monodromy matrix ``U(start + period, start)`` for the unit disc."""
    period = int(period)
    if period < 1:
        raise ValueError("period must be a positive integer")
    # multipliers come from an integrator, so "on the circle" is judged with
    # a gap matched to its accuracy rather than to round-off
    tol = config.current()
    with config.tolerances(contour_gap=max(tol.contour_gap, tol.floquet_gap)):
        return riesz_projection(fam.propagate(start + period, start), 1.0)


def user_record(side, grid, projectors, fam) -> DichotomyRecord:
    """Wrap user-supplied projectors; constants are fitted from ``fam``."""
    projs = tuple(p if isinstance(p, Projector) else Projector.from_matrix(p) for p in projectors)
    rec = DichotomyRecord(side, tuple(grid), projs, projs[0].rank, 1.0, 1.0, "user-supplied",
                          _steps(fam, grid))
    M, alpha = dichotomy_constants(rec)
    return replace(rec, M=M, alpha=alpha)
