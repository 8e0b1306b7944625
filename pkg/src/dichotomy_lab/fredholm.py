"""Finite sections of the difference operator ``D x = (x_n - U(n, n-1) x_{n-1})_n``.

The bi-infinite kernel consists of solutions that decay in both directions,
so the boundary-closed section pins ``x_{-N}`` to ``ker P^-_{-N}`` and ``x_N``
to ``Im P^+_N`` with extra full-row-rank constraint rows.  Its defect numbers
are then those of the bi-infinite operator, which is checked by requiring
identical answers for ``N`` and ``N - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .dichotomy import DichotomyRecord, halfline_dichotomy
from .errors import (
    AmbientMismatch,
    DimensionMismatch,
    GridMismatch,
    NoDichotomy,
    RawModeUnsupported,
    UnstableTruncation,
)
from .evolution import EvolutionFamily, _qr_positive
from .subspace import (
    PairReport,
    Projector,
    Subspace,
    complement,
    fredholm_pair,
    image,
    matrix_rank,
    numerical_rank,
    preimage,
)

__all__ = [
    "TruncatedD",
    "FredholmNumbers",
    "NodeReport",
    "ConsistencyReport",
    "TheoremReport",
    "LeftInverseResult",
    "assemble_truncated_D",
    "index_of_D",
    "kernel_basis",
    "node_operator",
    "node_numbers",
    "pair_vs_node_crosscheck",
    "same_side_node",
    "kernel_fibers",
    "apply_D",
    "apply_Dplus",
    "left_inverse_Dplus",
    "dichotomy_theorem_verify",
]


@dataclass(frozen=True)
class FredholmNumbers:
    dim_ker: int
    codim_im: int
    index: int

    def __post_init__(self):
        if self.index != self.dim_ker - self.codim_im:
            raise ValueError("index must equal dim_ker - codim_im")

    @classmethod
    def of(cls, dim_ker, codim_im):
        return cls(int(dim_ker), int(codim_im), int(dim_ker) - int(codim_im))

    def as_tuple(self):
        return (self.dim_ker, self.codim_im, self.index)


@dataclass(frozen=True)
class TruncatedD:
    """Finite section of ``D`` on ``window = (m, n)``.

    ``steps[k] = U(m+k+1, m+k)``.  In closed mode ``minus_space`` /
    ``plus_space`` are the subspaces the end values are constrained to.
    """

    window: tuple
    steps: tuple = field(repr=False)
    mode: str
    minus_space: Subspace | None = field(default=None, repr=False)
    plus_space: Subspace | None = field(default=None, repr=False)
    records: tuple | None = field(default=None, repr=False)
    assembled: np.ndarray = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.steps[0].shape[0]

    @property
    def boundary_rows(self) -> tuple:
        if self.mode == "raw":
            return (0, 0)
        return (self.dim - self.minus_space.dim, self.dim - self.plus_space.dim)

    def block(self, x, n):
        """Block of a stacked vector (or matrix of columns) at time ``n``."""
        m = self.window[0]
        d = self.dim
        return x[(n - m) * d : (n - m + 1) * d]


def _as_steps(steps, window):
    m, n = int(window[0]), int(window[1])
    if hasattr(steps, "propagate"):
        return tuple(steps.propagate(k + 1, k) for k in range(m, n))
    steps = tuple(np.asarray(s) for s in steps)
    if len(steps) != n - m:
        raise DimensionMismatch(f"need {n - m} steps for window {window}, got {len(steps)}")
    return steps


def _end_spaces(boundary, window):
    """Constraint subspaces ``(ker P^-_m, Im P^+_n)`` from records or projectors."""
    m, n = window
    lo, hi = boundary
    if isinstance(lo, DichotomyRecord):
        lo = lo.projector_at(m)
    if isinstance(hi, DichotomyRecord):
        hi = hi.projector_at(n)
    if isinstance(lo, Projector):
        lo = lo.kernel()
    if isinstance(hi, Projector):
        hi = hi.image()
    return lo, hi


def assemble_truncated_D(steps, window, boundary=None) -> TruncatedD:
    """Assemble the dense finite section.

    ``steps`` is a sequence of ``U(k+1, k)`` for ``k = m..n-1`` or an evolution
    family.  ``boundary`` is ``None``/``"raw"`` or a pair ``(minus, plus)`` of
    dichotomy records, projectors, or subspaces at the window ends.
    """
    m, n = int(window[0]), int(window[1])
    steps = _as_steps(steps, (m, n))
    d = steps[0].shape[0]
    if any(s.shape != (d, d) for s in steps):
        raise DimensionMismatch("all steps must be square of the same size")
    dtype = np.result_type(*steps)
    L = n - m + 1
    rows = [np.zeros(((L - 1) * d, L * d), dtype=dtype)]
    eye = np.eye(d)
    for k, U in enumerate(steps):
        r = k * d
        rows[0][r : r + d, (k + 1) * d : (k + 2) * d] = eye
        rows[0][r : r + d, k * d : (k + 1) * d] = -U
    if boundary is None or (isinstance(boundary, str) and boundary == "raw"):
        return TruncatedD((m, n), steps, "raw", assembled=rows[0])
    records = tuple(b for b in boundary) if all(
        isinstance(b, DichotomyRecord) for b in boundary) else None
    K, S = _end_spaces(boundary, (m, n))
    if K.ambient_dim != d or S.ambient_dim != d:
        raise DimensionMismatch("boundary subspaces have the wrong ambient dimension")
    # x_m in K  <=>  (K^perp)^H x_m = 0; likewise for x_n in S
    Kp, Sp = complement(K).basis, complement(S).basis
    lo = np.zeros((Kp.shape[1], L * d), dtype=np.result_type(dtype, Kp))
    lo[:, :d] = Kp.conj().T
    hi = np.zeros((Sp.shape[1], L * d), dtype=np.result_type(dtype, Sp))
    hi[:, (L - 1) * d :] = Sp.conj().T
    A = np.vstack([rows[0], lo, hi])
    return TruncatedD((m, n), steps, "closed", K, S, records, A)


def _shrunk(T: TruncatedD, by: int) -> TruncatedD:
    m, n = T.window
    m2, n2 = m + by, n - by
    steps = T.steps[by : len(T.steps) - by]
    if T.records is not None:
        return assemble_truncated_D(steps, (m2, n2), T.records)
    K, S = T.minus_space, T.plus_space
    for U in T.steps[:by]:
        K = image(U, K)
    for U in reversed(T.steps[len(T.steps) - by :]):
        S = preimage(U, S)
    return assemble_truncated_D(steps, (m2, n2), (K, S))


def _numbers(A):
    s = np.linalg.svd(A, compute_uv=False)
    r = numerical_rank(s) if s.size else 0
    return FredholmNumbers.of(A.shape[1] - r, A.shape[0] - r)


def index_of_D(T: TruncatedD, check_stability=True) -> FredholmNumbers:
    """Defect numbers of the boundary-closed section, checked at ``N`` and ``N - 2``."""
    if T.mode == "raw":
        raise RawModeUnsupported("raw finite sections have no stable defect numbers")
    here = _numbers(T.assembled)
    if check_stability:
        if len(T.steps) < 6:
            raise UnstableTruncation("window too short for the stability check")
        there = _numbers(_shrunk(T, 2).assembled)
        if here != there:
            raise UnstableTruncation(
                f"defect numbers change with the window: {here.as_tuple()} vs {there.as_tuple()}"
            )
    return here


def kernel_basis(T: TruncatedD) -> np.ndarray:
    """Orthonormal basis (columns) of the null space of the assembled section."""
    A = T.assembled
    _, s, vh = np.linalg.svd(A, full_matrices=True)
    r = numerical_rank(s) if s.size else 0
    return vh[r:].conj().T


def kernel_fibers(T: TruncatedD, basis=None) -> dict:
    """``{n: dim X_n}`` for interior times, ``X_n`` spanned by the n-th blocks of kernel vectors."""
    if basis is None:
        basis = kernel_basis(T)
    m, n = T.window
    out = {}
    for k in range(m + 1, n):
        out[k] = matrix_rank(T.block(basis, k)) if basis.shape[1] else 0
    return out


@dataclass(frozen=True)
class NodeReport:
    a: float
    b: float
    matrix_rep: np.ndarray = field(repr=False)
    numbers: FredholmNumbers


def node_numbers(K_minus: Subspace, P_plus: Projector, Q=None, R=None) -> tuple:
    """Matrix of ``(I - P^+) U`` on ``ker P^-`` and its defect numbers.

    ``U(b, a) B_minus = Q R`` may be given in factored form; the rank is then
    read off ``(I - P^+) Q`` so that disparate growth along ``ker P^-_a`` does
    not masquerade as rank loss.
    """
    d = P_plus.ambient_dim
    Bp = P_plus.kernel().basis
    IP = np.eye(d) - P_plus.matrix
    if Q is None:
        Q = K_minus.basis
        R = np.eye(K_minus.dim)
    mat = Bp.conj().T @ IP @ Q @ R
    diag = np.abs(np.diag(R)) if R.size else np.ones(0)
    core = Bp.conj().T @ IP @ Q if np.all(diag > 1e-300) else mat
    r = matrix_rank(core) if core.size else 0
    return mat, FredholmNumbers.of(K_minus.dim - r, Bp.shape[1] - r)


def _path_steps(rec_minus, rec_plus, fam, a, b):
    """Unit steps from ``a`` to ``b`` taken from the records where possible."""
    out = []
    t = a
    while t < b:
        out.append(fam.propagate(t + 1, t) if fam is not None else _record_step(rec_minus, rec_plus, t))
        t += 1
    return out


def _record_step(rec_minus, rec_plus, t):
    for rec in (rec_minus, rec_plus):
        try:
            i = rec.index_of(t)
        except GridMismatch:
            continue
        if i < len(rec.steps) and abs(rec.grid[i + 1] - (t + 1)) < 1e-12:
            return rec.steps[i]
    raise GridMismatch(f"no step U({t + 1}, {t}) available without the family")


def node_operator(rec_minus: DichotomyRecord, rec_plus: DichotomyRecord, fam, a, b) -> NodeReport:
    """``N(b, a) = (I - P^+_b) U(b, a)`` restricted to ``ker P^-_a``, in orthonormal bases."""
    if a > b:
        raise GridMismatch(f"node operator needs a <= b, got a={a}, b={b}")
    Pm = rec_minus.projector_at(a)
    Pp = rec_plus.projector_at(b)
    if Pm.ambient_dim != Pp.ambient_dim:
        raise AmbientMismatch("records live in different dimensions")
    K = Pm.kernel()
    Q = K.basis
    R = np.eye(K.dim, dtype=Q.dtype)
    if K.dim:
        for U in _path_steps(rec_minus, rec_plus, fam, a, b):
            Q, r = _qr_positive(U @ Q)
            R = r @ R
    mat, nums = node_numbers(K, Pp, Q, R)
    return NodeReport(a, b, mat, nums)


def same_side_node(rec: DichotomyRecord, start, end, fam=None) -> np.ndarray:
    """``(I - P_end) U(end, start)`` restricted to ``ker P_start``, for one record.

    These are the outer factors of ``N(n, m) = N(n, 0) N(0, 0) N(0, m)``; a
    dichotomy makes them invertible.
    """
    if start > end:
        raise GridMismatch(f"need start <= end, got {start} > {end}")
    K0 = rec.projector_at(start).kernel()
    P1 = rec.projector_at(end)
    K1 = P1.kernel()
    v = K0.basis
    i0 = rec.index_of(start)
    for k in range(rec.index_of(end) - i0):
        U = rec.steps[i0 + k] if rec.steps else fam.propagate(rec.grid[i0 + k + 1], rec.grid[i0 + k])
        v = U @ v
    return K1.basis.conj().T @ (np.eye(rec.dim) - P1.matrix) @ v


@dataclass(frozen=True)
class ConsistencyReport:
    node: FredholmNumbers
    pair: PairReport
    failures: tuple = ()

    @property
    def consistent(self) -> bool:
        return not self.failures

    def integers(self):
        return self.node.as_tuple() + (self.pair.alpha, self.pair.beta, self.pair.index)


def pair_vs_node_crosscheck(P_minus0: Projector, P_plus0: Projector) -> ConsistencyReport:
    """Compare ``N(0,0) = (I - P^+_0)|ker P^-_0`` with the pair ``(ker P^-_0, Im P^+_0)``."""
    if P_minus0.ambient_dim != P_plus0.ambient_dim:
        raise AmbientMismatch("projectors act on different spaces")
    K = P_minus0.kernel()
    _, node = node_numbers(K, P_plus0)
    pair = fredholm_pair(K, P_plus0.image())
    failures = []
    if node.dim_ker != pair.alpha:
        failures.append(f"dim ker N = {node.dim_ker} but alpha = {pair.alpha}")
    if node.codim_im != pair.beta:
        failures.append(f"codim Im N = {node.codim_im} but beta = {pair.beta}")
    if node.index != pair.index:
        failures.append(f"ind N = {node.index} but ind pair = {pair.index}")
    return ConsistencyReport(node, pair, tuple(failures))


def apply_D(steps, x, start):
    """``(D x)_n`` for ``n = start+1 .. start+len(x)-1`` given ``x_start ..``."""
    x = np.asarray(x)
    return np.array([x[k + 1] - steps[k] @ x[k] for k in range(len(x) - 1)])


def apply_Dplus(steps, x):
    """``D^+_b x = (x_{b+1}, x_{b+2} - U(b+2, b+1) x_{b+1}, ...)``.

    ``x`` holds ``x_{b+1}, ..., x_{b+L}``; ``steps[k] = U(b+k+2, b+k+1)``.
    """
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, *steps[: max(len(x) - 1, 0)]))
    out[0] = x[0]
    for k in range(1, len(x)):
        out[k] = x[k] - steps[k - 1] @ x[k - 1]
    return out


@dataclass(frozen=True)
class LeftInverseResult:
    x: np.ndarray
    x_prime: np.ndarray
    range_residual: float
    stable_part: np.ndarray = field(repr=False)
    unstable_part: np.ndarray = field(repr=False)


def left_inverse_Dplus(rec_plus: DichotomyRecord, b, window=None, y=None) -> LeftInverseResult:
    """Left inverse of ``D^+_b`` applied to ``y`` supported on ``[b+1, end]``.

    ``(D^+_b)^{-1} y = sum_k (T_s)^k y - sum_{k>=1} (T_u)^{-k} y`` is evaluated by
    the equivalent recursions

    * ``s_n = P_n (U(n, n-1) s_{n-1}) + P_n y_n`` forward from ``s_{b+1} = P y_{b+1}``,
    * ``w_n = (U(n+1, n)|ker P_n)^{-1} (w_{n+1} + (I - P_{n+1}) y_{n+1})`` backward,

    and ``x = s - w``.  Re-applying ``P_n`` is exact in exact arithmetic and keeps
    round-off in the unstable directions from growing.  ``x_prime`` is the
    unstable part at ``b+1``; ``y`` lies in the range iff
    ``(I - P_{b+1}) y_{b+1} = x_prime``.
    """
    if rec_plus is None or not rec_plus.steps:
        raise NoDichotomy("left inverse needs a dichotomy record with step matrices")
    lo, hi = rec_plus.grid[0], rec_plus.grid[-1]
    if window is None:
        window = (b + 1, hi)
    w0, w1 = int(window[0]), int(window[1])
    if w0 != b + 1 or b < lo or w1 > hi:
        raise GridMismatch(f"window {window} must start at b+1={b + 1} inside [{lo}, {hi}]")
    L = w1 - w0 + 1
    y = np.asarray(y)
    if y.shape[0] > L:
        raise DimensionMismatch(f"y has {y.shape[0]} entries, window holds {L}")
    d = rec_plus.dim
    yy = np.zeros((L, d), dtype=np.result_type(y, rec_plus.projectors[0].matrix))
    yy[: y.shape[0]] = y
    i0 = rec_plus.index_of(w0)
    P = [rec_plus.projectors[i0 + k].matrix for k in range(L)]
    steps = [rec_plus.steps[i0 + k] for k in range(L - 1)]
    kers = [rec_plus.projectors[i0 + k].kernel().basis for k in range(L)]
    eye = np.eye(d)
    s = np.zeros_like(yy)
    s[0] = P[0] @ yy[0]
    for k in range(1, L):
        s[k] = P[k] @ (steps[k - 1] @ s[k - 1]) + P[k] @ yy[k]
    w = np.zeros_like(yy)
    cutoff = config.current().series_cutoff
    for k in range(L - 2, -1, -1):
        v = w[k + 1] + (eye - P[k + 1]) @ yy[k + 1]
        if kers[k].shape[1] == 0 or not np.any(v):
            continue
        c, *_ = np.linalg.lstsq(steps[k] @ kers[k], v, rcond=None)
        w[k] = kers[k] @ c
        if np.linalg.norm(w[k]) < cutoff * max(1.0, np.linalg.norm(yy)) and not np.any(yy[: k + 1]):
            w[:k] = 0.0
            break
    x = s - w
    x_prime = -w[0]
    resid = float(np.linalg.norm((eye - P[0]) @ yy[0] - x_prime))
    return LeftInverseResult(x, x_prime, resid, s, w)


@dataclass(frozen=True)
class TheoremReport:
    problem: str
    rank_plus: int
    rank_minus: int
    dimension: int
    node_00: FredholmNumbers
    node_ba: FredholmNumbers
    ab: tuple
    pair: PairReport
    D: FredholmNumbers
    failures: tuple = ()

    @property
    def consistent(self) -> bool:
        return not self.failures

    @property
    def index(self) -> int:
        return self.D.index


def dichotomy_theorem_verify(problem, records=None, ab=(-3, 3)) -> TheoremReport:
    """Dichotomies, node operators, pair, and finite-section index must all agree.

    ``problem`` needs ``family``, ``window`` and ``name`` attributes, plus optional
    ``method`` (per-side construction overrides); ``records`` may supply
    precomputed ``(minus, plus)`` records.
    """
    fam: EvolutionFamily = problem.family
    N = problem.window
    if records is None:
        methods = getattr(problem, "methods", None) or {}
        period = getattr(problem, "period", 1)
        rec_minus = halfline_dichotomy(fam, "minus", N, methods.get("minus"), period=period)
        rec_plus = halfline_dichotomy(fam, "plus", N, methods.get("plus"), period=period)
    else:
        rec_minus, rec_plus = records
    a, b = ab
    n00 = node_operator(rec_minus, rec_plus, fam, 0, 0).numbers
    nba = node_operator(rec_minus, rec_plus, fam, a, b).numbers
    P0m, P0p = rec_minus.projector_at(0), rec_plus.projector_at(0)
    cross = pair_vs_node_crosscheck(P0m, P0p)
    T = assemble_truncated_D(fam, (-N, N), (rec_minus, rec_plus))
    dnum = index_of_D(T)
    failures = list(cross.failures)
    for label, nums in (("N(0,0)", n00), (f"N({b},{a})", nba)):
        if nums != dnum:
            failures.append(f"{label} numbers {nums.as_tuple()} != D numbers {dnum.as_tuple()}")
    pair = cross.pair
    if (pair.alpha, pair.beta, pair.index) != dnum.as_tuple():
        failures.append(f"pair numbers {(pair.alpha, pair.beta, pair.index)} != D {dnum.as_tuple()}")
    return TheoremReport(
        problem=getattr(problem, "name", "?"),
        rank_plus=rec_plus.rank,
        rank_minus=rec_minus.rank,
        dimension=fam.dim,
        node_00=n00,
        node_ba=nba,
        ab=(a, b),
        pair=pair,
        D=dnum,
        failures=tuple(failures),
    )
