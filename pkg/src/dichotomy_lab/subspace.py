"""Dense subspace and projection arithmetic.

Subspaces carry orthonormal bases; (possibly oblique) projections are plain
matrices wrapped in :class:`Projector`.  All integer outputs (dimensions,
defect numbers, indices) go through :func:`numerical_rank`, which refuses to
answer when the singular values show no clear gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import config
from .errors import AmbientMismatch, NotHyperbolic, RankAmbiguous, SpectrumOnContour

__all__ = [
    "Subspace",
    "Projector",
    "PairReport",
    "numerical_rank",
    "orthonormalize",
    "complement",
    "preimage",
    "image",
    "intersection_dim",
    "sum_dim",
    "principal_angles",
    "fredholm_pair",
    "relative_dimension",
    "oblique_projector",
    "riesz_projection",
    "eigen_projection",
    "hyperbolicity_gap",
    "spectral_projection_generator",
]


def _frozen(a):
    a = np.array(a, copy=True)
    if not np.iscomplexobj(a):
        a = a.astype(float)
    a.setflags(write=False)
    return a


def numerical_rank(s, rtol=None, gap=None, scale=None):
    """Rank from singular values ``s`` (any order).

    Values above ``rtol * max(max(s), scale)`` count; ``scale`` lets callers
    supply the natural size of the matrix (e.g. 1 for ``I - P``) so that pure
    round-off is not mistaken for rank.  When the cut separates kept from
    dropped values their ratio must be at least ``gap``; when nothing is
    dropped, the smallest value must clear the threshold by ``sqrt(gap)``.
    Otherwise :class:`RankAmbiguous` is raised.
    """
    tol = config.current()
    rtol = tol.rank_rtol if rtol is None else rtol
    gap = tol.rank_gap if gap is None else gap
    s = np.sort(np.abs(np.asarray(s, dtype=float)))[::-1]
    ref = max(s[0] if s.size else 0.0, 0.0 if scale is None else float(scale))
    if s.size == 0 or ref == 0.0:
        return 0
    tau = rtol * ref
    if s[0] <= tau:
        return 0
    r = int(np.count_nonzero(s > tau))
    if r < s.size:
        if s[r] > 0.0 and s[r - 1] < gap * s[r]:
            raise RankAmbiguous(
                f"no singular-value gap at rank {r}: "
                f"sigma[{r - 1}]={s[r - 1]:.3e}, sigma[{r}]={s[r]:.3e}"
            )
    elif s[-1] < tau * np.sqrt(gap):
        raise RankAmbiguous(
            f"smallest singular value {s[-1]:.3e} too close to threshold {tau:.3e}"
        )
    return r


def matrix_rank(a, scale=None):
    a = np.asarray(a)
    if a.size == 0:
        return 0
    return numerical_rank(np.linalg.svd(a, compute_uv=False), scale=scale)


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of ``ambient_dim``-space with orthonormal ``basis``."""

    ambient_dim: int
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis)
        if b.ndim != 2 or b.shape[0] != self.ambient_dim:
            raise AmbientMismatch(
                f"basis shape {b.shape} does not match ambient dim {self.ambient_dim}"
            )
        object.__setattr__(self, "basis", _frozen(b))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, n, dtype=float):
        return cls(n, np.zeros((n, 0), dtype=dtype))

    @classmethod
    def full(cls, n):
        return cls(n, np.eye(n))

    def projector(self) -> np.ndarray:
        """Orthogonal projection matrix onto the subspace."""
        return self.basis @ self.basis.conj().T

    def perp(self) -> "Subspace":
        return complement(self)

    def contains(self, v, tol=1e-10) -> bool:
        v = np.asarray(v)
        r = v - self.basis @ (self.basis.conj().T @ v)
        return bool(np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(v)))


@dataclass(frozen=True)
class Projector:
    matrix: np.ndarray = field(repr=False)
    rank: int

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise AmbientMismatch(f"projector must be square, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m)
        return cls(m, matrix_rank(m))

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2)) if self.ambient_dim else 0.0

    def idempotency_defect(self) -> float:
        p = self.matrix
        return float(np.linalg.norm(p @ p - p, 2)) if self.ambient_dim else 0.0

    def image(self) -> Subspace:
        return orthonormalize(self.matrix, scale=1.0)

    def kernel(self) -> Subspace:
        return orthonormalize(np.eye(self.ambient_dim) - self.matrix, scale=1.0)

    def complementary(self) -> "Projector":
        return Projector(np.eye(self.ambient_dim) - self.matrix, self.ambient_dim - self.rank)


@dataclass(frozen=True)
class PairReport:
    alpha: int
    beta: int
    index: int

    def __post_init__(self):
        if self.index != self.alpha - self.beta:
            raise ValueError("index must equal alpha - beta")


def orthonormalize(vectors, scale=None) -> Subspace:
    """Orthonormal basis of the column space of ``vectors`` (SVD, gap-checked rank)."""
    a = np.asarray(vectors)
    if a.ndim == 1:
        a = a[:, None]
    n = a.shape[0]
    if n < 1:
        raise ValueError("ambient dimension must be positive")
    if a.shape[1] == 0:
        return Subspace.zero(n, dtype=a.dtype if np.iscomplexobj(a) else float)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    r = numerical_rank(s, scale=scale)
    return Subspace(n, u[:, :r])


def complement(W: Subspace) -> Subspace:
    """Orthogonal complement."""
    n = W.ambient_dim
    if W.dim == 0:
        return Subspace.full(n)
    if W.dim == n:
        return Subspace.zero(n, dtype=W.basis.dtype)
    u, _, _ = np.linalg.svd(W.basis, full_matrices=True)
    return Subspace(n, u[:, W.dim:])


def image(M, W: Subspace) -> Subspace:
    """``M(W)`` for a square or rectangular matrix ``M``."""
    M = np.asarray(M)
    if W.dim == 0:
        return Subspace.zero(M.shape[0], dtype=np.result_type(M, W.basis))
    return orthonormalize(M @ W.basis)


def preimage(M, V: Subspace) -> Subspace:
    """``{x : M x in V}``, computed as the complement of ``M^H V^perp``."""
    M = np.asarray(M)
    if M.shape[0] != V.ambient_dim:
        raise AmbientMismatch("matrix rows do not match subspace ambient dim")
    c = complement(V)
    if c.dim == 0:
        return Subspace.full(M.shape[1])
    return complement(orthonormalize(M.conj().T @ c.basis))


def _check_ambient(W, V):
    if W.ambient_dim != V.ambient_dim:
        raise AmbientMismatch(f"ambient dims differ: {W.ambient_dim} vs {V.ambient_dim}")


def sum_dim(W: Subspace, V: Subspace) -> int:
    _check_ambient(W, V)
    if W.dim + V.dim == 0:
        return 0
    return matrix_rank(np.hstack([W.basis, V.basis]))


def intersection_dim(W: Subspace, V: Subspace) -> int:
    return W.dim + V.dim - sum_dim(W, V)


def principal_angles(W: Subspace, V: Subspace) -> np.ndarray:
    """Principal angles in ascending order (length ``min(dim W, dim V)``)."""
    _check_ambient(W, V)
    if W.dim == 0 or V.dim == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(W.basis, V.basis)[::-1]


def fredholm_pair(W: Subspace, V: Subspace) -> PairReport:
    """Defect numbers of the pair: ``dim(W∩V)``, ``codim(W+V)`` and their difference."""
    _check_ambient(W, V)
    s = sum_dim(W, V)
    alpha = W.dim + V.dim - s
    beta = W.ambient_dim - s
    return PairReport(alpha, beta, alpha - beta)


def relative_dimension(W: Subspace, V: Subspace) -> int:
    """``dim(W ∩ V^perp) - dim(W^perp ∩ V)``."""
    _check_ambient(W, V)
    return intersection_dim(W, complement(V)) - intersection_dim(complement(W), V)


def oblique_projector(img: Subspace, ker: Subspace) -> Projector:
    """Projection with prescribed image and kernel (they must be complementary)."""
    _check_ambient(img, ker)
    n = img.ambient_dim
    if img.dim + ker.dim != n:
        raise AmbientMismatch(
            f"image ({img.dim}) and kernel ({ker.dim}) dims do not add up to {n}"
        )
    if img.dim == 0:
        return Projector(np.zeros((n, n), dtype=ker.basis.dtype), 0)
    if ker.dim == 0:
        return Projector(np.eye(n, dtype=img.basis.dtype), n)
    E = np.hstack([img.basis, ker.basis])
    if matrix_rank(E) < n:
        raise RankAmbiguous("image and kernel are not complementary")
    k = img.dim
    # P = [S 0] E^{-1}
    sel = np.linalg.solve(E, np.eye(n))[:k]
    return Projector(img.basis @ sel, k)


def eigen_projection(M, inside) -> Projector:
    """Spectral projection assembled from an eigendecomposition.

    ``inside`` is a boolean predicate on eigenvalues; the result projects onto
    the span of the selected eigenvectors along the remaining ones.  Used as an
    independent check of :func:`riesz_projection`.
    """
    M = np.asarray(M)
    lam, V = np.linalg.eig(M)
    mask = np.array([bool(inside(z)) for z in lam])
    Vinv = np.linalg.inv(V)
    P = V[:, mask] @ Vinv[mask, :]
    if not np.iscomplexobj(M):
        P = P.real
    return Projector(P, int(mask.sum()))


def riesz_projection(M, contour_radius=1.0, quadrature_nodes=None) -> Projector:
    """Spectral projection for the eigenvalues inside ``|z| = contour_radius``.

    Trapezoidal rule on the circle for ``(2 pi i)^{-1} ∮ (z - M)^{-1} dz``.
    The rule converges like ``rho**nodes`` where ``rho`` is the worst ratio of
    eigenvalue modulus to radius (or its inverse), so the node count is doubled
    from ``quadrature_nodes`` until that bound falls below the configured
    target.
    """
    tol = config.current()
    M = np.asarray(M)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise AmbientMismatch(f"square matrix required, got {M.shape}")
    if contour_radius <= 0:
        raise ValueError("contour radius must be positive")
    nodes = tol.contour_nodes if quadrature_nodes is None else int(quadrature_nodes)
    if n == 0:
        return Projector(np.zeros((0, 0)), 0)
    lam = np.linalg.eigvals(M)
    dist = np.abs(np.abs(lam) - contour_radius)
    if dist.min() < tol.contour_gap * max(1.0, contour_radius):
        raise SpectrumOnContour(
            f"eigenvalue within {dist.min():.2e} of the contour |z| = {contour_radius}"
        )
    r = np.abs(lam) / contour_radius
    rho = np.max(np.where(r < 1, r, 1.0 / r))
    while rho**nodes > tol.riesz_target and nodes < tol.riesz_max_nodes:
        nodes *= 2
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = contour_radius * np.exp(1j * theta)
    eye = np.eye(n)
    P = np.zeros((n, n), dtype=complex)
    for zj in z:
        # dz = i z dtheta, and the 2 pi i cancels against the rule weights
        P += zj * np.linalg.solve(zj * eye - M, eye)
    P /= nodes
    if not np.iscomplexobj(M):
        P = P.real
    k = int(np.count_nonzero(np.abs(lam) < contour_radius))
    return Projector(P, k)


def hyperbolicity_gap(A):
    """Distance of ``spec(exp A)`` from the unit circle, and whether it is positive.

    Returns ``(gap, hyperbolic)`` with ``gap = min |exp(Re lambda) - 1|``.
    """
    A = np.asarray(A)
    if A.size == 0:
        return float("inf"), True
    re = np.linalg.eigvals(A).real
    gap = float(np.min(np.abs(np.expm1(re))))
    return gap, gap > config.current().hyperbolicity


def spectral_projection_generator(A) -> Projector:
    """Projection onto the stable (``Re lambda < 0``) spectral subspace of ``A``.

    Computed as the Riesz projection of ``exp(A)`` for the unit disc.
    """
    A = np.asarray(A)
    gap, ok = hyperbolicity_gap(A)
    if not ok:
        raise NotHyperbolic(f"generator is not hyperbolic (gap {gap:.2e})")
    return riesz_projection(scipy.linalg.expm(A), 1.0)
