import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dichotomy_lab import config
from dichotomy_lab.errors import AmbientMismatch, RankAmbiguous, SpectrumOnContour
from dichotomy_lab.subspace import (
    Projector,
    Subspace,
    complement,
    eigen_projection,
    fredholm_pair,
    hyperbolicity_gap,
    image,
    intersection_dim,
    numerical_rank,
    oblique_projector,
    orthonormalize,
    preimage,
    principal_angles,
    relative_dimension,
    riesz_projection,
    spectral_projection_generator,
)
from dichotomy_lab.problems import petrovskij_matrix


def span(*cols, n=None):
    return orthonormalize(np.column_stack(cols))


def e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


class TestOrthonormalize:
    def test_identity_is_full(self):
        assert orthonormalize(np.eye(3)).dim == 3

    def test_repeated_vector(self):
        v = np.array([0.6, 0.8])
        assert orthonormalize(np.column_stack([v, v])).dim == 1

    def test_dependent_column_detected(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((5, 2))
        m = np.column_stack([a, a[:, 0] + a[:, 1]])
        s = np.linalg.svd(m, compute_uv=False)
        assert int(np.sum(s > 1e-10 * s[0])) == 2  # oracle
        assert orthonormalize(m).dim == 2

    def test_basis_is_orthonormal(self):
        rng = np.random.default_rng(2)
        W = orthonormalize(rng.standard_normal((6, 3)))
        assert np.allclose(W.basis.T @ W.basis, np.eye(3), atol=1e-13)


class TestRankRule:
    def test_clear_gap(self):
        assert numerical_rank([3.0, 1.0, 1e-14]) == 2

    def test_no_gap_is_ambiguous(self):
        with config.tolerances(rank_rtol=1e-3):
            with pytest.raises(RankAmbiguous):
                numerical_rank([1.0, 2e-3, 5e-4])

    def test_scale_floor_ignores_roundoff(self):
        assert numerical_rank([1e-16], scale=1.0) == 0
        assert numerical_rank([], scale=1.0) == 0


class TestPairs:
    def test_full_and_zero(self):
        r = fredholm_pair(Subspace.full(2), Subspace.zero(2))
        assert (r.alpha, r.beta, r.index) == (0, 0, 0)

    def test_diagonal_against_complement_of_first_factor(self):
        k = 3
        I = np.eye(k)
        W = orthonormalize(np.vstack([I, I]))
        V = orthonormalize(np.vstack([I, np.zeros((k, k))]))
        r = fredholm_pair(W, complement(V))
        assert (r.alpha, r.beta, r.index) == (0, 0, 0)

    def test_generic_planes_in_r3(self):
        rng = np.random.default_rng(3)
        W = orthonormalize(rng.standard_normal((3, 2)))
        V = orthonormalize(rng.standard_normal((3, 2)))
        assert fredholm_pair(W, V).index == 2 + 2 - 3

    def test_ambient_mismatch(self):
        with pytest.raises(AmbientMismatch):
            fredholm_pair(Subspace.full(2), Subspace.full(3))

    def test_relative_dimension(self):
        W = span(e(0, 4), e(1, 4))
        V = span(e(2, 4))
        assert relative_dimension(W, V) == 1
        assert relative_dimension(W, W) == 0

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 7), w=st.integers(0, 7), v=st.integers(0, 7), seed=st.integers(0, 10**6))
    def test_relative_dimension_is_dim_difference(self, n, w, v, seed):
        w, v = min(w, n), min(v, n)
        rng = np.random.default_rng(seed)
        W = orthonormalize(rng.standard_normal((n, w))) if w else Subspace.zero(n)
        V = orthonormalize(rng.standard_normal((n, v))) if v else Subspace.zero(n)
        assert relative_dimension(W, V) == w - v
        assert fredholm_pair(W, V).index == w + v - n

    def test_image_preimage_roundtrip(self):
        rng = np.random.default_rng(4)
        M = rng.standard_normal((4, 4))
        W = orthonormalize(rng.standard_normal((4, 2)))
        back = preimage(M, image(M, W))
        assert intersection_dim(back, W) == 2 and back.dim == 2

    def test_principal_angles_orthogonal(self):
        a = principal_angles(span(e(0, 3)), span(e(1, 3)))
        assert np.allclose(a, [math.pi / 2])


class TestProjections:
    def test_diagonal_riesz(self):
        P = riesz_projection(np.diag([0.5, 2.0]))
        assert np.allclose(P.matrix, np.diag([1.0, 0.0]), atol=1e-12)

    def test_all_inside(self):
        P = riesz_projection(np.diag([0.1, -0.3, 0.5j]))
        assert np.allclose(P.matrix, np.eye(3), atol=1e-12)

    def test_random_six_by_six_against_eigenvectors(self):
        rng = np.random.default_rng(5)
        lam = np.array([0.3, -0.5, 0.6j, 1.7, -2.0, 1.4j])
        S = rng.standard_normal((6, 6)) + 3 * np.eye(6)
        M = S @ np.diag(lam) @ np.linalg.inv(S)
        V = S[:, :3]
        W = np.linalg.inv(S)[:3, :]
        oracle = V @ W
        assert np.linalg.norm(riesz_projection(M).matrix - oracle, 2) <= 1e-10
        assert np.linalg.norm(eigen_projection(M, lambda z: abs(z) < 1).matrix - oracle, 2) <= 1e-10

    def test_spectrum_on_contour(self):
        with pytest.raises(SpectrumOnContour):
            riesz_projection(np.diag([1.0, 0.5]))

    def test_oblique_projector(self):
        P = oblique_projector(span(np.array([1.0, 1.0])), span(np.array([1.0, 0.0])))
        assert np.allclose(P.matrix @ P.matrix, P.matrix)
        assert np.allclose(P.matrix @ np.array([1.0, 1.0]), [1.0, 1.0])
        assert np.allclose(P.matrix @ np.array([1.0, 0.0]), 0.0)


class TestHyperbolicity:
    def test_gap_of_diag(self):
        gap, ok = hyperbolicity_gap(np.diag([-1.0, 1.0]))
        assert ok and gap == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_imaginary_eigenvalue(self):
        gap, ok = hyperbolicity_gap(np.array([[0.0, 1.0], [-1.0, 0.0]]))
        assert not ok and gap == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("k", [-3, 0, 5])
    def test_mode_blocks(self, k):
        gap, ok = hyperbolicity_gap(np.diag([1j * k - 1, 1j * k + 1]))
        assert ok and gap == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_full_mode_truncation(self):
        gap, ok = hyperbolicity_gap(petrovskij_matrix(K=4))
        assert ok and gap == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_generator_projection(self):
        assert np.allclose(spectral_projection_generator(np.diag([-1.0, 2.0])).matrix, np.diag([1.0, 0.0]))
        assert np.allclose(spectral_projection_generator(-np.eye(3)).matrix, np.eye(3))

    def test_symmetric_generator(self):
        rng = np.random.default_rng(6)
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        A = Q @ np.diag([-2.0, -1.0, 1.0, 3.0]) @ Q.T
        P = spectral_projection_generator(A)
        assert P.rank == 2
        assert np.allclose(P.matrix, P.matrix.T, atol=1e-10)
        assert np.allclose(P.matrix, Q[:, :2] @ Q[:, :2].T, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_riesz_matches_eigenprojection(n, seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, n + 1))
    mod = np.concatenate([rng.uniform(0.0, 0.7, k), rng.uniform(1.4, 3.0, n - k)])
    lam = mod * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    S = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / math.sqrt(n)
    M = S @ np.diag(lam) @ np.linalg.inv(S)
    P = riesz_projection(M)
    assert P.rank == k
    assert np.linalg.norm(P.matrix - eigen_projection(M, lambda z: abs(z) < 1).matrix, 2) < 1e-9


def test_projector_image_kernel_of_exact_projectors():
    P = Projector.from_matrix(np.diag([1.0, 0.0, 1.0]))
    assert P.rank == 2 and P.image().dim == 2 and P.kernel().dim == 1
    assert Projector.from_matrix(np.zeros((2, 2))).kernel().dim == 2
