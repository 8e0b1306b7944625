import math

import numpy as np
import pytest

from dichotomy_lab.errors import GridMisaligned
from dichotomy_lab.evolution import ContinuousCoefficients, PiecewiseConstantPerturbed
from dichotomy_lab.reduction import (
    SampledFunction,
    WeightFunction,
    apply_D_sequence,
    map_B,
    map_R,
    map_S,
    verify_correspondence,
)


def tanh_family(h=None):
    return ContinuousCoefficients(lambda t: np.array([[-math.tanh(t)]]), 1, h=h)


def autonomous(*diag):
    A = np.diag(diag)
    return PiecewiseConstantPerturbed(A, A)


class TestWeight:
    def test_default_weight(self):
        w = WeightFunction.default()
        assert w.check() == []
        assert w.mean() == pytest.approx(1.0, abs=1e-14)
        assert w(0.0) == 0.0 and w(3.0) == 0.0

    def test_zero_mean_weight_flagged(self):
        sine = WeightFunction(lambda s: math.sin(2 * math.pi * s), name="sin")
        assert any("mean" in p for p in sine.check())


class TestR:
    def test_zero_forcing(self):
        f = SampledFunction.from_rule(lambda t: np.zeros(2), (-3, 3), 0.1)
        _, vals = map_R(f, autonomous(-1.0, 2.0))
        assert np.all(vals == 0)

    def test_constant_forcing_zero_generator(self):
        c = np.array([1.5, -0.25])
        f = SampledFunction.from_rule(lambda t: c, (-3, 3), 0.1)
        _, vals = map_R(f, autonomous(0.0, 0.0))
        assert np.allclose(vals, -c, atol=1e-13)

    def test_manufactured_pair(self):
        fam = tanh_family()

        def u(t):
            return np.array([math.exp(-t * t)])

        def f(t):
            return np.array([-math.tanh(t) * math.exp(-t * t) + 2 * t * math.exp(-t * t)])

        F = SampledFunction.from_rule(f, (-6, 6), 0.01)
        idx, Rf = map_R(F, fam)
        un = np.array([u(n) for n in range(-7, 7)])
        Du = un[1:] - np.array([fam.propagate(n, n - 1) @ un[i] for i, n in enumerate(range(-6, 7))])
        got = dict(zip(idx.tolist(), Rf[:, 0]))
        for i, n in enumerate(range(-6, 7)):
            if n in got:
                assert got[n] == pytest.approx(Du[i, 0], abs=1e-7)


class TestS:
    def test_zero(self):
        assert np.all(map_S(np.zeros((4, 2)), autonomous(-1.0, 2.0), 0, h=0.1).values == 0)

    def test_vanishes_at_integers(self):
        rng = np.random.default_rng(0)
        Sx = map_S(rng.standard_normal((5, 2)), autonomous(-1.0, 2.0), 0, h=0.05)
        assert np.allclose(Sx.at_integers(), 0.0)

    def test_impulse_closed_form(self):
        x = np.zeros((3, 2))
        x[0, 0] = 1.0
        Sx = map_S(x, autonomous(-1.0, 2.0), 0, h=0.05)
        for t in (0.1, 0.33, 0.5, 0.9):
            want = (1 - math.cos(2 * math.pi * t)) * math.exp(-t)
            assert np.allclose(Sx(t), [want, 0.0], atol=1e-10)
        assert np.allclose(Sx(1.5), 0.0) and np.allclose(Sx(2.5), 0.0)


class TestB:
    def test_constant_with_identity_steps(self):
        v = np.array([0.3, -1.0])
        Bx = map_B(np.tile(v, (4, 1)), autonomous(0.0, 0.0), 0, h=0.25)
        assert np.allclose(Bx.values, v)

    def test_impulse(self):
        x = np.zeros((3, 2))
        x[0, 0] = 1.0
        Bx = map_B(x, autonomous(-1.0, 2.0), 0, h=0.1)
        for t in (0.0, 0.4, 0.9):
            assert np.allclose(Bx(t), [math.exp(-t), 0.0], atol=1e-12)
        assert np.allclose(Bx(1.5), 0.0)

    def test_kernel_maps_to_sech(self):
        fam = tanh_family()
        x = np.array([[1 / math.cosh(n)] for n in range(-8, 9)])
        Bx = map_B(x, fam, -8, h=0.1)
        for t in Bx.times:
            assert Bx(t)[0] == pytest.approx(1 / math.cosh(t), abs=1e-7)


class TestCorrespondence:
    def test_zero_pair(self):
        rep = verify_correspondence(tanh_family(), window=(-4, 4))
        assert rep.r_residual == 0.0 and rep.passed

    def test_sech_is_homogeneous(self):
        rep = verify_correspondence(tanh_family(), u=lambda t: np.array([1 / math.cosh(t)]),
                                    du=lambda t: np.array([-math.tanh(t) / math.cosh(t)]), window=(-6, 6))
        assert rep.r_residual < 1e-7 and rep.passed

    def test_quadrature_order(self):
        def u(t):
            return np.array([math.exp(-t * t)])

        def du(t):
            return np.array([-2 * t * math.exp(-t * t)])

        a = verify_correspondence(tanh_family(), u, du, window=(-6, 6), h=1e-2)
        b = verify_correspondence(tanh_family(), u, du, window=(-6, 6), h=5e-3)
        assert a.r_residual < 1e-6
        assert a.r_residual / b.r_residual >= 8.0
        assert a.surjectivity_residual < 1e-8


class TestLinearity:
    def test_maps_are_linear(self):
        fam = autonomous(-0.5, 1.0)
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal((2, 4, 2))
        a, b = 0.7, -1.3
        S = lambda z: map_S(z, fam, 0, h=0.1).values
        B = lambda z: map_B(z, fam, 0, h=0.1).values
        assert np.allclose(S(a * x + b * y), a * S(x) + b * S(y), atol=1e-12)
        assert np.allclose(B(a * x + b * y), a * B(x) + b * B(y), atol=1e-12)
        f = SampledFunction.from_rule(lambda t: np.array([math.sin(t), t]), (0, 4), 0.1)
        g = SampledFunction.from_rule(lambda t: np.array([1.0, math.cos(t)]), (0, 4), 0.1)
        fg = SampledFunction.from_rule(lambda t: a * f(t) + b * g(t), (0, 4), 0.1)
        _, rf = map_R(f, fam)
        _, rg = map_R(g, fam)
        _, rfg = map_R(fg, fam)
        assert np.allclose(rfg, a * rf + b * rg, atol=1e-12)

    def test_D_sequence(self):
        fam = autonomous(-1.0, 1.0)
        x = np.ones((3, 2))
        Dx = apply_D_sequence(x, fam, 0)
        assert np.allclose(Dx[0], x[0])
        assert np.allclose(Dx[1], x[1] - np.diag([math.exp(-1), math.e]) @ x[0])


class TestSampled:
    def test_misaligned_grid(self):
        with pytest.raises(GridMisaligned):
            SampledFunction.from_rule(lambda t: np.zeros(1), (0, 1), 0.3)

    def test_csv_roundtrip(self, tmp_path):
        f = SampledFunction.from_rule(lambda t: np.array([math.sin(t), t * t]), (-2, 2), 0.25)
        f.to_csv(tmp_path / "f.csv")
        g = SampledFunction.from_csv(tmp_path / "f.csv")
        assert g.start == -2 and g.stop == 2 and np.array_equal(g.values, f.values)
        assert g(0.1)[0] == pytest.approx(math.sin(0.1), abs=1e-3)
