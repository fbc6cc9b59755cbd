from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sisampling.errors import DomainMismatch, ParseError, UnsupportedRegime
from sisampling.gridfn import (
    Grid,
    GridFunction,
    PatchFunction,
    assemble_patch,
    exp_basis,
    fourier_coefficients,
    quadrature,
    vectorize_patch,
)
from sisampling.lattice import SamplingLattice
from sisampling.verify import random_patch


def unit(R=256, d=1):
    return Grid.cube(0, 1, R, d)


class TestGrid:
    def test_midpoints(self):
        g = Grid((0,), (1,), 4)
        np.testing.assert_allclose(g.axes[0], [0.125, 0.375, 0.625, 0.875])
        assert g.shape == (4,)

    def test_validation(self):
        with pytest.raises(ValueError):
            Grid((0,), (1,), 1)
        with pytest.raises(ValueError):
            Grid((0,), (0,), 8)
        with pytest.raises(ValueError):
            Grid((0,), (Fraction(1, 3),), 8)

    def test_index_alignment(self):
        g = unit(8)
        assert g.index_of((Fraction(1, 2),)) == (4,)
        with pytest.raises(DomainMismatch):
            g.index_of((Fraction(1, 3),))


class TestQuadrature:
    def test_constant(self):
        assert quadrature(GridFunction(unit(), np.ones(256))) == 1.0

    def test_full_period_cancels(self):
        f = GridFunction.from_callable(lambda x: np.exp(2j * np.pi * x[:, 0]), unit())
        assert abs(quadrature(f)) < 1e-12

    def test_x_squared(self):
        f = GridFunction.from_callable(lambda x: x[:, 0] ** 2, unit())
        assert abs(quadrature(f) - 1 / 3) < 2e-6

    def test_sub_box_and_wrap(self):
        f = GridFunction.from_callable(lambda x: x[:, 0], unit(8), periodic=True)
        assert quadrature(f, ((Fraction(1, 2),), (Fraction(1),))) == pytest.approx(0.375)
        # one full period starting at 1/2 covers the whole cell once
        assert quadrature(f, ((Fraction(1, 2),), (Fraction(3, 2),))) == pytest.approx(0.5)

    def test_domain_errors(self):
        f = GridFunction(unit(8), np.ones(8))
        with pytest.raises(DomainMismatch):
            quadrature(f, ((0,), (2,)))
        with pytest.raises(DomainMismatch):
            quadrature(f, ((Fraction(1, 3),), (1,)))


class TestExpBasis:
    def test_values(self):
        assert exp_basis([0], 1, np.array([0.3])) == pytest.approx(1.0)
        for N in (1, 2, 5):
            assert exp_basis([1], N, np.array([1 / (2 * N)])) == pytest.approx(-np.sqrt(N))

    @pytest.mark.parametrize("N,p", [(1, 0), (4, 1), (2, 1)])
    def test_orthonormal_on_subcube(self, N, p):
        g = Grid((Fraction(p, N),), (Fraction(p + 1, N),), 256)
        x = g.points()
        E = np.stack([exp_basis([a], N, x) for a in range(-8, 9)])
        gram = E @ E.conj().T * g.cell_volume
        np.testing.assert_allclose(gram, np.eye(17), atol=1e-10)


class TestFourier:
    def test_constant(self):
        F = PatchFunction(GridFunction(unit(), np.ones(256)), 1)
        c = fourier_coefficients(F, 0, 4)
        assert c[4] == pytest.approx(1.0)
        assert np.max(np.abs(np.delete(c, 4))) < 1e-12

    @pytest.mark.parametrize("N,p,beta", [(1, 0, 3), (2, 1, -2), (4, 2, 5)])
    def test_exponential(self, N, p, beta):
        F = PatchFunction.from_pieces([None] * p + [lambda x: exp_basis([beta], N, x)] + [None] * (N - p - 1), 1, N, 256)
        c = fourier_coefficients(F, p, 8)
        expect = np.zeros(17)
        expect[beta + 8] = 1
        np.testing.assert_allclose(c, expect, atol=1e-10)

    def test_parseval_improves_with_K(self):
        # smooth but not band-limited: a periodic Gaussian-like bump
        F = PatchFunction.from_callable(lambda x: np.exp(np.cos(2 * np.pi * x[:, 0]) + 1j * np.sin(4 * np.pi * x[:, 0])), 1, 1, 512)
        norm = F.norm_sq()
        gaps = [abs(norm - np.sum(np.abs(fourier_coefficients(F, 0, K)) ** 2)) for K in (2, 4, 8, 16, 32)]
        assert all(a >= b for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-4

    def test_negative_K(self):
        with pytest.raises(ValueError):
            fourier_coefficients(PatchFunction.zeros(1, 1, 16), 0, -1)


class TestPeriodic:
    @settings(max_examples=50)
    @given(st.integers(0, 1023), st.integers(-3, 3))
    def test_fold_bit_identical(self, i, n):
        f = GridFunction.from_callable(lambda x: np.sin(2 * np.pi * x[:, 0]) + 1j * x[:, 0] ** 2, unit(64), periodic=True)
        x = i / 1024
        assert f.evaluate([[x]])[0] == f.evaluate([[x + n]])[0]

    def test_nonperiodic_zero_outside(self):
        f = GridFunction(unit(8), np.ones(8))
        assert f.evaluate([[1.5]])[0] == 0


class TestPatch:
    def test_pieces_partition_norm(self, rng):
        F = random_patch(rng, 1, 4, 256)
        assert sum(p.norm_sq() for p in F.pieces()) == pytest.approx(F.norm_sq(), rel=1e-12)
        assert F.norm_sq() == pytest.approx(1.0, rel=1e-10)

    def test_regime(self):
        with pytest.raises(UnsupportedRegime):
            PatchFunction.zeros(2, 2, 16)

    def test_vectorize_m1(self, rng):
        F = random_patch(rng, 1, 1, 256)
        lat = SamplingLattice([[1]])
        v = vectorize_patch(F, 0, lat, 128)
        assert v.values.shape == (128, 1)
        np.testing.assert_allclose(v.values[:, 0], F.piece(0).evaluate(v.points, order=3))

    def test_vectorize_identity_function(self):
        F = PatchFunction.from_callable(lambda x: x[:, 0], 1, 1, 256)
        v = vectorize_patch(F, 0, SamplingLattice([[2]]), 128, order=1)
        x = v.points[:, 0]
        assert x.min() > 0 and x.max() < 0.5
        np.testing.assert_allclose(v.values, np.stack([x, x + 0.5], axis=1), atol=1e-12)

    @pytest.mark.parametrize("M,N", [([[1]], 1), ([[2]], 1), ([[3]], 2), ([[1, 1], [-1, 1]], 1)])
    def test_vectorize_norm_identity(self, M, N):
        lat = SamplingLattice(M, N)
        for seed in range(10):
            F = random_patch(np.random.default_rng(seed), lat.dim, N, 256 if lat.dim == 1 else 128)
            for p in range(N):
                v = vectorize_patch(F, p, lat, 128)
                assert v.norm_sq() == pytest.approx(F.piece(p).norm_sq(), rel=1e-6)

    @pytest.mark.parametrize("M,N", [([[2]], 1), ([[3]], 2), ([[1, 1], [-1, 1]], 1)])
    def test_assemble_inverts_vectorize(self, M, N):
        lat = SamplingLattice(M, N)
        R = 64
        F = random_patch(np.random.default_rng(1), lat.dim, N, R)
        p = N - 1
        piece = F.piece(p)

        def fn(x):
            return np.stack([piece.evaluate(x + s, order=3) for s in lat.shifts], axis=1)

        G = assemble_patch(fn, lat, p, R)
        np.testing.assert_allclose(G.piece(p).values, piece.values, atol=1e-6)


class TestSerialization:
    def test_csv_roundtrip(self, tmp_path, rng):
        g = Grid((Fraction(-1, 2), 0), (Fraction(1, 2), Fraction(1, 4)), 8)
        vals = rng.standard_normal(g.shape + (2,)) + 1j * rng.standard_normal(g.shape + (2,))
        f = GridFunction(g, vals, periodic=True)
        f.to_csv(tmp_path / "f.csv")
        h = GridFunction.from_csv(tmp_path / "f.csv")
        assert h.grid == g and h.periodic
        np.testing.assert_array_equal(h.values, f.values)

    def test_npz_roundtrip(self, tmp_path):
        f = GridFunction(unit(8), np.arange(8) + 1j)
        f.to_npz(tmp_path / "f.npz")
        np.testing.assert_array_equal(GridFunction.from_npz(tmp_path / "f.npz").values, f.values)

    def test_bad_header(self, tmp_path):
        (tmp_path / "bad.csv").write_text("nonsense\n")
        with pytest.raises(ParseError):
            GridFunction.from_csv(tmp_path / "bad.csv")
