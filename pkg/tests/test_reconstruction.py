import numpy as np
import pytest

from sisampling.errors import MissingProvenance, NotLeftInvertible, ParseError, ShapeMismatch
from sisampling.lattice import SamplingLattice
from sisampling.modulation import ModulationField, build_subcube_field
from sisampling.reconstruction import (
    DualField,
    SampleSet,
    build_kernels,
    dual_rows,
    pseudo_inverse_field,
    reconstruct,
    take_samples,
)
from sisampling.sispace import CoefficientArray, GeneratorSet, synthesize
from sisampling.verify import random_element, reconstruction_error

from conftest import golden_run


def field_of(*mats):
    mats = np.array(mats, dtype=complex)
    return ModulationField(0, np.zeros((len(mats), 1)), mats, (len(mats),), 1.0 / len(mats))


class TestPseudoInverse:
    def test_scalar_one(self):
        np.testing.assert_allclose(pseudo_inverse_field(field_of([[1]])), [[[1]]])

    def test_column(self):
        np.testing.assert_allclose(pseudo_inverse_field(field_of([[1], [1]])), [[[0.5, 0.5]]])

    def test_orthogonal_columns(self):
        G = np.array([[1, 1], [1, -1]], dtype=complex)
        np.testing.assert_allclose(pseudo_inverse_field(field_of(G))[0], G.conj().T / 2, atol=1e-15)

    def test_left_inverse(self, rng):
        G = rng.standard_normal((20, 3, 2)) + 1j * rng.standard_normal((20, 3, 2))
        P = pseudo_inverse_field(field_of(*G))
        np.testing.assert_allclose(P @ G, np.broadcast_to(np.eye(2), (20, 2, 2)), atol=1e-12)

    def test_rank_deficient(self):
        fld = field_of([[1, 1]])
        with pytest.raises(NotLeftInvertible):
            pseudo_inverse_field(fld)
        P = pseudo_inverse_field(fld, force=True)
        np.testing.assert_allclose(P[0], [[0.5], [0.5]])


class TestDuals:
    def test_phase(self):
        lat = SamplingLattice([[1]])
        fld = build_subcube_field([lambda x: np.exp(2j * np.pi * x[:, 0])], lat, 0, 64)
        du = dual_rows(fld)
        np.testing.assert_allclose(du.rows[:, 0], np.exp(-2j * np.pi * fld.points[:, 0]), atol=1e-14)
        assert du.residual < 1e-14

    def test_reciprocal(self):
        lat = SamplingLattice([[1]])
        g = lambda x: (0.75 + 0.25 * np.cos(2 * np.pi * x[:, 0])).astype(complex)
        fld = build_subcube_field([g], lat, 0, 64)  # x = 1/2 is not a midpoint at even resolution
        du = dual_rows(fld)
        np.testing.assert_allclose(du.rows[:, 0], 1 / g(fld.points), atol=1e-14)
        assert du.max_modulus == pytest.approx(2, rel=1e-2)

    def test_golden_residuals(self):
        for name in ("classical", "oversampled", "averaging", "quincunx", "two_generators", "vector"):
            run = golden_run(name)
            assert max(d.residual for d in run.duals()) < 1e-8

    def test_rank_deficient_golden(self):
        with pytest.raises(NotLeftInvertible):
            golden_run("rank_deficient").duals()


class TestKernels:
    def test_classical_is_hat(self):
        c = golden_run("classical").kernels()[(0, 0)].coeffs
        vals = c.values[0]
        i0 = -c.offset[0]
        assert vals[i0] == pytest.approx(1, abs=1e-10)
        assert np.max(np.abs(np.delete(vals, i0))) < 1e-10

    def _kernel_from_rows(self, rows, R=64):
        gens = GeneratorSet.named(["hat"], 1)
        lat = SamplingLattice([[1]])
        x = (np.arange(R) + 0.5) / R
        du = DualField(0, x[:, None], rows(x)[:, None], (R,), 0.0, 1.0)
        return build_kernels([du], gens, lat, 4, R)[(0, 0)].coeffs

    def test_phase_shift(self):
        c = self._kernel_from_rows(lambda x: np.exp(2j * np.pi * x))
        vals = c.values[0]
        assert vals[-1 - c.offset[0]] == pytest.approx(1, abs=1e-12)
        assert np.sum(np.abs(vals) > 1e-12) == 1

    def test_zero_dual(self):
        c = self._kernel_from_rows(lambda x: np.zeros_like(x, dtype=complex))
        assert not np.any(c.values)

    def test_shape_mismatch(self):
        gens = GeneratorSet.named(["hat"], 1)
        du = DualField(0, np.zeros((10, 1)), np.ones((10, 1)), (10,), 0.0, 1.0)
        with pytest.raises(ShapeMismatch):
            build_kernels([du], gens, SamplingLattice([[1]]), 4, 64)


class TestSamples:
    def test_hat_at_integers(self):
        run = golden_run("classical")
        f = synthesize(run.gens, CoefficientArray.delta(1, 1, 0, 0, (0,)))
        samples = take_samples(f, run.bank, run.lat)
        d = samples.as_dict()
        assert d[(0, 0, 0)] == pytest.approx(1)
        assert all(abs(v) < 1e-14 for k, v in d.items() if k != (0, 0, 0))
        assert not samples.truncated

    def test_oversampled_offsets(self):
        run = golden_run("oversampled")
        f = synthesize(run.gens, CoefficientArray.delta(1, 1, 2, 0, (1,)))
        d = take_samples(f, run.bank, run.lat).as_dict()
        # hat centred at 1 sampled at 2 alpha and at 2 alpha + 1
        assert abs(d.get((0, 0, 0), 0)) < 1e-14
        assert d[(1, 0, 0)] == pytest.approx(1)

    def test_truncation_flag(self):
        run = golden_run("classical")
        f = synthesize(run.gens, CoefficientArray.delta(1, 1, 3, 0, (3,)))
        assert take_samples(f, run.bank, run.lat, K_samp=1).truncated

    def test_zero(self):
        run = golden_run("classical")
        s = take_samples(synthesize(run.gens, CoefficientArray.zeros(1, 1, 2)), run.bank, run.lat)
        assert len(s.values) == 0 and s.energy() == 0

    def test_missing_provenance(self):
        run = golden_run("classical")
        f = synthesize(run.gens, CoefficientArray.delta(1, 1, 0, 0, (0,)))
        with pytest.raises(MissingProvenance):
            take_samples(f.tabulate(), run.bank, run.lat)

    def test_csv_roundtrip(self, tmp_path, rng):
        idx = np.column_stack([rng.integers(0, 2, 7), np.zeros(7, int), rng.integers(-5, 5, (7, 2))])
        s = SampleSet(idx, rng.standard_normal(7) + 1j * rng.standard_normal(7), 2)
        s.to_csv(tmp_path / "s.csv")
        t = SampleSet.from_csv(tmp_path / "s.csv")
        np.testing.assert_array_equal(t.index, s.index)
        np.testing.assert_array_equal(t.values, s.values)

    def test_csv_errors(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("j,p,alpha0,re,im\n")
        with pytest.raises(ParseError):
            SampleSet.from_csv(bad)
        bad.write_text("# sisampling-samples v1\nj,p,alpha0,re,im\n0,0,1,2.0\n")
        with pytest.raises(ParseError, match="line 3"):
            SampleSet.from_csv(bad)


class TestReconstruct:
    @pytest.mark.parametrize("name", ["classical", "oversampled", "averaging", "quincunx", "two_generators", "vector"])
    def test_exact(self, name):
        run = golden_run(name)
        f = random_element(run, np.random.default_rng(5))
        assert reconstruction_error(run, f, run.kernels()) < 1e-6

    def test_classical_coefficients(self, rng):
        run = golden_run("classical")
        c = CoefficientArray.random(rng, 1, 1, 4)
        f = synthesize(run.gens, c)
        fhat = reconstruct(take_samples(f, run.bank, run.lat), run.kernels(), run.lat)
        diff = fhat.coeffs + c * (-1)
        assert np.max(np.abs(diff.values)) < 1e-10

    def test_translation_covariance(self, rng):
        run = golden_run("oversampled")
        f = random_element(run, rng)
        beta = np.array([3])
        a = reconstruct(take_samples(f, run.bank, run.lat), run.kernels(), run.lat).shifted(run.lat.M_array @ beta)
        b = reconstruct(take_samples(f.shifted(run.lat.M_array @ beta), run.bank, run.lat), run.kernels(), run.lat)
        diff = a.coeffs + b.coeffs * (-1)
        assert np.max(np.abs(diff.values)) < 1e-12

    def test_linearity(self, rng):
        run = golden_run("averaging")
        f, g = random_element(run, rng), random_element(run, rng)
        rec = lambda h: reconstruct(take_samples(h, run.bank, run.lat), run.kernels(), run.lat).coeffs
        lhs = rec(f + g * 2.0)
        rhs = rec(f) + rec(g) * 2.0
        assert np.max(np.abs((lhs + rhs * (-1)).values)) < 1e-12

    def test_missing_kernel(self):
        run = golden_run("classical")
        s = SampleSet(np.array([[1, 0, 0]]), np.array([1.0 + 0j]), 1)
        with pytest.raises(ShapeMismatch):
            reconstruct(s, run.kernels(), run.lat)

    def test_dimension_mismatch(self):
        run = golden_run("classical")
        s = SampleSet(np.array([[0, 0, 0, 0]]), np.array([1.0 + 0j]), 2)
        with pytest.raises(ShapeMismatch):
            reconstruct(s, run.kernels(), run.lat)

    def test_forced_rank_deficient_fails(self):
        run = golden_run("rank_deficient")
        errs = [reconstruction_error(run, random_element(run, np.random.default_rng(i)), run.kernels(force=True))
                for i in range(3)]
        assert max(errs) > 0.1
