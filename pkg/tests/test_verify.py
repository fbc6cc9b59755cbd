from fractions import Fraction

import numpy as np
import pytest

from sisampling.errors import MissingProvenance
from sisampling.gridfn import PatchFunction
from sisampling.lattice import SamplingLattice
from sisampling.sispace import CoefficientArray, synthesize
from sisampling.verify import (
    bessel_ratio,
    cell_partition_check,
    check_energy_identity,
    check_sampling_identity,
    dual_frame_residual,
    eigen_probe,
    equivalence_report,
    estimate_stability,
    null_probe,
    random_element,
    random_patch,
    sample_energy,
    stability_ratio,
    synthesis_from_patch,
    verify_scenario,
)

from conftest import golden_run


class TestRandomPatch:
    def test_unit_norm(self, rng):
        for d, N in ((1, 1), (1, 4), (2, 1)):
            F = random_patch(rng, d, N, 64)
            assert F.norm_sq() == pytest.approx(1, rel=1e-10)

    def test_reproducible(self):
        a = random_patch(np.random.default_rng(1), 1, 2, 64)
        b = random_patch(np.random.default_rng(1), 1, 2, 64)
        np.testing.assert_array_equal(a.piece(1).values, b.piece(1).values)


class TestIdentity:
    def test_zero(self):
        lat = SamplingLattice([[2]])
        chk = check_energy_identity(PatchFunction.zeros(1, 1, 64), 0, golden_run("oversampled").symbols, lat)
        assert (chk.lhs, chk.rhs, chk.rel_error) == (0, 0, 0)

    def test_quincunx(self, rng):
        run = golden_run("quincunx")
        for _ in range(3):
            F = random_patch(rng, 2, 1, 128)
            assert check_energy_identity(F, 0, run.symbols, run.lat).rel_error < 1e-4


class TestSamplingIdentity:
    @pytest.mark.parametrize("name", ["classical", "averaging", "quincunx", "vector"])
    def test_matches(self, name, rng):
        run = golden_run(name)
        F = random_patch(rng, run.lat.dim, run.lat.N, run.params["R"])
        f = synthesis_from_patch(run, F)
        for j in range(run.s):
            lhs, rhs, err = check_sampling_identity(f, j, 0, np.ones(run.lat.dim, dtype=int), run)
            assert err < 1e-6

    def test_two_generators(self, rng):
        run = golden_run("two_generators")
        f = synthesis_from_patch(run, random_patch(rng, 1, 2, run.params["R"]))
        for j in range(2):
            for p in range(2):
                assert check_sampling_identity(f, j, p, [-1], run)[2] < 1e-4

    def test_missing_provenance(self):
        run = golden_run("classical")
        f = synthesize(run.gens, CoefficientArray.delta(1, 1, 0, 0, (0,)))
        with pytest.raises(MissingProvenance):
            check_sampling_identity(f, 0, 0, [0], run)


class TestBessel:
    def test_classical_parseval(self, rng):
        """m = 1, g = 1: the sample energy equals the coefficient energy."""
        run = golden_run("classical")
        assert bessel_ratio(run, random_patch(rng, 1, 1, 256)) == pytest.approx(1, rel=1e-10)

    @pytest.mark.parametrize("name", ["averaging", "vector"])
    def test_bound_and_probe(self, name, rng):
        run = golden_run(name)
        bound = run.bounds.B_G / run.m
        for _ in range(5):
            assert bessel_ratio(run, random_patch(rng, 1, run.lat.N, 256)) <= bound * (1 + 1e-3)
        probe = max(bessel_ratio(run, eigen_probe(run, k)) for k in (10.0, 40.0, 160.0))
        assert 0.9 * bound <= probe <= bound * (1 + 1e-3)


class TestStability:
    def test_scaling_invariance(self, rng):
        run = golden_run("averaging")
        f = random_element(run, rng)
        assert stability_ratio(run, f * 7.5) == pytest.approx(stability_ratio(run, f), rel=1e-12)

    def test_zero(self):
        run = golden_run("classical")
        assert stability_ratio(run, synthesize(run.gens, CoefficientArray.zeros(1, 1, 2))) == 0

    def test_envelope(self):
        run = golden_run("averaging")
        st = estimate_stability(run, 12)
        assert st.ensemble_size == 12 and st.null_probe_ratio is None
        assert st.lower_envelope * 0.95 <= st.C1_est <= st.C2_est <= st.upper_envelope * 1.05

    def test_rank_deficient_null(self):
        run = golden_run("rank_deficient")
        st = estimate_stability(run, 10)
        assert st.null_probe_ratio < 1e-6 and st.C1_est < 1e-6

    def test_small_ensemble(self):
        with pytest.raises(ValueError):
            estimate_stability(golden_run("classical"), 5)

    def test_sample_energy_classical(self, rng):
        run = golden_run("classical")
        c = CoefficientArray.random(rng, 1, 1, 3)
        assert sample_energy(run, synthesize(run.gens, c)) == pytest.approx(c.norm_sq(), rel=1e-12)


class TestProbes:
    def test_null_probe_only_when_incomplete(self):
        assert null_probe(golden_run("averaging")) is None
        F = null_probe(golden_run("rank_deficient"))
        assert F is not None and F.norm_sq() > 0

    def test_dual_frame_identity(self, rng):
        run = golden_run("oversampled")
        assert dual_frame_residual(run, random_patch(rng, 1, 1, 256)) < 1e-3


class TestEquivalence:
    @pytest.mark.parametrize("name,expected", [("averaging", True), ("rank_deficient", False)])
    def test_agree(self, name, expected):
        run = golden_run(name)
        eq = equivalence_report(run, estimate_stability(run, 10))
        assert eq.agree
        assert eq.verdicts == [expected] * 4
        d = eq.as_dict()
        assert all(d["pairwise_agreement"].values()) and len(d["pairwise_agreement"]) == 6


class TestCells:
    @pytest.mark.parametrize("M,N", [([[1]], 1), ([[3]], 2), ([[1, 1], [-1, 1]], 1), ([[2, 1], [0, 3]], 1)])
    def test_partition(self, M, N):
        total, ok = cell_partition_check(SamplingLattice(M, N=N), 2000)
        assert total == Fraction(1, N ** len(M)) and ok


def test_verify_classical_report():
    rep = verify_scenario(golden_run("classical"))
    assert rep["passed"]
    names = [c["name"] for c in rep["checks"]]
    assert "reconstruction" in names and "null_direction_ratio" not in names
    assert rep["analysis"]["classification"]["verdict"] == "riesz"


def test_verify_rank_deficient_report():
    rep = verify_scenario(golden_run("rank_deficient"))
    assert rep["passed"]
    names = [c["name"] for c in rep["checks"]]
    assert "non_uniqueness_witness" in names and "reconstruction" not in names


@pytest.mark.parametrize("name", ["two_generators", "vector"])
def test_verify_extra_scenarios(name):
    rep = verify_scenario(golden_run(name))
    failed = [c["name"] for c in rep["checks"] if not c["passed"]]
    assert rep["passed"], failed
