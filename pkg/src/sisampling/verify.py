"""Independent numerical checks of the sampling identities, the stability
bounds and the equivalence of the four characterisations of a stable
filtering sampler.

Every check returns plain numbers; :func:`verify_scenario` collects them
into a JSON-ready report with one pass/fail entry per invariant.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import MissingProvenance, NotLeftInvertible
from .filters import apply_filter
from .gridfn import PatchFunction, assemble_patch, fourier_sum, subcube_grid, vectorize_patch
from .lattice import build_cells, check_regime
from .modulation import modulation_matrices, patch_functions
from .reconstruction import reconstruct, take_samples
from .sispace import CoefficientArray, SpaceElement, synthesis_operator_T, synthesize


# ---------------------------------------------------------------------------
# random inputs and probes


def random_patch(rng, d, N, R, bandwidth=3):
    """Unit-norm F whose pieces are trigonometric polynomials
    sum_{|alpha| <= bandwidth} a_alpha e_alpha; smooth and periodic on
    every subcube, so its Fourier data are exact on the grid."""
    check_regime(d, N)
    shape = (N,) + (2 * bandwidth + 1,) * d
    a = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    a /= np.linalg.norm(a)
    freqs = np.arange(-bandwidth, bandwidth + 1)
    pieces = []
    for p in range(N):
        grid = subcube_grid(p, d, N, R)
        # sum_alpha a_alpha N^{d/2} exp(-2 pi i N alpha.x) as a separable sum
        vals = N ** (d / 2) * fourier_sum(a[p], [freqs] * d, [N * ax for ax in grid.axes], sign=-1)
        pieces.append(vals)
    return PatchFunction.from_piece_values(pieces, d, N, R)


def _cell_params(x, lat):
    """Parameter coordinates u = N M^T x of cell points."""
    return lat.N * np.atleast_2d(x) @ lat.M_array


PROBE_SHARPNESS = (10.0, 40.0, 160.0)


def eigen_probe(run, kappa=10.0):
    """Patch function concentrated where lambda_max(G^* G) peaks.

    F is a periodic bump in the cell parameter around the argmax point,
    times the top eigenvector there, assembled on its subcube.
    """
    b = run.bounds
    p = int(np.argmax([l.max() for l in b.lam_max]))
    fld = run.fields[p]
    i = int(np.argmax(b.lam_max[p]))
    _, vecs = np.linalg.eigh(fld.gram()[i])
    v = vecs[:, -1]
    u0 = _cell_params(fld.points[i], run.lat)[0]

    def fn(x):
        u = _cell_params(x, run.lat)
        w = np.exp(kappa * np.sum(np.cos(2 * np.pi * (u - u0)) - 1, axis=1))
        return w[:, None] * v[None, :]

    return assemble_patch(fn, run.lat, p, run.params["R"])


def null_probe(run, q=2, rng=None):
    """Patch function with G_p(x) F_vec(x) = 0 pointwise, or None.

    Built at the subcube p whose field is most rank deficient as
    w(u) (I - G^dagger G) v0, with w = prod sin^{2q}(pi u_i) so that F is
    continuous across cell boundaries.
    """
    if run.completeness.complete:
        return None
    p = int(np.argmax(run.completeness.deficient_fraction))
    rng = run.rng("null-probe") if rng is None else rng
    v0 = rng.standard_normal(run.m) + 1j * rng.standard_normal(run.m)
    fns = patch_functions(run.symbols, p, run.lat.N, run.lat.dim)

    def fn(x):
        G = modulation_matrices(fns, run.lat, x)
        P = np.eye(run.m)[None] - np.linalg.pinv(G, rcond=1e-10) @ G
        u = _cell_params(x, run.lat)
        w = np.prod(np.sin(np.pi * u) ** (2 * q), axis=1)
        return w[:, None] * (P @ v0)

    return assemble_patch(fn, run.lat, p, run.params["R"])


# ---------------------------------------------------------------------------
# identities


def _inner_with_symbol(F, p, gvals, betas, N):
    """<F_p, conj(g) e_beta> = N^{d/2} int_{subcube p} F g exp(2 pi i N beta.x) for rows of ``betas``."""
    piece = F.piece(p)
    g = piece.grid
    h = piece.values.ravel() * gvals
    pts = g.points()
    phase = np.exp(2j * np.pi * N * pts @ np.atleast_2d(betas).T)
    return N ** (g.dim / 2) * g.cell_volume * (h @ phase)


def _lattice_coefficients(hvals, grid, lat, K):
    """c_{h, M alpha} for |alpha|_inf <= K, flattened in C order."""
    d, N = lat.dim, lat.N
    B = int(np.max(np.sum(np.abs(lat.M_array), axis=1))) * K
    rng = np.arange(-B, B + 1)
    full = N ** (d / 2) * grid.cell_volume * fourier_sum(
        hvals.reshape(grid.shape), grid.axes, [N * rng] * d, sign=1
    )
    alphas = np.array(np.meshgrid(*([np.arange(-K, K + 1)] * d), indexing="ij")).reshape(d, -1).T
    betas = alphas @ np.array(lat.M, dtype=np.int64).T
    return full[tuple((betas + B).T)], alphas


@dataclass
class IdentityCheck:
    lhs: float
    rhs: float
    rel_error: float


def check_energy_identity(F, p, source, lat, K=32, cell_resolution=128):
    """Both sides of the energy identity for piece p of ``F``.

    lhs = sum_j sum_{|alpha| <= K} |<F, conj(g_j) chi_p e_alpha(M^T .)>|^2,
    each inner product by midpoint quadrature over the subcube;
    rhs = (1/m) ||G_p F_vec||^2 over the lattice cell, with F_vec from
    :func:`vectorize_patch`.
    """
    check_regime(lat.dim, lat.N)
    fns = patch_functions(source, p, lat.N, lat.dim)
    piece = F.piece(p)
    pts = piece.grid.points()
    lhs = 0.0
    for fn in fns:
        h = piece.values.ravel() * fn(pts)
        c, _ = _lattice_coefficients(h, piece.grid, lat, K)
        lhs += float(np.sum(np.abs(c) ** 2))
    vec = vectorize_patch(F, p, lat, cell_resolution)
    G = modulation_matrices(fns, lat, vec.points)
    rhs = float(np.sum(np.abs(np.einsum("nsm,nm->ns", G, vec.values)) ** 2)) * vec.weight / lat.m
    scale = max(abs(lhs), abs(rhs))
    rel = 0.0 if scale == 0 else abs(lhs - rhs) / abs(rhs if rhs else lhs)
    return IdentityCheck(lhs, rhs, rel)


def check_sampling_identity(f, j, p, beta, run):
    """(L_j f^{(p)})(M beta) against <F_p, conj(g_{j,p}) e_beta(M^T .)>.

    Raises
    ------
    MissingProvenance
        If ``f`` does not carry the patch function it was synthesized from.
    """
    if getattr(f, "source", None) is None:
        raise MissingProvenance("f has no source patch function; synthesize it with synthesis_operator_T")
    beta = np.atleast_1d(np.asarray(beta, dtype=int))
    t = run.lat.M_array @ beta
    lhs = apply_filter(run.bank, j, f.part(p), t, run.params["filter_resolution"])
    F = f.source
    pts = F.piece(p).grid.points()
    gvals = run.symbols.evaluate(j, p, pts)
    rhs = complex(_inner_with_symbol(F, p, gvals, (run.lat.M_array @ beta)[None, :], run.lat.N)[0])
    return lhs, rhs, abs(lhs - rhs)


def dual_frame_residual(run, F, duals=None):
    """||F - m sum_{j,p,alpha} <F, conj(g_{j,p}) e_alpha(M^T .)> d_j^p e_alpha(M^T .)|| / ||F||."""
    lat, K = run.lat, run.params["K"]
    d, N = lat.dim, lat.N
    duals = run.duals() if duals is None else duals
    err = 0.0
    for p in range(N):
        piece = F.piece(p)
        grid = piece.grid
        pts = grid.points()
        approx = np.zeros(len(pts), dtype=complex)
        for j in range(run.s):
            h = piece.values.ravel() * run.symbols.evaluate(j, p, pts)
            c, alphas = _lattice_coefficients(h, grid, lat, K)
            betas = alphas @ np.array(lat.M, dtype=np.int64).T
            B = np.abs(betas).max()
            dense = np.zeros((2 * B + 1,) * d, dtype=complex)
            dense[tuple((betas + B).T)] = c
            series = N ** (d / 2) * fourier_sum(
                dense, [np.arange(-B, B + 1)] * d, [N * ax for ax in grid.axes], sign=-1
            )
            approx += lat.m * duals[p].rows[:, j] * series.ravel()
        err += float(np.sum(np.abs(piece.values.ravel() - approx) ** 2)) * grid.cell_volume
    norm = F.norm_sq()
    return float(np.sqrt(err / norm)) if norm > 0 else float(np.sqrt(err))


# ---------------------------------------------------------------------------
# energies


def sample_energy(run, f):
    return take_samples(f, run.bank, run.lat, run.params["K_samp"], run.params["filter_resolution"]).energy()


def synthesis_from_patch(run, F):
    return synthesis_operator_T(run.gens, F, run.params["K"], run.params["space_resolution"])


def bessel_ratio(run, F):
    """Sample energy of T_phi F over the energy of the F it synthesizes.

    T_phi keeps the subcube Fourier coefficients with |alpha| <= K, so the
    denominator is their energy sum |c|^2, the squared norm of the
    truncated F (equal to ||F||^2 for band-limited F).
    """
    f = synthesis_from_patch(run, F)
    return sample_energy(run, f) / f.coeffs.norm_sq()


def stability_ratio(run, f):
    """Sample energy of f over ||f||^2 (0 for f = 0)."""
    n = f.norm_sq()
    return sample_energy(run, f) / n if n > 0 else 0.0


def random_element(run, rng):
    p = run.params
    c = CoefficientArray.random(rng, run.gens.N, run.gens.d, p["K_coeff"])
    return synthesize(run.gens, c, resolution=p["space_resolution"])


@dataclass
class StabilityReport:
    C1_est: float
    C2_est: float
    ensemble_size: int
    lower_envelope: float  # (A_G/m) / B_hi
    upper_envelope: float  # (B_G/m) / A_lo
    null_probe_ratio: float = None

    def as_dict(self):
        return {
            "C1_est": self.C1_est,
            "C2_est": self.C2_est,
            "ensemble_size": self.ensemble_size,
            "lower_envelope": self.lower_envelope,
            "upper_envelope": self.upper_envelope,
            "null_probe_ratio": self.null_probe_ratio,
        }


def estimate_stability(run, ensemble_size=None):
    """Empirical C_1, C_2 of sample energy over ||f||^2.

    Random unit-norm coefficient arrays are synthesized and sampled;
    when the system is not complete the null-direction probe joins the
    ensemble, since random draws miss thin null directions.
    """
    n = run.sc.ensembles["stability"] if ensemble_size is None else ensemble_size
    if n < 10:
        raise ValueError("stability ensemble needs at least 10 members")
    ratios = [stability_ratio(run, random_element(run, run.rng("stability", i))) for i in range(n)]
    null_ratio = None
    F = null_probe(run)
    if F is not None:
        null_ratio = stability_ratio(run, synthesis_from_patch(run, F))
        ratios.append(null_ratio)
    rz = run.riesz
    b = run.bounds
    return StabilityReport(
        C1_est=float(min(ratios)),
        C2_est=float(max(ratios)),
        ensemble_size=len(ratios),
        lower_envelope=(b.A_G / run.m) / rz.B_hi,
        upper_envelope=(b.B_G / run.m) / rz.A_lo,
        null_probe_ratio=null_ratio,
    )


# ---------------------------------------------------------------------------
# reconstruction


def working_box(f, pad=2):
    box = f.support_box()
    if box is None:
        return np.zeros(f.d, dtype=int) - pad, np.ones(f.d, dtype=int) + pad
    return box[0] - pad, box[1] + pad


def reconstruction_error(run, f, kernels):
    """Relative L^2 error of the reconstruction of f on its padded support
    box; the absolute error when f = 0."""
    samples = take_samples(f, run.bank, run.lat, run.params["K_samp"], run.params["filter_resolution"])
    fhat = reconstruct(samples, kernels, run.lat)
    box = working_box(f)
    res = run.params["space_resolution"]
    diff = SpaceElement(run.gens, fhat.coeffs + f.coeffs * (-1), resolution=res, box=box).norm_sq()
    ref = SpaceElement(run.gens, f.coeffs, resolution=res, box=box).norm_sq()
    return float(np.sqrt(diff / ref)) if ref > 0 else float(np.sqrt(diff))


def reconstruction_errors(run, n=None, force=False):
    n = run.sc.ensembles["reconstruct"] if n is None else n
    kernels = run.kernels(force)
    return [reconstruction_error(run, random_element(run, run.rng("reconstruct", i)), kernels) for i in range(n)]


# ---------------------------------------------------------------------------
# equivalence of the four characterisations


@dataclass
class EquivalenceReport:
    a_positive_lower_bound: bool
    b_stable_sampler: bool
    c_bounded_dual: bool
    d_reconstructs: bool
    details: dict = field(default_factory=dict)

    @property
    def verdicts(self):
        return [self.a_positive_lower_bound, self.b_stable_sampler, self.c_bounded_dual, self.d_reconstructs]

    @property
    def agree(self):
        return len(set(self.verdicts)) == 1

    def as_dict(self):
        v = self.verdicts
        return {
            "a_positive_lower_bound": v[0],
            "b_stable_sampler": v[1],
            "c_bounded_dual": v[2],
            "d_reconstructs": v[3],
            "pairwise_agreement": {f"{x}{y}": v[i] == v[k] for i, x in enumerate("abcd") for k, y in enumerate("abcd") if i < k},
            "agree": self.agree,
            "details": self.details,
        }


def equivalence_report(run, stability=None):
    tol = run.tol
    a = run.bounds.A_G > tol["stable_floor"]
    stability = estimate_stability(run) if stability is None else stability
    b = stability.C1_est > tol["stable_floor"]
    try:
        duals = run.duals()
        max_mod = max(du.max_modulus for du in duals)
        c = bool(np.isfinite(max_mod) and max_mod < tol["blowup_cap"])
    except NotLeftInvertible:
        max_mod, c = None, False
    errors = reconstruction_errors(run, force=not c)
    F = null_probe(run)
    witness = None
    if F is not None:
        witness = reconstruction_error(run, synthesis_from_patch(run, F), run.kernels(force=not c))
        errors.append(witness)
    d = max(errors) <= tol["tol_reconstruct"]
    return EquivalenceReport(
        a, b, c, d,
        details={
            "A_G": run.bounds.A_G,
            "C1_est": stability.C1_est,
            "dual_max_modulus": max_mod,
            "max_reconstruction_error": max(errors),
            "witness_error": witness,
        },
    )


# ---------------------------------------------------------------------------
# the full report


def _check(name, value, threshold, passed, **extra):
    out = {"name": name, "value": value, "threshold": threshold, "passed": bool(passed)}
    out.update(extra)
    return out


def cell_partition_check(lat, n_points=10_000, rng=None):
    """Exact volume sum of the cells and a Monte-Carlo tiling test.

    Random points of [0, 1/N)^d must lie in exactly one translate
    Q_k + n/N, n in Z^d, of exactly one cell.
    """
    cells = build_cells(lat)
    total = sum((c.volume for c in cells), Fraction(0))
    rng = np.random.default_rng(0) if rng is None else rng
    pts = rng.random((n_points, lat.dim)) / lat.N
    B = lat.m + 1
    hits = np.zeros(n_points, dtype=int)
    for n in np.array(np.meshgrid(*([np.arange(-B, B + 1)] * lat.dim), indexing="ij")).reshape(lat.dim, -1).T:
        for c in cells:
            hits += c.contains(pts - n / lat.N)
    return total, bool(np.all(hits == 1))


def verify_scenario(run):
    """Run every oracle of a scenario; returns the JSON-ready report."""
    sc, tol, lat = run.sc, run.tol, run.lat
    ens = sc.ensembles
    checks = []
    cl = run.classification
    b = run.bounds

    total, disjoint = cell_partition_check(lat, rng=run.rng("cells"))
    checks.append(_check("cell_partition", str(total), f"1/{lat.N ** lat.dim}",
                         total == Fraction(1, lat.N ** lat.dim) and disjoint))

    checks.append(_check("refinement", b.refined["relative_change"], tol["refinement_tol"], b.refined["accepted"]))

    rel = []
    for i in range(ens["identity"]):
        F = random_patch(run.rng("identity", i), lat.dim, lat.N, sc.params["R"], sc.params["patch_bandwidth"])
        rel += [check_energy_identity(F, p, run.symbols, lat, sc.params["K"], sc.params["cell_resolution"]).rel_error
                for p in range(lat.N)]
    checks.append(_check("identity_energy", max(rel), tol["tol_identity"], max(rel) <= tol["tol_identity"]))

    err = []
    for i in range(ens["sampling"]):
        rng = run.rng("sampling", i)
        F = random_patch(rng, lat.dim, lat.N, sc.params["R"], sc.params["patch_bandwidth"])
        f = synthesis_from_patch(run, F)
        j, p = int(rng.integers(run.s)), int(rng.integers(lat.N))
        beta = rng.integers(-3, 4, size=lat.dim)
        err.append(check_sampling_identity(f, j, p, beta, run)[2])
    checks.append(_check("sampling_identity", max(err), tol["tol_sampling"], max(err) <= tol["tol_sampling"]))

    rz = run.riesz
    ratios = []
    for i in range(ens["sandwich"]):
        F = random_patch(run.rng("sandwich", i), lat.dim, lat.N, sc.params["R"], sc.params["patch_bandwidth"])
        ratios.append(synthesis_from_patch(run, F).norm_sq() / F.norm_sq())
    slack = tol["sandwich_slack"]
    checks.append(_check("riesz_sandwich", [min(ratios), max(ratios)], [rz.A_lo, rz.B_hi],
                         rz.A_lo * (1 - slack) <= min(ratios) and max(ratios) <= rz.B_hi * (1 + slack)))

    bessel = []
    for i in range(ens["bessel"]):
        F = random_patch(run.rng("bessel", i), lat.dim, lat.N, sc.params["R"], sc.params["patch_bandwidth"])
        bessel.append(bessel_ratio(run, F))
    bound = b.B_G / run.m
    checks.append(_check("bessel_bound", max(bessel), bound, max(bessel) <= bound * (1 + tol["bessel_slack"])))
    probe = max(bessel_ratio(run, eigen_probe(run, kappa)) for kappa in PROBE_SHARPNESS)
    checks.append(_check("bessel_tightness", probe, tol["probe_fraction"] * bound,
                         probe >= tol["probe_fraction"] * bound))

    stab = estimate_stability(run)
    checks.append(_check("stability_envelope", [stab.C1_est, stab.C2_est],
                         [stab.lower_envelope, stab.upper_envelope],
                         stab.C1_est >= stab.lower_envelope * (1 - tol["envelope_slack"])
                         and stab.C2_est <= stab.upper_envelope * (1 + tol["envelope_slack"])))

    if cl.frame:
        res = max(du.residual for du in run.cell_duals() + run.duals())
        checks.append(_check("dual_residual", res, tol["tol_dual"], res <= tol["tol_dual"]))
        dres = [dual_frame_residual(run, random_patch(run.rng("dual", i), lat.dim, lat.N, sc.params["R"],
                                                      sc.params["patch_bandwidth"]))
                for i in range(ens["dual_identity"])]
        checks.append(_check("dual_frame_identity", max(dres), tol["tol_reconstruct"],
                             max(dres) <= tol["tol_reconstruct"]))
        errs = reconstruction_errors(run)
        checks.append(_check("reconstruction", max(errs), tol["tol_reconstruct"], max(errs) <= tol["tol_reconstruct"]))
    else:
        F = null_probe(run)
        if F is not None:
            f = synthesis_from_patch(run, F)
            ratio = stability_ratio(run, f)
            checks.append(_check("null_direction_ratio", ratio, tol["null_ratio"], ratio <= tol["null_ratio"]))
            werr = reconstruction_error(run, f, run.kernels(force=True))
            checks.append(_check("non_uniqueness_witness", werr, tol["witness_error"], werr > tol["witness_error"]))

    eq = equivalence_report(run, stab)
    checks.append(_check("equivalence_agreement", eq.verdicts, "all equal", eq.agree))

    return {
        "scenario": sc.name,
        "seed": sc.seed,
        "analysis": analysis_block(run),
        "stability": stab.as_dict(),
        "equivalence": eq.as_dict(),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def analysis_block(run):
    return {
        "d": run.lat.dim,
        "N": run.lat.N,
        "m": run.m,
        "s": run.s,
        "r": run.gens.r,
        "gammas": [list(g) for g in run.lat.gammas],
        "bounds": run.bounds.as_dict(),
        "completeness": {
            "per_p": run.completeness.per_p,
            "deficient_fraction": run.completeness.deficient_fraction,
        },
        "classification": run.classification.as_dict(),
        "symbols": run.symbols.as_dict(),
    }
