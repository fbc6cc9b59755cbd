"""Modulation matrices G_p(x), their spectral bounds, and the
completeness / Bessel / frame / Riesz classification they imply.

Entry (j, k) of G_p(x) is the Z^d/N-periodic extension of g_j chi_p
evaluated at x + M^{-T} gamma_k / N; the columns follow the lattice's
coset order.
"""

from dataclasses import dataclass, field

import numpy as np

from .filters import SymbolTable
from .gridfn import GridFunction, PatchFunction, subcube_grid
from .lattice import check_regime


@dataclass
class ModulationField:
    p: int
    points: np.ndarray  # (n, d)
    matrices: np.ndarray  # (n, s, m)
    shape: tuple
    weight: float

    @property
    def s(self):
        return self.matrices.shape[1]

    @property
    def m(self):
        return self.matrices.shape[2]

    def gram(self):
        G = self.matrices
        return np.conj(np.swapaxes(G, 1, 2)) @ G


def _fold_into_subcube(x, p, N, d):
    lo = np.full(d, p / N) if d == 1 else np.zeros(d)
    return lo + np.mod(x - lo, 1.0 / N)


def patch_functions(source, p, N, d):
    """The s callables x -> (g_j chi_p)(x) extended Z^d/N-periodically.

    ``source`` is a :class:`SymbolTable` (filter symbols g_{j,p}) or a
    list of user functions g_j on [0,1]^d, each a PatchFunction, a
    GridFunction on the unit cube, or a callable.
    """
    if isinstance(source, SymbolTable):
        return [source.function(j, p) for j in range(source.s)]
    fns = []
    for g in source:
        if isinstance(g, GridFunction):
            g = PatchFunction(g, N)
        if isinstance(g, PatchFunction):
            fns.append(lambda x, piece=g.piece(p): piece.evaluate(x))
        else:
            fns.append(lambda x, g=g: np.asarray(g(_fold_into_subcube(np.atleast_2d(x), p, N, d)), dtype=complex))
    return fns


def modulation_matrices(fns, lat, points):
    """Stack g_j(x + shift_k) into an (n, s, m) array."""
    points = np.atleast_2d(points)
    out = np.empty((len(points), len(fns), lat.m), dtype=complex)
    for k, shift in enumerate(lat.shifts):
        xs = points + shift
        for j, fn in enumerate(fns):
            out[:, j, k] = fn(xs)
    return out


def build_modulation_field(source, lat, p, cell_resolution=128):
    """G_p(x) on the midpoint grid of the cell M^{-T}[0,1)^d / N."""
    check_regime(lat.dim, lat.N)
    points, shape, weight = lat.cell_grid(cell_resolution)
    fns = patch_functions(source, p, lat.N, lat.dim)
    return ModulationField(p, points, modulation_matrices(fns, lat, points), shape, weight)


def build_subcube_field(source, lat, p, resolution):
    """G_p(x) on the midpoint grid of subcube p (used for the duals)."""
    check_regime(lat.dim, lat.N)
    grid = subcube_grid(p, lat.dim, lat.N, resolution)
    points = grid.points()
    fns = patch_functions(source, p, lat.N, lat.dim)
    return ModulationField(p, points, modulation_matrices(fns, lat, points), grid.shape, grid.cell_volume)


@dataclass
class SpectralBounds:
    A_G: float
    B_G: float
    lam_min: list  # per p: (n,) array of lambda_min[G_p^* G_p]
    lam_max: list
    argmin: list  # per p: point of the smallest lambda_min
    argmax: list
    refined: dict = field(default_factory=dict)

    def as_dict(self):
        per_p = [
            {
                "p": p,
                "ess_inf_lambda_min": float(lmin.min()),
                "ess_sup_lambda_max": float(lmax.max()),
                "argmin": [float(v) for v in amin],
                "argmax": [float(v) for v in amax],
            }
            for p, (lmin, lmax, amin, amax) in enumerate(zip(self.lam_min, self.lam_max, self.argmin, self.argmax))
        ]
        out = {"A_G": self.A_G, "B_G": self.B_G, "per_p": per_p}
        if self.refined:
            out["refinement"] = self.refined
        return out


def spectral_bounds(fields):
    """A_G / B_G as grid extrema of the eigenvalues of G_p^* G_p over all p."""
    if isinstance(fields, ModulationField):
        fields = [fields]
    lam_min, lam_max, argmin, argmax = [], [], [], []
    for fld in fields:
        ev = np.linalg.eigvalsh(fld.gram())
        lam_min.append(np.clip(ev[:, 0], 0.0, None))
        lam_max.append(ev[:, -1])
        argmin.append(fld.points[np.argmin(ev[:, 0])])
        argmax.append(fld.points[np.argmax(ev[:, -1])])
    A_G = float(min(l.min() for l in lam_min))
    B_G = float(max(l.max() for l in lam_max))
    return SpectralBounds(A_G, B_G, lam_min, lam_max, argmin, argmax)


def refined_spectral_bounds(source, lat, cell_resolution=128, rel_tol=0.01):
    """Bounds at ``cell_resolution`` plus a doubling check.

    The relative change of A_G and B_G between the two resolutions is
    recorded in ``refined``; ``accepted`` is true below ``rel_tol``.
    """
    fields = [build_modulation_field(source, lat, p, cell_resolution) for p in range(lat.N)]
    fine = [build_modulation_field(source, lat, p, 2 * cell_resolution) for p in range(lat.N)]
    b, bf = spectral_bounds(fields), spectral_bounds(fine)

    def rel(a, c):
        scale = max(abs(a), abs(c))
        return 0.0 if scale < 1e-12 else abs(a - c) / scale

    change = max(rel(b.A_G, bf.A_G), rel(b.B_G, bf.B_G))
    b.refined = {
        "resolution": cell_resolution,
        "A_G_fine": bf.A_G,
        "B_G_fine": bf.B_G,
        "relative_change": change,
        "accepted": change < rel_tol,
    }
    return fields, b


@dataclass
class Completeness:
    per_p: list
    deficient_fraction: list
    complete: bool


def completeness_test(fields, rank_tol=1e-8, budget=0.0):
    """Rank-m test of G_p(x): sigma_min > rank_tol * sigma_max.

    A patch passes when the fraction of deficient grid points is at most
    ``budget`` (0 means every point must pass).
    """
    if isinstance(fields, ModulationField):
        fields = [fields]
    per_p, frac = [], []
    for fld in fields:
        if fld.s < fld.m:
            bad = np.ones(len(fld.points), dtype=bool)
        else:
            sv = np.linalg.svd(fld.matrices, compute_uv=False)
            bad = ~(sv[:, -1] > rank_tol * sv[:, 0])
        frac.append(float(bad.mean()))
        per_p.append(bool(bad.mean() <= budget))
    return Completeness(per_p, frac, all(per_p))


@dataclass
class SystemClassification:
    complete: bool
    bessel: bool
    bessel_bound: float
    frame: bool
    frame_bounds: tuple
    riesz: bool

    @property
    def verdict(self):
        if self.riesz:
            return "riesz"
        if self.frame:
            return "frame"
        if not self.complete:
            return "not complete"
        return "bessel" if self.bessel else "unbounded"

    def as_dict(self):
        return {
            "complete": self.complete,
            "bessel": self.bessel,
            "bessel_bound": self.bessel_bound,
            "frame": self.frame,
            "frame_bounds": list(self.frame_bounds) if self.frame else None,
            "riesz": self.riesz,
            "verdict": self.verdict,
        }


def classify(bounds, s, m, completeness, blowup_cap=1e12, frame_floor=1e-8):
    """Verdicts for the system {conj(g_j) chi_p e_alpha(M^T .)}.

    Bessel with optimal bound B_G/m when B_G is below ``blowup_cap``;
    a frame with bounds (A_G/m, B_G/m) when additionally A_G exceeds
    ``frame_floor``; a Riesz basis when it is a frame and s = m.
    """
    complete = completeness.complete if isinstance(completeness, Completeness) else bool(completeness)
    bessel = bounds.B_G < blowup_cap
    frame = bessel and complete and bounds.A_G > frame_floor
    return SystemClassification(
        complete=complete,
        bessel=bessel,
        bessel_bound=bounds.B_G / m if bessel else float("inf"),
        frame=frame,
        frame_bounds=(bounds.A_G / m, bounds.B_G / m),
        riesz=frame and s == m,
    )
