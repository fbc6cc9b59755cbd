"""Dual rows, reconstruction kernels, lattice sampling and the expansion

    f = m sum_j sum_p sum_alpha (L_j f^{(p)})(M alpha) S_j^p(. - M alpha).
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve

from .errors import MissingProvenance, NotLeftInvertible, ParseError, ShapeMismatch
from .filters import apply_filter_many
from .gridfn import PatchFunction, subcube_grid
from .lattice import check_regime
from .modulation import ModulationField, build_subcube_field
from .sispace import CoefficientArray, SpaceElement, synthesis_operator_T

SAMPLES_TAG = "sisampling-samples v1"


# ---------------------------------------------------------------------------
# pseudo-inverse and dual rows


def pseudo_inverse_field(field, pinv_floor=1e-8, force=False):
    """G_p^dagger = (G^* G)^{-1} G^* at every grid point, shape (n, m, s).

    With ``force`` a rank-deficient field is accepted and the
    Moore-Penrose inverse is used instead; the result is then no left
    inverse, which is the point of forcing.

    Raises
    ------
    NotLeftInvertible
        If min lambda_min(G^* G) <= ``pinv_floor`` and not ``force``.
    """
    G = field.matrices
    GtG = field.gram()
    lam = np.linalg.eigvalsh(GtG)[:, 0]
    if lam.min() <= pinv_floor:
        if not force:
            raise NotLeftInvertible(
                f"G_{field.p}^* G_{field.p} has lambda_min = {lam.min():.3g} <= {pinv_floor:g}; "
                "no bounded left inverse"
            )
        return np.linalg.pinv(G, rcond=1e-10)
    return np.linalg.solve(GtG, np.conj(np.swapaxes(G, 1, 2)))


@dataclass
class DualField:
    p: int
    points: np.ndarray
    rows: np.ndarray  # (n, s): d_1^p(x), ..., d_s^p(x)
    shape: tuple
    residual: float  # max_x || d^p(x) G_p(x) - e_1 ||_inf
    max_modulus: float


def dual_rows(field, pinv=None, pinv_floor=1e-8, force=False):
    """First rows of the pseudo-inverses, with their residual record."""
    if pinv is None:
        pinv = pseudo_inverse_field(field, pinv_floor, force)
    rows = pinv[:, 0, :]
    prod = np.einsum("ns,nsm->nm", rows, field.matrices)
    prod[:, 0] -= 1.0
    return DualField(
        p=field.p,
        points=field.points,
        rows=rows,
        shape=field.shape,
        residual=float(np.max(np.abs(prod))) if prod.size else 0.0,
        max_modulus=float(np.max(np.abs(rows))) if rows.size else 0.0,
    )


# ---------------------------------------------------------------------------
# kernels


@dataclass
class ReconstructionKernelSet:
    """S_j^p as space elements, keyed by (j, p)."""

    kernels: dict
    gens: object

    @property
    def s(self):
        return 1 + max(j for j, _ in self.kernels)

    def __getitem__(self, key):
        return self.kernels[key]


def build_kernels(duals, gens, lat, K, resolution):
    """S_j^p = T_phi[d_j^p e_0(M^T .) chi_p] for every dual row.

    ``duals`` lists one :class:`DualField` per subcube, tabulated on the
    subcube midpoint grid at unit-cube ``resolution``. e_0 is the
    constant N^{d/2}.
    """
    check_regime(lat.dim, lat.N)
    d, N = lat.dim, lat.N
    kernels = {}
    for dual in duals:
        p = dual.p
        shape = subcube_grid(p, d, N, resolution).shape
        if dual.rows.shape[0] != int(np.prod(shape)):
            raise ShapeMismatch(f"dual rows for p={p} are not tabulated on the subcube grid at resolution {resolution}")
        for j in range(dual.rows.shape[1]):
            pieces = [None] * N
            pieces[p] = N ** (d / 2) * dual.rows[:, j].reshape(shape)
            F = PatchFunction.from_piece_values(pieces, d, N, resolution)
            kernels[(j, p)] = synthesis_operator_T(gens, F, K)
    return ReconstructionKernelSet(kernels, gens)


# ---------------------------------------------------------------------------
# samples


@dataclass
class SampleSet:
    """Samples (L_j f^{(p)})(M alpha); row i of ``index`` is (j, p, alpha...)."""

    index: np.ndarray  # (n, 2 + d) integers
    values: np.ndarray  # (n,) complex
    d: int
    truncated: bool = False

    def energy(self):
        return float(np.sum(np.abs(self.values) ** 2))

    def group(self, j, p):
        sel = (self.index[:, 0] == j) & (self.index[:, 1] == p)
        return self.index[sel, 2:], self.values[sel]

    def as_dict(self):
        return {
            tuple(int(v) for v in row): complex(v) for row, v in zip(self.index, self.values)
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# {SAMPLES_TAG}\n")
            w = csv.writer(fh)
            w.writerow(["j", "p"] + [f"alpha{i}" for i in range(self.d)] + ["re", "im"])
            for row, v in zip(self.index, self.values):
                w.writerow([int(x) for x in row] + [repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0].strip() != f"# {SAMPLES_TAG}":
            raise ParseError(f"{path}: line 1: missing '# {SAMPLES_TAG}' header")
        head = lines[1].split(",")
        d = len(head) - 4
        index, values = [], []
        for lineno, row in enumerate(csv.reader(lines[2:]), start=3):
            if not row:
                continue
            if len(row) != d + 4:
                raise ParseError(f"{path}: line {lineno}: expected {d + 4} fields, got {len(row)}")
            try:
                index.append([int(v) for v in row[:-2]])
                values.append(complex(float(row[-2]), float(row[-1])))
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
        return cls(np.array(index, dtype=np.int64).reshape(-1, d + 2), np.array(values, dtype=complex), d)


def _live_alphas(lat, lo, hi):
    """Integer alpha with M alpha in the closed box [lo, hi]."""
    corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(lat.dim, -1).T
    Minv = np.linalg.inv(lat.M_array)
    a = corners @ Minv.T
    a0 = np.floor(a.min(axis=0)).astype(int) - 1
    a1 = np.ceil(a.max(axis=0)).astype(int) + 1
    alphas = np.array(np.meshgrid(*[np.arange(x, y + 1) for x, y in zip(a0, a1)], indexing="ij"))
    alphas = alphas.reshape(lat.dim, -1).T
    t = alphas @ lat.M_array.T
    keep = np.all((t >= lo - 1e-12) & (t <= hi + 1e-12), axis=1)
    return alphas[keep]


def take_samples(f, bank, lat, K_samp=None, resolution=256):
    """All nonzero samples (L_j f^{(p)})(M alpha), |alpha|_inf <= K_samp.

    ``K_samp=None`` keeps every sample whose filter window meets the
    support of f^{(p)}; the others vanish identically. With a finite
    ``K_samp`` dropped nonzero samples set ``truncated``.

    Raises
    ------
    MissingProvenance
        If ``f`` is not a SpaceElement (no part decomposition).
    """
    if not isinstance(f, SpaceElement):
        raise MissingProvenance("sampling needs a SpaceElement with its part decomposition")
    d = lat.dim
    index, values = [], []
    truncated = False
    for p in range(f.gens.N):
        part = f.part(p)
        box = part.support_box()
        if box is None:
            continue
        for j in range(bank.s):
            rlo, rhi = bank.reach(j)
            alphas = _live_alphas(lat, box[0] - rhi, box[1] - rlo)
            if K_samp is not None:
                inside = np.all(np.abs(alphas) <= K_samp, axis=1)
                truncated |= not np.all(inside)
                alphas = alphas[inside]
            if len(alphas) == 0:
                continue
            v = apply_filter_many(bank, j, part, (alphas @ lat.M_array.T).astype(float), resolution)
            index.append(np.column_stack([np.full(len(alphas), j), np.full(len(alphas), p), alphas]))
            values.append(v)
    if not index:
        return SampleSet(np.zeros((0, d + 2), dtype=np.int64), np.zeros(0, dtype=complex), d, truncated)
    return SampleSet(np.concatenate(index).astype(np.int64), np.concatenate(values), d, truncated)


# ---------------------------------------------------------------------------
# expansion


def _upsample(alphas, vals, lat):
    """Place vals at the points M alpha of a dense integer array."""
    pos = alphas @ np.array(lat.M, dtype=np.int64).T
    lo = pos.min(axis=0)
    arr = np.zeros(tuple(pos.max(axis=0) - lo + 1), dtype=complex)
    np.add.at(arr, tuple((pos - lo).T), vals)
    return arr, lo


def reconstruct(samples, kernels, lat):
    """f_hat = m sum_{j,p,alpha} sample * S_j^p(. - M alpha) as a SpaceElement.

    The alpha-sum is an upsampled convolution of the sample array with
    the kernel coefficients; groups are summed in sorted (j, p) order.

    Raises
    ------
    ShapeMismatch
        If the samples reference kernels that do not exist or disagree
        on the dimension.
    """
    gens = kernels.gens
    if samples.d != lat.dim or gens.d != lat.dim:
        raise ShapeMismatch(f"samples (d={samples.d}), kernels (d={gens.d}) and lattice (d={lat.dim}) disagree")
    total = CoefficientArray.zeros(gens.N, gens.d, 0)
    keys = sorted({(int(j), int(p)) for j, p in samples.index[:, :2]})
    for j, p in keys:
        if (j, p) not in kernels.kernels:
            raise ShapeMismatch(f"no kernel S_{j}^{p} for the given samples")
        alphas, vals = samples.group(j, p)
        if not np.any(vals):
            continue
        up, lo = _upsample(alphas, vals, lat)
        c = kernels[(j, p)].coeffs
        conv = np.stack([convolve(up, c.values[q], method="direct") for q in range(c.N)])
        total = total + CoefficientArray(lat.m * conv, lo + c.offset)
    return SpaceElement(gens, total)


def subcube_fields(source, lat, resolution):
    """G_p on the subcube midpoint grid for every p (dual tabulation)."""
    return [build_subcube_field(source, lat, p, resolution) for p in range(lat.N)]


def compute_duals(fields, pinv_floor=1e-8, force=False):
    if isinstance(fields, ModulationField):
        fields = [fields]
    return [dual_rows(fld, pinv_floor=pinv_floor, force=force) for fld in fields]
