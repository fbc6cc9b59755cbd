"""Linear time-invariant sampling systems and their symbols g_{j,p}.

A system either convolves the r components of f with integrable kernels,

    (L f)(t) = sum_q  integral f_q(x) p_q(t - x) dx,

or evaluates one component at a shifted point, (L f)(t) = f_q(t - tau).
"""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import OutOfReliableRegion, TruncationLoss, TruncationLossWarning, ValidationError
from .gridfn import Grid, GridFunction, subcube_grid
from .sispace import CoefficientArray, SeparableComponent, SpaceElement, bspline


def box_kernel(d, width=1.0):
    """Normalised average over the centred cube of side ``width``."""
    f, _ = bspline(0)
    w = float(width)
    return SeparableComponent([lambda x, f=f: f(x / w)] * d, [(-w / 2, w / 2)] * d, scale=w ** (-d))


@dataclass
class PointEvaluation:
    """Ideal sampling of component ``component`` at ``t - offset``."""

    component: int = 0
    offset: tuple = (0.0,)

    def __post_init__(self):
        self.offset = np.atleast_1d(np.asarray(self.offset, dtype=float))


@dataclass
class KernelFilter:
    """Convolution with one kernel per component (``None`` = zero kernel)."""

    kernels: list = field(default_factory=list)

    @property
    def reach(self):
        """Bounding box of the union of kernel supports."""
        sup = [k.support for k in self.kernels if k is not None]
        return np.min([s[0] for s in sup], axis=0), np.max([s[1] for s in sup], axis=0)


class FilterBank:
    """The systems L_1, ..., L_s acting on r-component functions.

    ``strict_l1`` rejects ideal point evaluation, which is not an L^1
    kernel.
    """

    def __init__(self, filters, r=1, strict_l1=False):
        self.filters = list(filters)
        self.r = r
        self.strict_l1 = strict_l1
        if not self.filters:
            raise ValidationError("a filter bank needs at least one system", rule="s >= 1")
        for j, flt in enumerate(self.filters):
            if isinstance(flt, PointEvaluation):
                if strict_l1:
                    raise ValidationError(f"system {j}: point evaluation is disabled in strict L1 mode", rule="strict_l1")
                if not 0 <= flt.component < r:
                    raise ValidationError(f"system {j}: component {flt.component} out of range for r={r}")
            else:
                if len(flt.kernels) != r:
                    raise ValidationError(f"system {j}: expected {r} kernels, got {len(flt.kernels)}")
                if all(k is None for k in flt.kernels):
                    raise ValidationError(f"system {j}: all kernels are zero")

    @property
    def s(self):
        return len(self.filters)

    def __getitem__(self, j):
        return self.filters[j]

    def reach(self, j):
        """Box of offsets x - t that system j looks at."""
        flt = self.filters[j]
        if isinstance(flt, PointEvaluation):
            return -flt.offset, -flt.offset
        lo, hi = flt.reach
        return -hi, -lo


def _check_region(f, lo, hi):
    if isinstance(f, GridFunction) and not f.periodic:
        g = f.grid
        glo = np.array([float(v) for v in g.lower])
        ghi = np.array([float(v) for v in g.upper])
        if np.any(lo < glo) or np.any(hi > ghi):
            raise OutOfReliableRegion(f"filter window [{lo}, {hi}] leaves the tabulated box [{glo}, {ghi}]")


def _component_values(f, points, q):
    v = f.evaluate(points)
    return v if v.ndim == 1 else v[:, q]


def _kernel_nodes(t, kernel, resolution):
    """Midpoint nodes of x in t - supp(kernel), aligned to the 1/R lattice."""
    lo, hi = kernel.support
    a = np.floor((t - hi) * resolution) / resolution
    b = np.ceil((t - lo) * resolution) / resolution
    axes = [ai + (np.arange(int(round((bi - ai) * resolution))) + 0.5) / resolution for ai, bi in zip(a, b)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1), a, b


def apply_filter(bank, j, f, t, resolution=256):
    """(L_j f)(t) for a SpaceElement or GridFunction ``f``.

    Kernel systems integrate by the midpoint rule on the 1/R lattice;
    point evaluation interpolates a GridFunction multilinearly and
    evaluates a SpaceElement exactly.

    Raises
    ------
    OutOfReliableRegion
        If a GridFunction is needed outside its tabulated box.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    flt = bank[j]
    if isinstance(flt, PointEvaluation):
        x = t - flt.offset
        _check_region(f, x, x)
        return complex(_component_values(f, x[None, :], flt.component)[0])
    total = 0j
    for q, kern in enumerate(flt.kernels):
        if kern is None:
            continue
        x, a, b = _kernel_nodes(t, kern, resolution)
        _check_region(f, a, b)
        total += np.sum(_component_values(f, x, q) * kern.evaluate(t - x)) * resolution ** (-len(t))
    return complex(total)


def apply_filter_many(bank, j, f, ts, resolution=256):
    """:func:`apply_filter` at each row of ``ts``."""
    ts = np.atleast_2d(np.asarray(ts, dtype=float))
    flt = bank[j]
    if isinstance(flt, PointEvaluation) and len(ts):
        x = ts - flt.offset
        _check_region(f, x.min(axis=0), x.max(axis=0))
        return np.asarray(_component_values(f, x, flt.component), dtype=complex)
    return np.array([apply_filter(bank, j, f, t, resolution) for t in ts], dtype=complex)


def apply_filter_as_inner_product(bank, j, f, t, resolution=256):
    """<f, h_j(. - t)> with h_{j,q}(y) = conj(p_{j,q}(-y)).

    Independent of :func:`apply_filter`: the reflected, conjugated kernel
    is built explicitly and integrated against f.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    flt = bank[j]
    if isinstance(flt, PointEvaluation):
        raise ValueError("point evaluation has no kernel to reflect")
    total = 0j
    for q, kern in enumerate(flt.kernels):
        if kern is None:
            continue
        lo, hi = kern.support

        def h(y, kern=kern):
            return np.conj(kern.evaluate(-y))

        a = np.floor((t - hi) * resolution) / resolution
        b = np.ceil((t - lo) * resolution) / resolution
        grid = Grid(tuple(_exact(v, resolution) for v in a), tuple(_exact(v, resolution) for v in b), resolution)
        x = grid.points()
        total += np.sum(_component_values(f, x, q) * np.conj(h(x - t))) * grid.cell_volume
    return complex(total)


def _exact(v, resolution):
    return Fraction(int(round(v * resolution)), resolution)


def generator_filter_samples(bank, gens, j, p, K_sym, resolution=256, strict=False):
    """(L_j phi_p)(alpha) for |alpha|_inf <= K_sym, indexed alpha + K_sym.

    Samples on the boundary of the index box above 1e-12 mean the finite
    sequence was cut off: a :class:`TruncationLossWarning` is issued, or
    :class:`TruncationLoss` raised when ``strict``.
    """
    d = gens.d
    phi = SpaceElement(gens, CoefficientArray.delta(gens.N, d, 0, p, [0] * d))
    rng = np.arange(-K_sym, K_sym + 1)
    alphas = np.array(np.meshgrid(*([rng] * d), indexing="ij")).reshape(d, -1).T
    # only alphas whose window meets supp(phi_p) can be nonzero
    slo, shi = gens[p].support
    rlo, rhi = bank.reach(j)
    live = np.all((alphas + rlo <= shi) & (alphas + rhi >= slo), axis=1)
    out = np.zeros(len(alphas), dtype=complex)
    if np.any(live):
        out[live] = apply_filter_many(bank, j, phi, alphas[live].astype(float), resolution)
    out = out.reshape((2 * K_sym + 1,) * d)
    edge = np.ones(out.shape, dtype=bool)
    edge[(slice(1, -1),) * d] = False
    if np.max(np.abs(out[edge])) > 1e-12:
        msg = f"filter samples of (L_{j} phi_{p}) do not vanish at |alpha| = {K_sym}; increase K_sym"
        if strict:
            raise TruncationLoss(msg)
        warnings.warn(msg, TruncationLossWarning, stacklevel=2)
    return out


class SymbolTable:
    """Trigonometric polynomials g_{j,p}(x) = sum_alpha c_alpha exp(-2 pi i N alpha.x)."""

    def __init__(self, coeffs, N, K_sym, resolution=256):
        self.coeffs = coeffs  # {(j, p): array indexed alpha + K_sym}
        self.N = N
        self.K_sym = K_sym
        self.resolution = resolution
        first = next(iter(coeffs.values()))
        self.d = first.ndim
        self.s = 1 + max(j for j, _ in coeffs)

    def evaluate(self, j, p, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = self.coeffs[(j, p)]
        idx = np.argwhere(c != 0)
        if len(idx) == 0:
            return np.zeros(len(x), dtype=complex)
        alphas = idx - self.K_sym
        phase = np.exp(-2j * np.pi * self.N * (x @ alphas.T))
        return phase @ c[tuple(idx.T)]

    def function(self, j, p):
        """Callable x -> g_{j,p}(x)."""
        return lambda x: self.evaluate(j, p, x)

    def tabulated(self, j, p):
        grid = subcube_grid(p, self.d, self.N, self.resolution)
        return GridFunction(grid, self.evaluate(j, p, grid.points()).reshape(grid.shape), periodic=True)

    def ess_sup(self, j, p):
        return float(np.max(np.abs(self.tabulated(j, p).values)))

    def as_dict(self):
        return {
            f"{j},{p}": {"ess_sup": self.ess_sup(j, p)}
            for (j, p) in sorted(self.coeffs)
        }


def build_symbols(bank, gens, lat, K_sym, resolution=256, strict=False):
    """Symbols g_{j,p} of every system against every generator."""
    if gens.d != lat.dim or gens.N != lat.N:
        raise ValueError("generator set and lattice disagree on d or N")
    coeffs = {
        (j, p): generator_filter_samples(bank, gens, j, p, K_sym, resolution, strict)
        for j in range(bank.s)
        for p in range(gens.N)
    }
    return SymbolTable(coeffs, lat.N, K_sym, resolution)
