"""Shift-invariant spaces: generators, coefficient arrays, synthesis and
Riesz-bound estimation.

Generators are compactly supported, so every lattice sum is finite.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial, ceil, floor

import numpy as np

from .errors import BoxTooSmall, DegenerateGenerators
from .gridfn import Grid, GridFunction, fourier_coefficients


# ---------------------------------------------------------------------------
# one-dimensional profiles


def bspline(degree):
    """Centred cardinal B-spline of the given degree (degree 0 is centred box)."""
    n = int(degree)
    half = (n + 1) / 2

    def f(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = (x >= -half) & (x < half)
        if n == 0:
            out[inside] = 1.0
            return out
        xi = x[inside] + half
        acc = np.zeros_like(xi)
        for k in range(n + 2):
            acc += (-1) ** k * comb(n + 1, k) * np.clip(xi - k, 0, None) ** n
        out[inside] = acc / factorial(n)
        return out

    return f, (-half, half)


def causal_box(x):
    x = np.asarray(x, dtype=float)
    return ((x >= 0) & (x < 1)).astype(float)


def bubble(x):
    """Quadratic bubble 4x(1-x) on [0,1]; vanishes at both knots."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x <= 1), 4 * x * (1 - x), 0.0)


PROFILES = {
    "box": lambda: (causal_box, (0.0, 1.0)),
    "bubble": lambda: (bubble, (0.0, 1.0)),
    "hat": lambda: bspline(1),
    "quadratic": lambda: bspline(2),
    "cubic": lambda: bspline(3),
}


def profile(name, degree=None):
    if name == "bspline":
        if degree is None:
            raise ValueError("bspline profile needs a degree")
        return bspline(degree)
    try:
        return PROFILES[name]()
    except KeyError:
        raise ValueError(f"unknown generator profile {name!r}; known: {sorted(PROFILES) + ['bspline']}") from None


# ---------------------------------------------------------------------------
# generator components


class SeparableComponent:
    """scale * prod_i f_i(x_i - shift_i)."""

    separable = True

    def __init__(self, factors, supports, shift=None, scale=1.0):
        self.factors = list(factors)
        self.dim = len(self.factors)
        self.shift = np.zeros(self.dim) if shift is None else np.asarray(shift, dtype=float).reshape(self.dim)
        self.scale = complex(scale)
        self._supports = [tuple(s) for s in supports]

    @classmethod
    def named(cls, name, d, degree=None, shift=None, scale=1.0):
        f, supp = profile(name, degree)
        return cls([f] * d, [supp] * d, shift, scale)

    @property
    def support(self):
        lo = np.array([s[0] for s in self._supports]) + self.shift
        hi = np.array([s[1] for s in self._supports]) + self.shift
        return lo, hi

    def axis_factor(self, i, x):
        v = self.factors[i](np.asarray(x, dtype=float) - self.shift[i]).astype(complex)
        return v * self.scale if i == 0 else v

    def evaluate(self, points):
        points = np.atleast_2d(points)
        out = np.ones(len(points), dtype=complex)
        for i in range(self.dim):
            out *= self.axis_factor(i, points[:, i])
        return out


class TabulatedComponent:
    """A generator component given by samples; zero outside its box."""

    separable = False

    def __init__(self, gf):
        if gf.periodic:
            raise ValueError("generator tables must not be periodic")
        self.gf = gf
        self.dim = gf.grid.dim

    @property
    def support(self):
        g = self.gf.grid
        return np.array([float(v) for v in g.lower]), np.array([float(v) for v in g.upper])

    def evaluate(self, points):
        return self.gf.evaluate(np.atleast_2d(points))


class ZeroComponent:
    separable = True

    def __init__(self, d):
        self.dim = d

    @property
    def support(self):
        return np.zeros(self.dim), np.zeros(self.dim)

    def axis_factor(self, i, x):
        return np.zeros(np.shape(x), dtype=complex)

    def evaluate(self, points):
        return np.zeros(len(np.atleast_2d(points)), dtype=complex)


@dataclass
class Generator:
    components: list

    @property
    def r(self):
        return len(self.components)

    @property
    def support(self):
        los, his = zip(*(c.support for c in self.components))
        return np.min(los, axis=0), np.max(his, axis=0)

    def evaluate(self, points):
        return np.stack([c.evaluate(points) for c in self.components], axis=1)


class GeneratorSet:
    """N vector generators with r components each, on R^d."""

    def __init__(self, generators, d=None):
        self.generators = list(generators)
        if not self.generators:
            raise ValueError("at least one generator is required")
        self.r = self.generators[0].r
        if any(g.r != self.r for g in self.generators):
            raise ValueError("all generators must have the same number of components")
        dims = {c.dim for g in self.generators for c in g.components}
        if len(dims) != 1:
            raise ValueError(f"generator components disagree on dimension: {sorted(dims)}")
        self.d = dims.pop()
        if d is not None and d != self.d:
            raise ValueError(f"generators are {self.d}-dimensional, expected {d}")

    @classmethod
    def named(cls, names, d):
        """Scalar generators from profile names, e.g. ``["hat"]``."""
        return cls([Generator([SeparableComponent.named(n, d)]) for n in names])

    @property
    def N(self):
        return len(self.generators)

    def __getitem__(self, j):
        return self.generators[j]

    @property
    def support(self):
        los, his = zip(*(g.support for g in self.generators))
        return np.min(los, axis=0), np.max(his, axis=0)

    def support_radius(self):
        lo, hi = self.support
        return float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))

    def continuity_jump(self, resolution=256):
        """Largest difference between adjacent samples of any component."""
        worst = 0.0
        for g in self.generators:
            for c in g.components:
                lo, hi = c.support
                if np.all(hi <= lo):
                    continue
                grid = Grid(tuple(np.floor(lo) - 1), tuple(np.ceil(hi) + 1), resolution)
                vals = c.evaluate(grid.points()).reshape(grid.shape)
                for ax in range(self.d):
                    if vals.shape[ax] > 1:
                        worst = max(worst, float(np.max(np.abs(np.diff(vals, axis=ax)))))
        return worst

    def translate_energy_sup(self, resolution=64):
        """sup over one period of sum_j sum_q sum_alpha |phi_{j,q}(x - alpha)|^2."""
        grid = Grid.cube(0, 1, resolution, self.d)
        x = grid.points()
        lo, hi = self.support
        ranges = [range(int(floor(-h)) - 1, int(ceil(1 - l)) + 1) for l, h in zip(lo, hi)]
        total = np.zeros(len(x))
        for alpha in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(self.d, -1).T:
            for g in self.generators:
                total += np.sum(np.abs(g.evaluate(x - alpha)) ** 2, axis=1)
        return float(total.max())


# ---------------------------------------------------------------------------
# coefficients and space elements


class CoefficientArray:
    """Coefficients a_{j,alpha}: ``values[j][i]`` belongs to alpha = i + offset."""

    def __init__(self, values, offset=None):
        values = np.asarray(values, dtype=complex)
        self.values = values
        d = values.ndim - 1
        self.offset = np.zeros(d, dtype=int) if offset is None else np.asarray(offset, dtype=int).reshape(d)

    @classmethod
    def zeros(cls, N, d, K):
        return cls(np.zeros((N,) + (2 * K + 1,) * d), [-K] * d)

    @classmethod
    def delta(cls, N, d, K, j, alpha):
        c = cls.zeros(N, d, K)
        c.values[(j,) + tuple(np.asarray(alpha) + K)] = 1
        return c

    @classmethod
    def random(cls, rng, N, d, K, normalize=True):
        shape = (N,) + (2 * K + 1,) * d
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        if normalize:
            v /= np.linalg.norm(v)
        return cls(v, [-K] * d)

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.ndim - 1

    @property
    def upper(self):
        """Largest alpha index (inclusive) per axis."""
        return self.offset + np.array(self.values.shape[1:]) - 1

    def norm_sq(self):
        return float(np.sum(np.abs(self.values) ** 2))

    def shifted(self, beta):
        return CoefficientArray(self.values, self.offset + np.asarray(beta, dtype=int))

    def only(self, j):
        v = np.zeros_like(self.values)
        v[j] = self.values[j]
        return CoefficientArray(v, self.offset)

    def significant_range(self, rtol=1e-14):
        """Index box holding every coefficient above ``rtol * max``."""
        mag = np.abs(self.values).max(axis=0)
        peak = mag.max() if mag.size else 0.0
        if peak == 0:
            return None
        idx = np.argwhere(mag > rtol * peak)
        return self.offset + idx.min(axis=0), self.offset + idx.max(axis=0)

    def __add__(self, other):
        lo = np.minimum(self.offset, other.offset)
        hi = np.maximum(self.upper, other.upper)
        out = np.zeros((max(self.N, other.N),) + tuple(hi - lo + 1), dtype=complex)
        for c in (self, other):
            sl = tuple(slice(a, a + n) for a, n in zip(c.offset - lo, c.values.shape[1:]))
            out[(slice(0, c.N),) + sl] += c.values
        return CoefficientArray(out, lo)

    def __mul__(self, s):
        return CoefficientArray(self.values * s, self.offset)

    __rmul__ = __mul__


class SpaceElement:
    """f = sum_j sum_alpha a_{j,alpha} phi_j(. - alpha), with provenance.

    Pointwise evaluation is exact (generators are closed form or
    interpolated tables); ``tabulate`` samples f on a midpoint grid.
    ``source`` is the patch function F with f = T_phi F, when known.
    """

    def __init__(self, gens, coeffs, source=None, resolution=32, box=None):
        if coeffs.N != gens.N or coeffs.d != gens.d:
            raise ValueError("coefficient array does not match the generator set")
        self.gens = gens
        self.coeffs = coeffs
        self.source = source
        self.resolution = int(resolution)
        self._box = box
        self._tab = None

    @property
    def d(self):
        return self.gens.d

    @property
    def r(self):
        return self.gens.r

    def support_box(self, rtol=1e-14):
        """Integer box outside which f is negligible (None if f = 0)."""
        rng = self.coeffs.significant_range(rtol)
        if rng is None:
            return None
        lo, hi = self.gens.support
        return np.floor(rng[0] + lo).astype(int), np.ceil(rng[1] + hi).astype(int)

    @property
    def grid(self):
        if self._box is not None:
            return Grid(tuple(self._box[0]), tuple(self._box[1]), self.resolution)
        box = self.support_box()
        if box is None:
            box = (np.zeros(self.d, dtype=int), np.ones(self.d, dtype=int))
        return Grid(tuple(box[0]), tuple(box[1]), self.resolution)

    def part(self, p):
        """The component f^{(p)} generated by phi_p alone."""
        return SpaceElement(self.gens, self.coeffs.only(p), self.source, self.resolution, self._box)

    @property
    def parts(self):
        return [self.part(p) for p in range(self.gens.N)]

    def shifted(self, beta):
        """f(. - beta) for an integer vector beta."""
        return SpaceElement(self.gens, self.coeffs.shifted(beta), None, self.resolution)

    def __add__(self, other):
        return SpaceElement(self.gens, self.coeffs + other.coeffs, None, self.resolution)

    def __mul__(self, s):
        src = None if self.source is None else self.source * s
        return SpaceElement(self.gens, self.coeffs * s, src, self.resolution, self._box)

    __rmul__ = __mul__

    def evaluate(self, points):
        """Values at points (n, d) as an (n, r) array."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((len(points), self.r), dtype=complex)
        if len(points) == 0:
            return out
        c = self.coeffs
        for j, gen in enumerate(self.gens.generators):
            for q, comp in enumerate(gen.components):
                lo, hi = comp.support
                if np.all(hi <= lo):
                    continue
                # alphas whose shifted support can meet the points
                a0 = np.maximum(np.floor(points.min(axis=0) - hi).astype(int), c.offset)
                a1 = np.minimum(np.ceil(points.max(axis=0) - lo).astype(int), c.upper)
                if np.any(a1 < a0):
                    continue
                sub = c.values[(j,) + tuple(slice(a - o, b - o + 1) for a, b, o in zip(a0, a1, c.offset))]
                if not np.any(sub):
                    continue
                out[:, q] += _lattice_sum(comp, sub, a0, points)
        return out

    def tabulate(self, grid=None):
        """GridFunction of shape grid.shape + (r,) holding f."""
        if grid is None:
            if self._tab is None:
                self._tab = self._tabulate(self.grid)
            return self._tab
        return self._tabulate(grid)

    def _tabulate(self, grid):
        vals = np.zeros(grid.shape + (self.r,), dtype=complex)
        c = self.coeffs
        axes = grid.axes
        for j, gen in enumerate(self.gens.generators):
            a = c.values[j]
            if not np.any(a):
                continue
            for q, comp in enumerate(gen.components):
                if comp.separable:
                    out = a
                    for i in range(self.d):
                        alphas = c.offset[i] + np.arange(a.shape[i])
                        phi = comp.axis_factor(i, axes[i][None, :] - alphas[:, None])
                        out = np.tensordot(out, phi, axes=([0], [0]))
                    vals[..., q] += out
                else:
                    pts = grid.points()
                    vals[..., q] += _lattice_sum(comp, a, c.offset, pts).reshape(grid.shape)
        return GridFunction(grid, vals)

    def norm_sq(self, grid=None):
        return self.tabulate(grid).norm_sq()


def _lattice_sum(comp, coeffs, offset, points):
    """sum_alpha coeffs[alpha - offset] * comp(points - alpha)."""
    d = points.shape[1]
    if comp.separable:
        X = None
        for i in range(d):
            alphas = offset[i] + np.arange(coeffs.shape[i])
            phi = comp.axis_factor(i, points[:, i][None, :] - alphas[:, None])  # (L_i, n)
            if X is None:
                X = np.moveaxis(np.tensordot(phi, coeffs, axes=([0], [0])), 0, -1)
            else:
                X = np.einsum("i...n,in->...n", X, phi)
        return X
    out = np.zeros(len(points), dtype=complex)
    for idx in zip(*np.nonzero(coeffs)):
        alpha = np.asarray(idx) + offset
        out += coeffs[idx] * comp.evaluate(points - alpha)
    return out


def synthesize(gens, coeffs, box=None, resolution=32):
    """The element sum_j sum_alpha a_{j,alpha} phi_j(. - alpha).

    Raises
    ------
    BoxTooSmall
        If an explicit ``box`` does not contain the support of f.
    """
    f = SpaceElement(gens, coeffs, resolution=resolution)
    if box is not None:
        need = f.support_box(rtol=0.0)
        box = (np.asarray(box[0]), np.asarray(box[1]))
        if need is not None and (np.any(need[0] < box[0]) or np.any(need[1] > box[1])):
            raise BoxTooSmall(f"box {box} does not contain the support {need} of the synthesized function")
        f._box = box
    return f


def synthesis_operator_T(gens, F, K, resolution=32):
    """T_phi F = sum_j sum_{|alpha| <= K} c_{F,j,alpha} phi_j(. - alpha).

    The coefficients are the subcube Fourier coefficients of F, so the
    part generated by phi_j is T_{phi_j} F_j.
    """
    if F.N != gens.N or F.d != gens.d:
        raise ValueError(f"patch function has N={F.N}, d={F.d}; generators have N={gens.N}, d={gens.d}")
    c = np.stack([fourier_coefficients(F, j, K) for j in range(gens.N)])
    return SpaceElement(gens, CoefficientArray(c, [-K] * gens.d), source=F, resolution=resolution)


# ---------------------------------------------------------------------------
# Riesz bounds


@dataclass
class RieszEstimate:
    A_lo: float
    B_hi: float
    trials: int
    probe_min: float
    probe_max: float
    gram_min: float
    gram_max: float

    @property
    def gap(self):
        """Spread between the probe range and the Gram eigenvalue range."""
        return max(self.probe_min - self.gram_min, self.gram_max - self.probe_max, 0.0)

    def as_dict(self):
        return {
            "A_lo": self.A_lo,
            "B_hi": self.B_hi,
            "trials": self.trials,
            "probe_min": self.probe_min,
            "probe_max": self.probe_max,
            "gram_min": self.gram_min,
            "gram_max": self.gram_max,
            "gap": self.gap,
        }


def _autocorrelation(c1, c2, k, resolution):
    """integral of c1(y) * conj(c2(y - k)) dy by the midpoint rule."""
    lo1, hi1 = c1.support
    lo2, hi2 = c2.support
    lo = np.maximum(lo1, lo2 + k)
    hi = np.minimum(hi1, hi2 + k)
    if np.any(hi <= lo):
        return 0.0
    lo = np.floor(lo * resolution) / resolution
    hi = np.ceil(hi * resolution) / resolution
    if c1.separable and c2.separable:
        total = 1.0 + 0j
        for i in range(len(k)):
            n = int(round((hi[i] - lo[i]) * resolution))
            y = lo[i] + (np.arange(n) + 0.5) / resolution
            total *= np.sum(c1.axis_factor(i, y) * np.conj(c2.axis_factor(i, y - k[i]))) / resolution
        return total
    resolution = min(resolution, 256)
    lo = np.floor(lo * resolution) / resolution
    hi = np.ceil(hi * resolution) / resolution
    grid = Grid(tuple(Fraction(v).limit_denominator(resolution) for v in lo),
                tuple(Fraction(v).limit_denominator(resolution) for v in hi), resolution)
    y = grid.points()
    return np.sum(c1.evaluate(y) * np.conj(c2.evaluate(y - k))) * grid.cell_volume


def gram_matrix(gens, K, resolution=1024):
    """Gram matrix of {phi_j(. - alpha) : |alpha|_inf <= K}.

    Rows and columns are ordered (j, alpha) with alpha in C order.
    """
    d, N = gens.d, gens.N
    lo, hi = gens.support
    width = np.ceil(hi - lo).astype(int)
    lags = [np.arange(-w, w + 1) for w in width]
    table = {}
    for j1 in range(N):
        for j2 in range(N):
            for k in np.array(np.meshgrid(*lags, indexing="ij")).reshape(d, -1).T:
                val = sum(
                    _autocorrelation(a, b, k, resolution)
                    for a, b in zip(gens[j1].components, gens[j2].components)
                )
                if val != 0:
                    table[(j1, j2, tuple(k))] = val
    alphas = np.array(np.meshgrid(*([np.arange(-K, K + 1)] * d), indexing="ij")).reshape(d, -1).T
    n = len(alphas)
    G = np.zeros((N * n, N * n), dtype=complex)
    diff = alphas[None, :, :] - alphas[:, None, :]  # alpha' - alpha
    for (j1, j2, k), val in table.items():
        mask = np.all(diff == np.array(k), axis=2)
        G[j1 * n:(j1 + 1) * n, j2 * n:(j2 + 1) * n][mask] = val
    return G


def riesz_bounds_estimate(gens, trials=20, K_coeff=8, rng=None, resolution=32,
                          gram_resolution=1024, cap=1e8):
    """Estimate Riesz bounds of the integer translates of ``gens``.

    Random unit-norm coefficient arrays are synthesized and their energy
    measured by quadrature; independently the finite Gram matrix on
    |alpha| <= K_coeff is diagonalised. ``A_lo``/``B_hi`` are the
    outer envelope of both ranges. Neither is a certificate.

    Raises
    ------
    DegenerateGenerators
        If B_hi / A_lo exceeds ``cap`` (near-dependent translates).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(0) if rng is None else rng
    energies = []
    for _ in range(trials):
        c = CoefficientArray.random(rng, gens.N, gens.d, K_coeff)
        energies.append(synthesize(gens, c, resolution=resolution).norm_sq())
    eig = np.linalg.eigvalsh(gram_matrix(gens, K_coeff, gram_resolution))
    probe_min, probe_max = min(energies), max(energies)
    A_lo = min(probe_min, float(eig[0]))
    B_hi = max(probe_max, float(eig[-1]))
    if A_lo <= 0 or B_hi / A_lo > cap:
        raise DegenerateGenerators(
            f"translates are numerically dependent: Riesz ratio estimate {B_hi / max(A_lo, 1e-300):.3g} exceeds {cap:g}"
        )
    return RieszEstimate(A_lo, B_hi, trials, probe_min, probe_max, float(eig[0]), float(eig[-1]))
