"""Tabulated complex functions on uniform midpoint grids.

A :class:`Grid` with resolution R over a box places one sample at the
centre of every cell of side 1/R, so the plain sum of values times R^-d
is the midpoint rule. Integration boxes are always aligned to cell
edges; that makes full-period exponentials integrate to zero exactly.
"""

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .errors import DomainMismatch, ParseError
from .lattice import check_regime, reduce_many

FORMAT_TAG = "sisampling-gridfunction v1"


def _frac(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    return Fraction(float(v)).limit_denominator(1 << 20)


@dataclass(frozen=True)
class Grid:
    lower: tuple
    upper: tuple
    resolution: int

    def __post_init__(self):
        lo = tuple(_frac(v) for v in np.atleast_1d(self.lower))
        hi = tuple(_frac(v) for v in np.atleast_1d(self.upper))
        R = int(self.resolution)
        if len(lo) != len(hi):
            raise ValueError("lower and upper corners differ in dimension")
        if R < 2:
            raise ValueError("grid resolution must be at least 2")
        for a, b in zip(lo, hi):
            if b <= a:
                raise ValueError("grid box must have positive volume")
            if ((b - a) * R).denominator != 1:
                raise ValueError(f"box side {b - a} is not a multiple of 1/{R}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", R)

    @classmethod
    def cube(cls, lower, upper, resolution, d):
        return cls((lower,) * d, (upper,) * d, resolution)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def shape(self):
        return tuple(int((b - a) * self.resolution) for a, b in zip(self.lower, self.upper))

    @property
    def cell_volume(self):
        return float(self.resolution) ** (-self.dim)

    @property
    def axes(self):
        R = self.resolution
        return [float(a) + (np.arange(n) + 0.5) / R for a, n in zip(self.lower, self.shape)]

    def points(self):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def index_of(self, corner):
        """Grid index of the cell whose lower edge is ``corner``."""
        idx = []
        for c, a in zip(np.atleast_1d(corner), self.lower):
            off = (_frac(c) - a) * self.resolution
            if off.denominator != 1:
                raise DomainMismatch(f"{c} is not aligned to the 1/{self.resolution} grid")
            idx.append(int(off))
        return tuple(idx)

    def contains_box(self, lower, upper):
        return all(
            _frac(lo) >= a and _frac(hi) <= b
            for lo, hi, a, b in zip(np.atleast_1d(lower), np.atleast_1d(upper), self.lower, self.upper)
        )


class GridFunction:
    """Complex samples on a :class:`Grid`.

    ``values`` has shape ``grid.shape`` for a scalar function or
    ``grid.shape + (r,)`` for an r-component one. A periodic function
    repeats with the box as period cell.
    """

    def __init__(self, grid, values, periodic=False):
        values = np.asarray(values, dtype=complex)
        if values.shape[: grid.dim] != grid.shape or values.ndim not in (grid.dim, grid.dim + 1):
            raise ValueError(f"values of shape {values.shape} do not fit grid shape {grid.shape}")
        self.grid = grid
        self.values = values
        self.values.flags.writeable = False
        self.periodic = bool(periodic)

    @classmethod
    def from_callable(cls, fn, grid, periodic=False):
        vals = np.asarray(fn(grid.points()), dtype=complex)
        return cls(grid, vals.reshape(grid.shape + vals.shape[1:]), periodic)

    @property
    def ncomp(self):
        return 1 if self.values.ndim == self.grid.dim else self.values.shape[-1]

    @property
    def period(self):
        return np.array([float(b - a) for a, b in zip(self.grid.lower, self.grid.upper)])

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values, self.periodic)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c, self.periodic)

    __rmul__ = __mul__

    def evaluate(self, points, order=1):
        """Interpolate at ``points`` (n, d); multilinear by default.

        Non-periodic functions vanish outside their box; periodic ones
        fold the points into the period cell first.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([float(a) for a in self.grid.lower])
        rel = points - lo
        if self.periodic:
            rel = np.mod(rel, self.period)
            inside = np.ones(len(points), dtype=bool)
            mode = "grid-wrap"
        else:
            inside = np.all((rel >= 0) & (rel <= self.period), axis=1)
            mode = "nearest"
        coords = (rel * self.grid.resolution - 0.5).T
        vals = self.values if self.values.ndim > self.grid.dim else self.values[..., None]
        out = np.empty((len(points), vals.shape[-1]), dtype=complex)
        for q in range(vals.shape[-1]):
            comp = vals[..., q]
            re = ndimage.map_coordinates(comp.real, coords, order=order, mode=mode)
            im = ndimage.map_coordinates(comp.imag, coords, order=order, mode=mode)
            out[:, q] = re + 1j * im
        out[~inside] = 0
        return out if self.values.ndim > self.grid.dim else out[:, 0]

    def norm_sq(self):
        return float(np.sum(np.abs(self.values) ** 2).real) * self.grid.cell_volume

    def to_csv(self, path):
        write_gridfunction_csv(self, path)

    @classmethod
    def from_csv(cls, path):
        return read_gridfunction_csv(path)

    def to_npz(self, path):
        np.savez(
            path,
            values=np.asarray(self.values),
            lower=np.array([str(v) for v in self.grid.lower]),
            upper=np.array([str(v) for v in self.grid.upper]),
            resolution=self.grid.resolution,
            periodic=self.periodic,
        )

    @classmethod
    def from_npz(cls, path):
        with np.load(path) as z:
            grid = Grid(tuple(z["lower"].tolist()), tuple(z["upper"].tolist()), int(z["resolution"]))
            return cls(grid, z["values"], bool(z["periodic"]))


def quadrature(f, box=None):
    """Midpoint-rule integral of ``f`` over an axis-aligned ``box``.

    ``box`` is ``(lower, upper)``; its corners must sit on cell edges.
    For periodic ``f`` the box may leave the period cell, indices wrap.
    Returns a complex scalar, or an array of r values for an r-component
    function.

    Raises
    ------
    DomainMismatch
        If the box is misaligned or, for a non-periodic function, not
        contained in the grid box.
    """
    g = f.grid
    if box is None:
        total = f.values.reshape((-1,) + f.values.shape[g.dim:]).sum(axis=0)
        return total * g.cell_volume
    lower, upper = box
    if not f.periodic and not g.contains_box(lower, upper):
        raise DomainMismatch(f"box {box} leaves the domain of a non-periodic function")
    i0 = g.index_of(lower)
    i1 = g.index_of(upper)
    idx = [np.arange(a, b) % n for a, b, n in zip(i0, i1, g.shape)]
    if any(len(ix) == 0 for ix in idx):
        raise DomainMismatch(f"empty integration box {box}")
    sub = f.values[np.ix_(*idx)]
    total = sub.reshape((-1,) + sub.shape[g.dim:]).sum(axis=0)
    return total * g.cell_volume


def exp_basis(alpha, N, x):
    """e_alpha(x) = N^{d/2} exp(-2 pi i N alpha . x); ``x`` has shape (..., d)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    d = alpha.shape[0]
    return N ** (d / 2) * np.exp(-2j * np.pi * N * (x @ alpha))


def fourier_sum(values, axes, freqs, sign=1):
    """Separable sum  sum_x values(x) prod_i exp(sign 2 pi i w_i x_i).

    ``freqs`` is one 1-D array of angular-free frequencies per axis; the
    result has shape ``tuple(len(f) for f in freqs)``.
    """
    out = np.asarray(values, dtype=complex)
    for i, (ax, fr) in enumerate(zip(axes, freqs)):
        E = np.exp(sign * 2j * np.pi * np.outer(np.asarray(fr, dtype=float), ax))
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [i])), 0, i)
    return out


def subcube_fourier(piece, N, freqs):
    """N^{d/2} * integral of ``piece`` times exp(2 pi i N w.x) over its box.

    ``freqs`` lists the integer frequency ranges per axis.
    """
    g = piece.grid
    vals = piece.values
    raw = fourier_sum(vals, g.axes, [N * np.asarray(f) for f in freqs], sign=1)
    return N ** (g.dim / 2) * g.cell_volume * raw


class PatchFunction:
    """A function F on [0,1]^d together with its subcube pieces F_p.

    Piece p (0-based) lives on [p/N, (p+1)/N]^d and is stored as a
    periodic :class:`GridFunction`, so evaluating it anywhere gives the
    Z^d/N-periodic extension of F chi_p.
    """

    def __init__(self, whole, N):
        d = whole.grid.dim
        check_regime(d, N)
        R = whole.grid.resolution
        if R % N:
            raise ValueError(f"resolution {R} must be divisible by N={N}")
        if whole.grid.lower != (0,) * d or whole.grid.upper != (1,) * d:
            raise ValueError("patch functions live on the unit cube")
        self.whole = whole
        self.N = N
        self.d = d

    @classmethod
    def zeros(cls, d, N, R):
        grid = Grid.cube(0, 1, R, d)
        return cls(GridFunction(grid, np.zeros(grid.shape)), N)

    @classmethod
    def from_callable(cls, fn, d, N, R):
        return cls(GridFunction.from_callable(fn, Grid.cube(0, 1, R, d)), N)

    @classmethod
    def from_pieces(cls, fns, d, N, R):
        """Build F from one callable per subcube (``None`` means zero)."""
        check_regime(d, N)
        grid = Grid.cube(0, 1, R, d)
        values = np.zeros(grid.shape, dtype=complex)
        n = R // N
        for p, fn in enumerate(fns):
            if fn is None:
                continue
            sub = subcube_grid(p, d, N, R)
            vals = np.asarray(fn(sub.points()), dtype=complex).reshape(sub.shape)
            if d == 1:
                values[p * n:(p + 1) * n] = vals
            else:
                values[...] = vals
        return cls(GridFunction(grid, values), N)

    @classmethod
    def from_piece_values(cls, pieces, d, N, R):
        """Build F from tabulated subcube pieces (arrays or ``None``)."""
        fns = [None if v is None else (lambda pts, v=v: np.asarray(v).ravel()) for v in pieces]
        return cls.from_pieces(fns, d, N, R)

    def piece(self, p):
        sub = subcube_grid(p, self.d, self.N, self.whole.grid.resolution)
        if self.N == 1:
            vals = self.whole.values
        else:
            n = sub.shape[0]
            vals = self.whole.values[p * n:(p + 1) * n]
        return GridFunction(sub, vals, periodic=True)

    def pieces(self):
        return [self.piece(p) for p in range(self.N)]

    def norm_sq(self):
        return self.whole.norm_sq()

    def __add__(self, other):
        return PatchFunction(self.whole + other.whole, self.N)

    def __mul__(self, c):
        return PatchFunction(self.whole * c, self.N)

    __rmul__ = __mul__


def subcube_grid(p, d, N, R):
    check_regime(d, N)
    if d == 1:
        return Grid((Fraction(p, N),), (Fraction(p + 1, N),), R)
    return Grid.cube(0, 1, R, d)


def fourier_coefficients(F, p, K):
    """c_{F,p,alpha} for |alpha|_inf <= K, as an array indexed alpha + K."""
    if K < 0:
        raise ValueError("truncation radius must be nonnegative")
    rng = np.arange(-K, K + 1)
    return subcube_fourier(F.piece(p), F.N, [rng] * F.d)


@dataclass
class PatchVector:
    """The vector function x -> (F chi_p)(x + M^{-T} gamma_k / N), k < m,
    tabulated on a midpoint grid of the cell M^{-T}[0,1)^d / N."""

    points: np.ndarray
    values: np.ndarray
    shape: tuple
    weight: float

    def norm_sq(self):
        return float(np.sum(np.abs(self.values) ** 2)) * self.weight


def vectorize_patch(F, p, lat, cell_resolution, order=3):
    """Tabulate the patch vector of piece p of ``F`` over the lattice cell.

    Off-grid values of F come from periodic spline interpolation of the
    given ``order``.
    """
    if lat.dim != F.d or lat.N != F.N:
        raise DomainMismatch("lattice and patch function disagree on d or N")
    check_regime(F.d, F.N)
    points, shape, weight = lat.cell_grid(cell_resolution)
    piece = F.piece(p)
    values = np.stack([piece.evaluate(points + s, order=order) for s in lat.shifts], axis=1)
    return PatchVector(points=points, values=values, shape=shape, weight=weight)


def assemble_patch(fn, lat, p, R):
    """Inverse of :func:`vectorize_patch`.

    ``fn(x)`` returns an (n, m) array for cell points x; the result is the
    patch function whose piece p has that patch vector and whose other
    pieces vanish.
    """
    d, N = lat.dim, lat.N
    check_regime(d, N)
    sub = subcube_grid(p, d, N, R)
    y = sub.points()
    full = N * y @ lat.M_array  # rows are N M^T y
    iota = np.floor(full + 1e-12)
    u = np.clip(full - iota, 0.0, None)
    x = u @ lat.MT_inv.T / N
    k = reduce_many(iota.astype(np.int64), lat)
    vals = np.asarray(fn(x))
    piece = vals[np.arange(len(y)), k]
    pieces = [None] * N
    pieces[p] = piece
    return PatchFunction.from_piece_values(pieces, d, N, R)


def write_gridfunction_csv(f, path):
    g = f.grid
    with open(path, "w", newline="") as fh:
        fh.write(f"# {FORMAT_TAG}\n")
        fh.write(
            "# dim={} resolution={} lower={} upper={} periodic={} components={}\n".format(
                g.dim,
                g.resolution,
                ",".join(str(v) for v in g.lower),
                ",".join(str(v) for v in g.upper),
                int(f.periodic),
                f.ncomp,
            )
        )
        w = csv.writer(fh)
        head = [f"i{k}" for k in range(g.dim)] + (["q"] if f.values.ndim > g.dim else []) + ["re", "im"]
        w.writerow(head)
        for idx in np.ndindex(*f.values.shape):
            v = f.values[idx]
            w.writerow(list(idx) + [repr(float(v.real)), repr(float(v.imag))])


def read_gridfunction_csv(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != f"# {FORMAT_TAG}":
        raise ParseError(f"{path}: line 1: missing '# {FORMAT_TAG}' header")
    try:
        meta = dict(tok.split("=", 1) for tok in lines[1].lstrip("# ").split())
        d = int(meta["dim"])
        grid = Grid(tuple(meta["lower"].split(",")), tuple(meta["upper"].split(",")), int(meta["resolution"]))
        ncomp = int(meta.get("components", 1))
        periodic = bool(int(meta.get("periodic", 0)))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: line 2: bad grid metadata ({exc})") from exc
    vector = ncomp > 1 or "q" in lines[2].split(",")
    shape = grid.shape + ((ncomp,) if vector else ())
    values = np.zeros(shape, dtype=complex)
    for lineno, row in enumerate(csv.reader(lines[3:]), start=4):
        if not row:
            continue
        try:
            idx = tuple(int(v) for v in row[:-2])
            values[idx] = float(row[-2]) + 1j * float(row[-1])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if len(idx) != d + int(vector):
        raise ParseError(f"{path}: index columns do not match dim={d}")
    return GridFunction(grid, values, periodic)
