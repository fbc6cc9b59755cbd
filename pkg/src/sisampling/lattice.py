"""Integer sampling lattices: determinants, coset representatives of
Z^d / M^T Z^d and the fundamental cells Q_k.

Indices are 0-based: the zero coset is ``gammas[0]``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import itertools

import numpy as np

from .errors import SingularMatrix, UnsupportedRegime


def _as_int_matrix(M):
    rows = [[int(v) for v in np.atleast_1d(row)] for row in np.atleast_2d(M)]
    d = len(rows)
    if any(len(r) != d for r in rows):
        raise ValueError(f"sampling matrix must be square, got {len(rows)} rows of lengths {[len(r) for r in rows]}")
    for row_in, row in zip(np.atleast_2d(M), rows):
        if any(float(a) != b for a, b in zip(np.atleast_1d(row_in), row)):
            raise ValueError("sampling matrix must have integer entries")
    return tuple(tuple(r) for r in rows)


def _transpose(A):
    return tuple(zip(*A))


def _bareiss(A):
    """Fraction-free Gaussian elimination; returns the exact determinant."""
    A = [list(r) for r in A]
    n = len(A)
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def _exact_inverse(A):
    n = len(A)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularMatrix("matrix is singular")
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


def abs_determinant(M):
    """|det M| in exact integer arithmetic.

    Raises
    ------
    SingularMatrix
        If ``det M == 0``.
    """
    det = _bareiss(_as_int_matrix(M))
    if det == 0:
        raise SingularMatrix(f"sampling matrix {M!r} is singular")
    return abs(det)


def _adjugate_transpose(M):
    """Integer adjugate of M^T, used for exact coset keys."""
    MT = _transpose(M)
    det = _bareiss(MT)
    inv = _exact_inverse(MT)
    return tuple(tuple(int(v * det) for v in row) for row in inv)


def _coset_key(alpha, adj, m):
    return tuple(sum(a * x for a, x in zip(row, alpha)) % m for row in adj)


def _rep_order(alpha):
    # smallest l1 norm first, ties broken colexicographically
    return (sum(abs(a) for a in alpha), tuple(reversed(alpha)))


def coset_representatives(M):
    """Representatives gamma_0, ..., gamma_{m-1} of Z^d / M^T Z^d.

    gamma_0 is the origin. Each coset is represented by its member of
    smallest l1 norm found in the box [0, m-1]^d (ties broken
    colexicographically) and the cosets are sorted by that same key,
    so the ordering is reproducible.
    """
    M = _as_int_matrix(M)
    m = abs_determinant(M)
    d = len(M)
    adj = _adjugate_transpose(M)
    best = {}
    # m Z^d lies inside M^T Z^d, so this box meets every coset
    for alpha in itertools.product(range(m), repeat=d):
        key = _coset_key(alpha, adj, m)
        if key not in best or _rep_order(alpha) < _rep_order(best[key]):
            best[key] = alpha
    reps = sorted(best.values(), key=_rep_order)
    assert len(reps) == m
    return reps


def check_regime(d, N):
    if d > 1 and N > 1:
        raise UnsupportedRegime(
            f"d={d} with N={N}: the diagonal subcubes [(p-1)/N, p/N]^d do not tile [0,1]^d; "
            "only d = 1 or N = 1 is supported"
        )


@dataclass(frozen=True)
class Cell:
    """Half-open parallelepiped ``offset + linear @ [0,1)^d``."""

    offset: tuple
    linear: tuple

    @property
    def volume(self):
        return abs(Fraction(_bareiss_fraction(self.linear)))

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inv = np.array(_exact_inverse(self.linear), dtype=float)
        u = (points - np.array(self.offset, dtype=float)) @ inv.T
        return np.all((u >= 0) & (u < 1), axis=1)


def _bareiss_fraction(A):
    # determinant of a rational matrix via a common denominator
    den = 1
    for row in A:
        for v in row:
            den = den * Fraction(v).denominator // _gcd(den, Fraction(v).denominator)
    scaled = [[int(Fraction(v) * den) for v in row] for row in A]
    return Fraction(_bareiss(scaled), den ** len(A))


def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@dataclass(frozen=True)
class SamplingLattice:
    """Sampling matrix M with its coset data.

    Parameters
    ----------
    M : d x d integer matrix
    N : number of subcubes in the unit cube decomposition
    gammas : optional explicit coset representatives; defaults to
        :func:`coset_representatives`. A custom order is allowed as long
        as ``gammas[0]`` is the origin and the cosets are distinct.
    """

    M: tuple
    N: int = 1
    gammas: tuple = None
    _adj: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        M = _as_int_matrix(self.M)
        object.__setattr__(self, "M", M)
        if int(self.N) < 1:
            raise ValueError("N must be a positive integer")
        object.__setattr__(self, "N", int(self.N))
        m = abs_determinant(M)
        adj = _adjugate_transpose(M)
        object.__setattr__(self, "_adj", adj)
        if self.gammas is None:
            gammas = coset_representatives(M)
        else:
            gammas = [tuple(int(v) for v in g) for g in self.gammas]
            if len(gammas) != m:
                raise ValueError(f"expected {m} coset representatives, got {len(gammas)}")
            if any(v != 0 for v in gammas[0]):
                raise ValueError("gammas[0] must be the origin")
            if len({_coset_key(g, adj, m) for g in gammas}) != m:
                raise ValueError("coset representatives are not pairwise inequivalent")
        object.__setattr__(self, "gammas", tuple(tuple(g) for g in gammas))

    @property
    def dim(self):
        return len(self.M)

    @property
    def m(self):
        return abs_determinant(self.M)

    @property
    def M_array(self):
        return np.array(self.M, dtype=float)

    @property
    def MT_inv_exact(self):
        return _exact_inverse(_transpose(self.M))

    @property
    def MT_inv(self):
        return np.array(self.MT_inv_exact, dtype=float)

    @property
    def shifts(self):
        """Array (m, d) of the offsets M^{-T} gamma_k / N."""
        return np.array(self.gammas, dtype=float) @ self.MT_inv.T / self.N

    def reduce(self, alpha):
        """Index k with alpha - gamma_k in M^T Z^d."""
        return reduce_to_coset(alpha, self)

    def cell_grid(self, resolution):
        """Midpoint grid of the cell M^{-T}[0,1)^d / N.

        Returns ``(points, shape, weight)``: points of shape (n, d), the
        parameter-grid shape and the quadrature weight of each point.
        """
        d = self.dim
        u1 = (np.arange(resolution) + 0.5) / resolution
        mesh = np.meshgrid(*([u1] * d), indexing="ij")
        u = np.stack([g.ravel() for g in mesh], axis=1)
        points = u @ self.MT_inv.T / self.N
        weight = 1.0 / (self.m * self.N**d * resolution**d)
        return points, (resolution,) * d, weight


def build_cells(lat):
    """Cells Q_k = M^{-T} gamma_k / N + M^{-T}[0,1)^d / N in coset order."""
    inv = lat.MT_inv_exact
    N = Fraction(lat.N)
    linear = tuple(tuple(v / N for v in row) for row in inv)
    cells = []
    for g in lat.gammas:
        offset = tuple(sum(row[i] * g[i] for i in range(lat.dim)) / N for row in inv)
        cells.append(Cell(offset=offset, linear=linear))
    return cells


def reduce_to_coset(alpha, lat):
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    key = _coset_key(alpha, lat._adj, lat.m)
    for k, g in enumerate(lat.gammas):
        if _coset_key(g, lat._adj, lat.m) == key:
            return k
    raise AssertionError("coset table incomplete")  # unreachable for a valid lattice


def reduce_many(alphas, lat):
    """Vectorised :func:`reduce_to_coset` for an integer array (n, d)."""
    alphas = np.asarray(alphas, dtype=np.int64).reshape(-1, lat.dim)
    adj = np.array(lat._adj, dtype=np.int64)
    keys = (alphas @ adj.T) % lat.m
    table = (np.array(lat.gammas, dtype=np.int64) @ adj.T) % lat.m
    match = np.all(keys[:, None, :] == table[None, :, :], axis=2)
    return np.argmax(match, axis=1)
