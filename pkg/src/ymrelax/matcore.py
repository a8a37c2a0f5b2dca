"""Small dense matrix kernel for dimensions 1, 2 and 3.

Everything the measure algebra needs from linear algebra lives here:
Frobenius norms, determinants, inverses, singular values, rho-ball
membership and rank-one decompositions.  The dimension is capped at 3
so every quantity has a deterministic closed form; no iterative
factorization is involved anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import SingularError

# A matrix counts as singular when |det A| < SINGULAR_RTOL * max(1, |A|^n).
SINGULAR_RTOL = 1e-12

# B - A counts as rank one when the second singular value is below
# RANK_ONE_RTOL times the first.
RANK_ONE_RTOL = 1e-9

_SUPPORTED_DIMS = (1, 2, 3)


@dataclass(frozen=True)
class Mat:
    """Immutable n x n real matrix, entries stored row-major."""

    n: int
    flat: tuple

    def __post_init__(self):
        if self.n not in _SUPPORTED_DIMS:
            raise ValueError(f"dimension {self.n} not supported, expected 1..3")
        if len(self.flat) != self.n * self.n:
            raise ValueError("entry count does not match dimension")
        vals = tuple(float(x) for x in self.flat)
        for x in vals:
            if not math.isfinite(x):
                raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "flat", vals)

    # -- constructors ------------------------------------------------

    @classmethod
    def from_flat(cls, entries: Sequence[float]) -> "Mat":
        """Build from a row-major flat sequence; n is inferred from the length."""
        k = len(entries)
        n = int(round(math.sqrt(k)))
        if n * n != k or n not in _SUPPORTED_DIMS:
            raise ValueError(f"flat length {k} is not a supported square size")
        return cls(n, tuple(float(x) for x in entries))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Mat":
        n = len(rows)
        flat = []
        for r in rows:
            if len(r) != n:
                raise ValueError("rows must form a square matrix")
            flat.extend(float(x) for x in r)
        return cls(n, tuple(flat))

    @classmethod
    def identity(cls, n: int) -> "Mat":
        return cls(n, tuple(1.0 if i == j else 0.0 for i in range(n) for j in range(n)))

    @classmethod
    def zero(cls, n: int) -> "Mat":
        return cls(n, (0.0,) * (n * n))

    @classmethod
    def diag(cls, *vals: float) -> "Mat":
        n = len(vals)
        return cls(n, tuple(float(vals[i]) if i == j else 0.0
                            for i in range(n) for j in range(n)))

    @classmethod
    def scalar(cls, x: float) -> "Mat":
        """1x1 matrix, the scalar case used throughout the 1D paths."""
        return cls(1, (float(x),))

    @classmethod
    def outer(cls, a: Sequence[float], m: Sequence[float]) -> "Mat":
        """Rank-one product a (x) m."""
        n = len(a)
        if len(m) != n:
            raise ValueError("vector lengths differ")
        return cls(n, tuple(float(a[i]) * float(m[j]) for i in range(n) for j in range(n)))

    @classmethod
    def coerce(cls, value, n: int | None = None) -> "Mat":
        """Accept a Mat, a scalar (1x1), a flat list or nested rows."""
        if isinstance(value, Mat):
            out = value
        elif isinstance(value, (int, float)):
            out = cls.scalar(float(value))
        elif isinstance(value, (list, tuple)):
            if value and isinstance(value[0], (list, tuple)):
                out = cls.from_rows(value)
            else:
                out = cls.from_flat(value)
        else:
            raise TypeError(f"cannot interpret {type(value).__name__} as a matrix")
        if n is not None and out.n != n:
            raise ValueError(f"expected a {n}x{n} matrix, got {out.n}x{out.n}")
        return out

    # -- element access ----------------------------------------------

    def entry(self, i: int, j: int) -> float:
        return self.flat[i * self.n + j]

    def rows(self) -> list:
        n = self.n
        return [list(self.flat[i * n:(i + 1) * n]) for i in range(n)]

    def row(self, i: int) -> tuple:
        n = self.n
        return self.flat[i * n:(i + 1) * n]

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other: "Mat") -> "Mat":
        self._check_same(other)
        return Mat(self.n, tuple(a + b for a, b in zip(self.flat, other.flat)))

    def __sub__(self, other: "Mat") -> "Mat":
        self._check_same(other)
        return Mat(self.n, tuple(a - b for a, b in zip(self.flat, other.flat)))

    def __neg__(self) -> "Mat":
        return Mat(self.n, tuple(-a for a in self.flat))

    def __mul__(self, c: float) -> "Mat":
        return Mat(self.n, tuple(float(c) * a for a in self.flat))

    __rmul__ = __mul__

    def __matmul__(self, other: "Mat") -> "Mat":
        self._check_same(other)
        n = self.n
        out = []
        for i in range(n):
            for j in range(n):
                out.append(math.fsum(self.flat[i * n + k] * other.flat[k * n + j]
                                     for k in range(n)))
        return Mat(n, tuple(out))

    def transpose(self) -> "Mat":
        n = self.n
        return Mat(n, tuple(self.flat[j * n + i] for i in range(n) for j in range(n)))

    def mul_vec(self, v: Sequence[float]) -> tuple:
        n = self.n
        if len(v) != n:
            raise ValueError("vector length does not match dimension")
        return tuple(math.fsum(self.flat[i * n + k] * float(v[k]) for k in range(n))
                     for i in range(n))

    def _check_same(self, other: "Mat"):
        if not isinstance(other, Mat) or other.n != self.n:
            raise ValueError("dimension mismatch")

    def __repr__(self):
        return f"Mat{self.n}({list(self.flat)})"


def mat_close(a: Mat, b: Mat, tol: float) -> bool:
    """Frobenius distance test."""
    return frob_norm(a - b) <= tol


# -- norms and determinants -------------------------------------------


def frob_norm(a: Mat) -> float:
    return math.sqrt(math.fsum(x * x for x in a.flat))


def det(a: Mat) -> float:
    f = a.flat
    if a.n == 1:
        return f[0]
    if a.n == 2:
        return f[0] * f[3] - f[1] * f[2]
    return (f[0] * (f[4] * f[8] - f[5] * f[7])
            - f[1] * (f[3] * f[8] - f[5] * f[6])
            + f[2] * (f[3] * f[7] - f[4] * f[6]))


def singular_threshold(a: Mat) -> float:
    """Determinant magnitude below which a matrix is treated as singular."""
    return SINGULAR_RTOL * max(1.0, frob_norm(a) ** a.n)


def is_invertible(a: Mat) -> bool:
    return abs(det(a)) >= singular_threshold(a)


def invert(a: Mat) -> Mat:
    """Closed-form inverse; raises SingularError below the det threshold."""
    d = det(a)
    if abs(d) < singular_threshold(a):
        raise SingularError(f"matrix is numerically singular (det={d:.3e})")
    f = a.flat
    if a.n == 1:
        return Mat(1, (1.0 / d,))
    if a.n == 2:
        return Mat(2, (f[3] / d, -f[1] / d, -f[2] / d, f[0] / d))
    # adjugate transpose over the determinant
    c = (
        f[4] * f[8] - f[5] * f[7],
        f[2] * f[7] - f[1] * f[8],
        f[1] * f[5] - f[2] * f[4],
        f[5] * f[6] - f[3] * f[8],
        f[0] * f[8] - f[2] * f[6],
        f[2] * f[3] - f[0] * f[5],
        f[3] * f[7] - f[4] * f[6],
        f[1] * f[6] - f[0] * f[7],
        f[0] * f[4] - f[1] * f[3],
    )
    return Mat(3, tuple(x / d for x in c))


# -- singular values ---------------------------------------------------


def _sym_eigvals_desc(b00, b01, b02, b11, b12, b22) -> tuple:
    """Eigenvalues of a symmetric 3x3 matrix, descending, by the
    trigonometric closed form."""
    p1 = b01 * b01 + b02 * b02 + b12 * b12
    if p1 == 0.0:
        return tuple(sorted((b00, b11, b22), reverse=True))
    q = (b00 + b11 + b22) / 3.0
    p2 = (b00 - q) ** 2 + (b11 - q) ** 2 + (b22 - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    # r = det((B - q I) / p) / 2, clamped against rounding
    m00, m11, m22 = (b00 - q) / p, (b11 - q) / p, (b22 - q) / p
    m01, m02, m12 = b01 / p, b02 / p, b12 / p
    r = 0.5 * (m00 * (m11 * m22 - m12 * m12)
               - m01 * (m01 * m22 - m12 * m02)
               + m02 * (m01 * m12 - m11 * m02))
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    e1 = q + 2.0 * p * math.cos(phi)
    e3 = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    return (e1, e2, e3)


def singular_values(a: Mat) -> tuple:
    """All singular values, descending, via closed-form spectra of A^T A."""
    f = a.flat
    if a.n == 1:
        return (abs(f[0]),)
    if a.n == 2:
        # eigenvalues of A^T A from trace and determinant
        t = math.fsum(x * x for x in f)
        d = det(a)
        disc = max(t * t - 4.0 * d * d, 0.0)
        root = math.sqrt(disc)
        lam1 = 0.5 * (t + root)
        lam2 = 0.5 * (t - root)
        return (math.sqrt(max(lam1, 0.0)), math.sqrt(max(lam2, 0.0)))
    b = a.transpose() @ a
    g = b.flat
    eig = _sym_eigvals_desc(g[0], g[1], g[2], g[4], g[5], g[8])
    return tuple(math.sqrt(max(e, 0.0)) for e in eig)


def largest_singular_value(a: Mat) -> float:
    return singular_values(a)[0]


# -- rank-one decomposition --------------------------------------------


def rank_one_difference(a: Mat, b: Mat):
    """Decompose B - A as an outer product.

    Returns (vec_a, vec_m) with B - A = vec_a (x) vec_m and |vec_m| = 1,
    or None when the difference is not rank one within tolerance (this
    includes the rank-zero case A = B).  The sign of vec_m is normalized
    so its largest-magnitude entry is positive.
    """
    d = b - a
    sv = singular_values(d)
    s1 = sv[0]
    if s1 == 0.0:
        return None
    if len(sv) > 1 and sv[1] > RANK_ONE_RTOL * s1:
        return None
    # every row of a rank-one matrix is a multiple of m; take the largest
    n = d.n
    rows = [d.row(i) for i in range(n)]
    norms = [math.sqrt(math.fsum(x * x for x in r)) for r in rows]
    i_best = max(range(n), key=lambda i: norms[i])
    r = rows[i_best]
    nr = norms[i_best]
    m = [x / nr for x in r]
    j_big = max(range(n), key=lambda j: abs(m[j]))
    if m[j_big] < 0.0:
        m = [-x for x in m]
    vec_a = d.mul_vec(m)
    return (tuple(vec_a), tuple(m))


# -- rho balls ----------------------------------------------------------


@dataclass(frozen=True)
class RhoBall:
    """Invertible matrices with max(|A|, |A^-1|) <= rho, optionally det > 0."""

    rho: float
    positive_det_only: bool = False

    def __post_init__(self):
        if not (self.rho > 0.0 and math.isfinite(self.rho)):
            raise ValueError("rho must be positive and finite")

    def contains(self, a: Mat) -> bool:
        return in_rho_ball(a, self)


def in_rho_ball(a: Mat, ball: RhoBall) -> bool:
    """Membership test; singular matrices are never members."""
    d = det(a)
    if abs(d) < singular_threshold(a):
        return False
    if ball.positive_det_only and d <= 0.0:
        return False
    if frob_norm(a) > ball.rho:
        return False
    return frob_norm(invert(a)) <= ball.rho


def max_norm_pair(a: Mat) -> float:
    """max(|A|, |A^-1|), infinite for singular matrices."""
    if not is_invertible(a):
        return math.inf
    return max(frob_norm(a), frob_norm(invert(a)))


def iter_coordinate_dyads(n: int) -> Iterable[Mat]:
    """The n^2 unit coordinate dyads e_i (x) e_j."""
    for i in range(n):
        for j in range(n):
            flat = [0.0] * (n * n)
            flat[i * n + j] = 1.0
            yield Mat(n, tuple(flat))
