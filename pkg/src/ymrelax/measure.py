"""Atomic measure algebra on matrix space and cellwise measure fields.

An AtomicMeasure is a finitely supported probability measure on the
space of n x n matrices.  Atoms closer than MERGE_TOL in Frobenius
distance are merged at construction, atoms are stored in a canonical
(lexicographic) order, and weights must sum to one within WEIGHT_TOL.

A YoungMeasureField attaches one atomic measure to every cell of a
uniform mesh on the unit interval or unit square, with triangle cells
in 2D so a piecewise-affine deformation has one gradient per cell.

Infinite moments are reported through the INFINITE sentinel rather than
a float, so classification logic never compares against float infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import SingularAtom
from .matcore import (
    Mat,
    RhoBall,
    det,
    frob_norm,
    invert,
    is_invertible,
    mat_close,
)

MERGE_TOL = 1e-10
WEIGHT_TOL = 1e-12


class Infinite:
    """Distinguished result for measures with an infinite moment."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Infinite"


INFINITE = Infinite()


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely supported probability measure on n x n matrices."""

    atoms: tuple  # ((Mat, weight), ...) canonical: merged, sorted, positive

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a measure needs at least one atom")
        n = self.atoms[0][0].n
        total = math.fsum(w for _, w in self.atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        for a, w in self.atoms:
            if a.n != n:
                raise ValueError("atoms must share one dimension")
            if not w > 0.0:
                raise ValueError("weights must be positive")
        for i in range(len(self.atoms)):
            for j in range(i + 1, len(self.atoms)):
                if mat_close(self.atoms[i][0], self.atoms[j][0], MERGE_TOL):
                    raise ValueError("atoms closer than the merge tolerance; "
                                     "use from_pairs to canonicalize")

    # -- constructors ------------------------------------------------

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "AtomicMeasure":
        """Canonical constructor: merges atoms within MERGE_TOL (weights
        add, the lexicographically smallest location represents the
        cluster) and sorts atoms by their flat entries."""
        items = [(Mat.coerce(a), float(w)) for a, w in pairs]
        if not items:
            raise ValueError("a measure needs at least one atom")
        for _, w in items:
            if not w > 0.0:
                raise ValueError("weights must be positive")
        # union-find style clustering on the merge tolerance
        parent = list(range(len(items)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                if mat_close(items[i][0], items[j][0], MERGE_TOL):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[rj] = ri
        clusters: dict = {}
        for i, (a, w) in enumerate(items):
            clusters.setdefault(find(i), []).append((a, w))
        merged = []
        for members in clusters.values():
            loc = min((a for a, _ in members), key=lambda m: m.flat)
            merged.append((loc, math.fsum(w for _, w in members)))
        merged.sort(key=lambda aw: aw[0].flat)
        return cls(tuple(merged))

    @classmethod
    def dirac(cls, a: Mat) -> "AtomicMeasure":
        return cls(((Mat.coerce(a), 1.0),))

    @classmethod
    def mix(cls, measures: Sequence["AtomicMeasure"],
            weights: Sequence[float]) -> "AtomicMeasure":
        """Convex combination of measures."""
        if len(measures) != len(weights):
            raise ValueError("one weight per measure")
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError("mixture weights must sum to 1")
        pairs = []
        for nu, lam in zip(measures, weights):
            if lam == 0.0:
                continue
            if lam < 0.0:
                raise ValueError("mixture weights must be nonnegative")
            pairs.extend((a, lam * w) for a, w in nu.atoms)
        return cls.from_pairs(pairs)

    # -- basic queries -------------------------------------------------

    @property
    def n(self) -> int:
        return self.atoms[0][0].n

    def total_mass(self) -> float:
        return math.fsum(w for _, w in self.atoms)

    def support(self) -> tuple:
        return tuple(a for a, _ in self.atoms)

    def mass_where(self, predicate: Callable) -> float:
        return math.fsum(w for a, w in self.atoms if predicate(a))

    def to_json_dict(self) -> dict:
        return {"atoms": [{"mat": list(a.flat), "w": w} for a, w in self.atoms]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "AtomicMeasure":
        return cls.from_pairs((Mat.from_flat(e["mat"]), e["w"]) for e in d["atoms"])


# -- pairing and moments -------------------------------------------------


def pair(nu: AtomicMeasure, v) -> float:
    """<nu, v> = sum of w * v(atom).  Propagates math.inf; DomainError
    raised by v passes through untouched."""
    terms = [w * v.evaluate(a) for a, w in nu.atoms]
    return math.fsum(terms)


def first_moment(nu: AtomicMeasure) -> Mat:
    out = Mat.zero(nu.n)
    for a, w in nu.atoms:
        out = out + w * a
    return out


def hat_pushforward(nu: AtomicMeasure) -> AtomicMeasure:
    """Pushforward under matrix inversion.  Requires invertible atoms;
    applying it twice returns the original measure."""
    for a, _ in nu.atoms:
        if not is_invertible(a):
            raise SingularAtom("cannot push a singular atom through inversion")
    return AtomicMeasure.from_pairs((invert(a), w) for a, w in nu.atoms)


def truncate(nu: AtomicMeasure, rho: float, phi) -> AtomicMeasure:
    """Reweight by the rho-ball cut-off and park the removed mass on the
    identity: Phi_rho * nu + (1 - <nu, Phi_rho>) delta_I.

    The result is a probability measure supported in R_{rho+1}; when all
    atoms lie in R_rho it equals nu exactly.
    """
    kind = getattr(phi, "kind", None)
    if kind != "phi_rho" or abs(phi.rho - rho) > 1e-12:
        raise ValueError("phi must be the matching rho-ball cutoff")
    kept = []
    for a, w in nu.atoms:
        f = phi.evaluate(a)
        if f > 0.0:
            kept.append((a, w * f))
    defect = 1.0 - math.fsum(w for _, w in kept)
    if defect > 1e-15:
        kept.append((Mat.identity(nu.n), defect))
    return AtomicMeasure.from_pairs(kept)


def mass_moments(nu: AtomicMeasure, p: float, q: float):
    """(p-moment of |s|, q-moment of |s^-1|) or INFINITE."""
    m1 = 0.0
    m2 = 0.0
    for a, w in nu.atoms:
        if not is_invertible(a):
            return INFINITE
        m1 += w * frob_norm(a) ** p
        m2 += w * frob_norm(invert(a)) ** q
    return (m1, m2)


def inverse_penalty_moment(nu: AtomicMeasure, f: Callable) -> float:
    """<nu, f(s^-1)> for a pluggable penalty f; INFINITE on singular mass.

    This exposes penalties beyond norm powers (for instance determinant
    powers) without claiming any characterization for them.
    """
    total = 0.0
    for a, w in nu.atoms:
        if not is_invertible(a):
            return INFINITE
        total += w * f(invert(a))
    return total


# -- meshes and fields ----------------------------------------------------


def _is_pow2(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh on the unit interval (dim 1) or unit square (dim 2).

    In 2D each grid square is split into two triangles along the
    diagonal from its lower-left to its upper-right corner, so cells
    carry constant gradients of piecewise-affine deformations.  Counts
    per direction are powers of two.
    """

    dim: int
    shape: tuple

    def __post_init__(self):
        if self.dim == 1:
            if len(self.shape) != 1 or not _is_pow2(self.shape[0]):
                raise ValueError("1D mesh needs a power-of-two cell count")
        elif self.dim == 2:
            if len(self.shape) != 2 or not all(_is_pow2(k) for k in self.shape):
                raise ValueError("2D mesh needs power-of-two counts per direction")
        else:
            raise ValueError("mesh dimension must be 1 or 2")

    @classmethod
    def interval(cls, cells: int) -> "Mesh":
        return cls(1, (int(cells),))

    @classmethod
    def square(cls, nx: int, ny: int | None = None) -> "Mesh":
        return cls(2, (int(nx), int(nx if ny is None else ny)))

    @property
    def n_cells(self) -> int:
        if self.dim == 1:
            return self.shape[0]
        return 2 * self.shape[0] * self.shape[1]

    @property
    def cell_volume(self) -> float:
        return 1.0 / self.n_cells

    def interval_bounds(self, c: int) -> tuple:
        if self.dim != 1:
            raise ValueError("interval bounds are a 1D query")
        m = self.shape[0]
        return (c / m, (c + 1) / m)

    def triangle_vertices(self, c: int) -> tuple:
        """Vertices of triangle cell c (2D).  Cell 2*(j*nx+i) is the lower
        triangle of square (i, j), cell 2*(j*nx+i)+1 the upper one."""
        if self.dim != 2:
            raise ValueError("triangle vertices are a 2D query")
        nx, ny = self.shape
        sq, upper = divmod(c, 2)
        j, i = divmod(sq, nx)
        hx, hy = 1.0 / nx, 1.0 / ny
        x0, y0 = i * hx, j * hy
        x1, y1 = x0 + hx, y0 + hy
        if upper:
            return ((x0, y0), (x1, y1), (x0, y1))
        return ((x0, y0), (x1, y0), (x1, y1))

    def to_json_dict(self) -> dict:
        if self.dim == 1:
            return {"dim": 1, "cells": self.shape[0]}
        return {"dim": 2, "cells": list(self.shape)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "Mesh":
        if d["dim"] == 1:
            return cls.interval(d["cells"])
        nx, ny = d["cells"]
        return cls.square(nx, ny)


@dataclass(frozen=True)
class YoungMeasureField:
    """One atomic measure per mesh cell."""

    mesh: Mesh
    measures: tuple

    def __post_init__(self):
        if len(self.measures) != self.mesh.n_cells:
            raise ValueError("need exactly one measure per cell")
        n = self.measures[0].n
        for nu in self.measures:
            if nu.n != n:
                raise ValueError("all cell measures must share one matrix dimension")

    @property
    def matrix_dim(self) -> int:
        return self.measures[0].n

    def to_json_dict(self) -> dict:
        return {"mesh": self.mesh.to_json_dict(),
                "measures": [nu.to_json_dict() for nu in self.measures]}

    @classmethod
    def from_json_dict(cls, d: dict) -> "YoungMeasureField":
        mesh = Mesh.from_json_dict(d["mesh"])
        measures = tuple(AtomicMeasure.from_json_dict(m) for m in d["measures"])
        return cls(mesh, measures)

    @classmethod
    def constant(cls, mesh: Mesh, nu: AtomicMeasure) -> "YoungMeasureField":
        return cls(mesh, (nu,) * mesh.n_cells)


def moment_pq(field: YoungMeasureField, p: float, q: float):
    """Volume-weighted (p, -q) moments of the field, or INFINITE."""
    vol = field.mesh.cell_volume
    m1 = 0.0
    m2 = 0.0
    for nu in field.measures:
        mm = mass_moments(nu, p, q)
        if mm is INFINITE:
            return INFINITE
        m1 += vol * mm[0]
        m2 += vol * mm[1]
    return (m1, m2)


def homogenize(field: YoungMeasureField) -> AtomicMeasure:
    """Volume-weighted mixture of the cell measures.  Pairing against the
    result equals the volume-weighted sum of cell pairings exactly."""
    vol = field.mesh.cell_volume
    pairs = []
    for nu in field.measures:
        pairs.extend((a, vol * w) for a, w in nu.atoms)
    return AtomicMeasure.from_pairs(pairs)


@dataclass(frozen=True)
class ClassReport:
    """Membership report for the invertibility-constrained measure classes."""

    p: float
    q: float
    moment_p: float
    moment_negq: float  # math.inf when singular mass is present
    inv_mass_deficit: float
    positive_det_mass_deficit: float
    in_ypq: bool
    in_ypq_plus: bool

    def __post_init__(self):
        if self.in_ypq and (self.inv_mass_deficit > 0.0
                            or not math.isfinite(self.moment_negq)):
            raise ValueError("inconsistent report: membership with deficit")

    def to_json_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q,
            "moment_p": self.moment_p,
            "moment_negq": self.moment_negq,
            "inv_mass_deficit": self.inv_mass_deficit,
            "positive_det_mass_deficit": self.positive_det_mass_deficit,
            "in_ypq": self.in_ypq,
            "in_ypq_plus": self.in_ypq_plus,
        }


def classify(field: YoungMeasureField, p: float, q: float) -> ClassReport:
    """Decide membership in the invertible-support class (full mass on
    invertible matrices, finite (p, -q) moments) and its orientation-
    preserving refinement (additionally det > 0 almost everywhere)."""
    vol = field.mesh.cell_volume
    inv_deficit = 0.0
    pos_deficit = 0.0
    m1 = 0.0
    m2 = 0.0
    for nu in field.measures:
        for a, w in nu.atoms:
            m1 += vol * w * frob_norm(a) ** p
            if not is_invertible(a):
                inv_deficit += vol * w
                pos_deficit += vol * w
                m2 = math.inf
                continue
            if m2 != math.inf:
                m2 += vol * w * frob_norm(invert(a)) ** q
            if det(a) <= 0.0:
                pos_deficit += vol * w
    in_ypq = inv_deficit == 0.0
    return ClassReport(p, q, m1, m2, inv_deficit, pos_deficit,
                       in_ypq, in_ypq and pos_deficit == 0.0)


def measures_equal(nu: AtomicMeasure, mu: AtomicMeasure, family: Sequence,
                   tol: float = 1e-12) -> bool:
    """Equality through a separating family of vanishing-at-singular test
    functions: true when every pairing difference is within tol."""
    if not family:
        raise ValueError("need a nonempty test family")
    for v in family:
        growth = getattr(v, "growth", None)
        kind_ok = (growth is not None and growth.kind == "C_0inv") or \
                  getattr(v, "kind", None) == "phi_rho"
        if not kind_ok:
            raise ValueError("family members must vanish on singular matrices "
                             "and at infinity")
    for v in family:
        if abs(pair(nu, v) - pair(mu, v)) > tol:
            return False
    return True


def support_in_ball(nu: AtomicMeasure, ball: RhoBall) -> bool:
    return all(ball.contains(a) for a, _ in nu.atoms)
