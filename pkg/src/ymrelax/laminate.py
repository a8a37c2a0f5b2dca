"""Piecewise-affine deformations and laminate generating sequences.

A GradientField is a continuous piecewise-affine deformation whose
gradient is constant on parallel slabs.  In 1D the domain is the unit
interval.  In 2D the domain is the unit square rotated so the slab
normal m is one of its axes: points are t*m + s*m_perp with t, s in
[0, 1].  Pairings of functionals with these fields depend only on slab
widths and gradients, so the rotation is immaterial and keeps volume
fractions of a laminate exact at every oscillation count.

Fine laminates with atom volume fractions equal to prescribed weights
realize an atomic measure as the oscillation limit of the gradients;
verify_generation measures the convergence empirically.  boundary_glue
attaches affine boundary values through a thin transition layer, and
mix_deformations packs scaled copies of two deformations to realize
convex combinations of their gradient statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from ._search import fit_loglog_slope
from .errors import BudgetExceeded, InfeasibleLayer, NotRankOne
from .matcore import (
    Mat,
    RhoBall,
    det,
    frob_norm,
    in_rho_ball,
    invert,
    is_invertible,
    rank_one_difference,
)

JUMP_TOL = 1e-10
MIN_PIECE_WIDTH = 1e-9

# errors below this are float noise from exact constructions, not a
# convergence signal
EXACT_ERROR_TOL = 1e-13


def _perp(m: tuple) -> tuple:
    return (-m[1], m[0])


def _dot(u: Sequence[float], v: Sequence[float]) -> float:
    return math.fsum(a * b for a, b in zip(u, v))


@dataclass(frozen=True, eq=False)
class GradientField:
    """Continuous deformation, affine on parallel slabs of the domain.

    breaks are slab coordinates 0 = t_0 < ... < t_M = 1 along the unit
    normal; piece i carries y(x) = grads[i] x + offsets[i] on the slab
    breaks[i] <= normal . x < breaks[i+1].
    """

    n: int
    normal: tuple
    breaks: tuple
    grads: tuple
    offsets: tuple

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("gradient fields support dimensions 1 and 2")
        m = len(self.grads)
        if len(self.breaks) != m + 1 or len(self.offsets) != m:
            raise ValueError("piece counts are inconsistent")
        if abs(self.breaks[0]) > 1e-14 or abs(self.breaks[-1] - 1.0) > 1e-14:
            raise ValueError("slab coordinates must span [0, 1]")
        for i in range(m):
            if self.breaks[i + 1] - self.breaks[i] <= 0.0:
                raise ValueError("slab widths must be positive")
        if abs(_dot(self.normal, self.normal) - 1.0) > 1e-12:
            raise ValueError("normal must be a unit vector")
        for g in self.grads:
            if g.n != self.n:
                raise ValueError("gradient dimension mismatch")
        for b in self.offsets:
            if len(b) != self.n:
                raise ValueError("offset dimension mismatch")
        self._check_interfaces()

    def _check_interfaces(self):
        scale = max([1.0] + [frob_norm(g) for g in self.grads]
                    + [abs(x) for b in self.offsets for x in b])
        stations = (0.0, 0.5, 1.0) if self.n == 2 else (0.0,)
        perp = _perp(self.normal) if self.n == 2 else None
        for i in range(len(self.grads) - 1):
            t = self.breaks[i + 1]
            dg = self.grads[i + 1] - self.grads[i]
            db = tuple(b1 - b0 for b1, b0 in zip(self.offsets[i + 1], self.offsets[i]))
            # Hadamard condition first: a jump that is not rank one along
            # the normal can never be continuous, and the classified error
            # is the more informative one
            if self.n == 2 and frob_norm(dg) > 1e-13 * scale:
                ro = rank_one_difference(self.grads[i], self.grads[i + 1])
                if ro is None:
                    raise NotRankOne(f"gradient jump at interface {i} is not rank one")
                _, mvec = ro
                if abs(_dot(mvec, self.normal)) < 1.0 - 1e-8:
                    raise NotRankOne(f"gradient jump at interface {i} is rank one "
                                     "along the wrong direction")
            # continuity of the deformation across the interface
            for s in stations:
                if self.n == 1:
                    x = (t,)
                else:
                    x = tuple(t * self.normal[k] + s * perp[k] for k in range(2))
                jump = dg.mul_vec(x)
                err = math.sqrt(math.fsum((j + d) ** 2 for j, d in zip(jump, db)))
                if err > JUMP_TOL * scale:
                    raise ValueError(f"deformation jumps by {err:.3e} at interface {i}")

    # -- construction helpers ------------------------------------------

    @classmethod
    def from_pieces(cls, n: int, normal: Sequence[float], widths: Sequence[float],
                    grads: Sequence[Mat], start_value: Sequence[float] | None = None
                    ) -> "GradientField":
        """Chain offsets so the deformation is continuous, starting from
        y(0) = start_value (default 0).  Gradient jumps must be rank one
        along the normal; zero-width pieces are dropped."""
        normal = tuple(float(x) for x in normal)
        kept = [(float(w), g) for w, g in zip(widths, grads) if w > 0.0]
        if not kept:
            raise ValueError("need at least one piece")
        b = tuple(float(x) for x in (start_value or (0.0,) * n))
        breaks = [0.0]
        offsets = [b]
        out_grads = []
        t = 0.0
        for w, g in kept:
            t += w
            breaks.append(t)
            out_grads.append(g)
        # accumulated width must land on 1; snap the float dust
        total = breaks[-1]
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"piece widths sum to {total!r}, not 1")
        breaks[-1] = 1.0
        for i in range(len(out_grads) - 1):
            ti = breaks[i + 1]
            dg = out_grads[i + 1] - out_grads[i]
            a = dg.mul_vec(normal)
            prev = offsets[i]
            offsets.append(tuple(pb - ti * ak for pb, ak in zip(prev, a)))
        return cls(n, normal, tuple(breaks), tuple(out_grads), tuple(offsets))

    @classmethod
    def from_slopes_1d(cls, slopes: Sequence[float], widths: Sequence[float],
                       y0: float = 0.0) -> "GradientField":
        return cls.from_pieces(1, (1.0,), widths,
                               [Mat.scalar(s) for s in slopes], (y0,))

    @classmethod
    def affine(cls, f: Mat, normal: Sequence[float] | None = None) -> "GradientField":
        n = f.n
        nm = tuple(normal) if normal is not None else ((1.0,) if n == 1 else (1.0, 0.0))
        return cls(n, nm, (0.0, 1.0), (f,), ((0.0,) * n,))

    # -- geometry -------------------------------------------------------

    @property
    def pieces(self) -> int:
        return len(self.grads)

    @property
    def widths(self) -> tuple:
        return tuple(self.breaks[i + 1] - self.breaks[i] for i in range(self.pieces))

    def piece_midpoint(self, i: int) -> tuple:
        tm = 0.5 * (self.breaks[i] + self.breaks[i + 1])
        if self.n == 1:
            return (tm,)
        perp = _perp(self.normal)
        return tuple(tm * self.normal[k] + 0.5 * perp[k] for k in range(2))

    def piece_index(self, t: float) -> int:
        if t < -1e-12 or t > 1.0 + 1e-12:
            raise ValueError("slab coordinate outside the domain")
        t = min(max(t, 0.0), 1.0)
        lo, hi = 0, self.pieces - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if t < self.breaks[mid + 1]:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def value(self, x: Sequence[float]) -> tuple:
        i = self.piece_index(_dot(self.normal, x))
        gx = self.grads[i].mul_vec(x)
        return tuple(g + b for g, b in zip(gx, self.offsets[i]))

    def gradient_at(self, x: Sequence[float]) -> Mat:
        return self.grads[self.piece_index(_dot(self.normal, x))]

    # -- summaries ------------------------------------------------------

    def sup_norm(self) -> float:
        return max(frob_norm(g) for g in self.grads)

    def sup_inv_norm(self) -> float:
        worst = 0.0
        for g in self.grads:
            if not is_invertible(g):
                return math.inf
            worst = max(worst, frob_norm(invert(g)))
        return worst

    def min_det(self) -> float:
        return min(det(g) for g in self.grads)

    def to_csv_rows(self) -> list:
        rows = [["piece", "t_lo", "t_hi"]
                + [f"g{i}{j}" for i in range(self.n) for j in range(self.n)]]
        for i, g in enumerate(self.grads):
            rows.append([i, self.breaks[i], self.breaks[i + 1]] + list(g.flat))
        return rows

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "normal": list(self.normal),
            "breaks": list(self.breaks),
            "grads": [list(g.flat) for g in self.grads],
            "offsets": [list(b) for b in self.offsets],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GradientField":
        return cls(d["n"], tuple(d["normal"]), tuple(d["breaks"]),
                   tuple(Mat.from_flat(g) for g in d["grads"]),
                   tuple(tuple(b) for b in d["offsets"]))


# -- laminate sequences ---------------------------------------------------


@dataclass(frozen=True)
class BoundaryDatum:
    """Affine boundary condition with a transition layer budget."""

    f: Mat
    layer_width: float
    epsilon: float


@dataclass(frozen=True)
class SequenceSpec:
    """Oscillation recipe: atoms with weights, k periods per unit length."""

    atoms: tuple
    weights: tuple
    k: int
    boundary: BoundaryDatum | None = None

    def __post_init__(self):
        if len(self.atoms) != len(self.weights) or not self.atoms:
            raise ValueError("need matching nonempty atoms and weights")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if any(not w > 0.0 for w in self.weights):
            raise ValueError("weights must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        n = self.atoms[0].n
        for a in self.atoms:
            if a.n != n:
                raise ValueError("atoms must share one dimension")

    def limit_measure(self):
        from .measure import AtomicMeasure
        return AtomicMeasure.from_pairs(zip(self.atoms, self.weights))


def _laminate_normal(atoms: Sequence[Mat], periodic: bool) -> tuple:
    """Common jump normal of consecutive atoms (wrapping when periodic)."""
    n = atoms[0].n
    if n == 1:
        return (1.0,)
    pairs = list(zip(atoms, atoms[1:]))
    if periodic and len(atoms) > 1:
        pairs.append((atoms[-1], atoms[0]))
    normal = None
    for a, b in pairs:
        if frob_norm(b - a) <= 1e-13:
            continue
        ro = rank_one_difference(a, b)
        if ro is None:
            raise NotRankOne("consecutive atoms differ by a higher-rank matrix")
        _, m = ro
        if normal is None:
            normal = m
        elif abs(_dot(normal, m)) < 1.0 - 1e-9:
            raise NotRankOne("consecutive atoms jump along different normals")
    return normal if normal is not None else ((1.0, 0.0) if n == 2 else (1.0,))


def build_laminate_sequence(spec: SequenceSpec) -> GradientField:
    """Fine laminate with k periods; every atom occupies volume fraction
    equal to its weight, exactly, at every k."""
    atoms = spec.atoms
    n = atoms[0].n
    if n not in (1, 2):
        raise ValueError("laminate construction supports dimensions 1 and 2")
    normal = _laminate_normal(atoms, periodic=spec.k > 1)
    if min(spec.weights) / spec.k < MIN_PIECE_WIDTH:
        raise BudgetExceeded(f"k={spec.k} drives slab widths below resolution")
    widths = []
    grads = []
    for _ in range(spec.k):
        for a, w in zip(atoms, spec.weights):
            widths.append(w / spec.k)
            grads.append(a)
    return GradientField.from_pieces(n, normal, widths, grads)


# -- empirical pairings ----------------------------------------------------


WEIGHT_FUNCTIONS: dict = {
    "one": lambda x: 1.0,
    "x1": lambda x: x[0],
    "x1_squared": lambda x: x[0] * x[0],
    "sin1": lambda x: math.sin(2.0 * math.pi * x[0]),
}


def empirical_pairing(field: GradientField, v, g: Callable) -> float:
    """Integral of v(grad y) g(x) over the domain: exact in the gradient
    factor, midpoint quadrature per slab for the spatial weight."""
    total = []
    for i in range(field.pieces):
        w = field.breaks[i + 1] - field.breaks[i]
        total.append(w * v.evaluate(field.grads[i]) * g(field.piece_midpoint(i)))
    return math.fsum(total)


def integrate_weight(g: Callable, n: int, normal: Sequence[float],
                     resolution: int = 8192) -> float:
    """Midpoint quadrature of the spatial weight over the domain."""
    if n == 1:
        h = 1.0 / resolution
        return math.fsum(g(((i + 0.5) * h,)) for i in range(resolution)) * h
    side = 128
    perp = _perp(tuple(normal))
    h = 1.0 / side
    acc = []
    for i in range(side):
        t = (i + 0.5) * h
        for j in range(side):
            s = (j + 0.5) * h
            x = tuple(t * normal[k] + s * perp[k] for k in range(2))
            acc.append(g(x))
    return math.fsum(acc) * h * h


@dataclass(frozen=True)
class GenerationEntry:
    """Convergence record for one (test function, weight) pair."""

    v_description: str
    g_name: str
    limit: float
    errors: tuple  # ((k, |empirical - limit|), ...)
    slope: float | None
    exact: bool
    decaying: bool

    def to_json_dict(self) -> dict:
        return {"v": self.v_description, "g": self.g_name, "limit": self.limit,
                "errors": [[k, e] for k, e in self.errors],
                "slope": self.slope, "exact": self.exact, "decaying": self.decaying}


@dataclass(frozen=True)
class GenerationReport:
    """verify_generation output: per-pair errors plus uniform bounds on
    the built sequence (norm, inverse norm, determinant sign)."""

    k_ladder: tuple
    entries: tuple
    sup_norm: float
    sup_inv_norm: float
    min_det: float
    det_positive: bool

    def all_decaying(self) -> bool:
        return all(e.decaying for e in self.entries)

    def to_json_dict(self) -> dict:
        return {
            "k_ladder": list(self.k_ladder),
            "entries": [e.to_json_dict() for e in self.entries],
            "sup_norm": self.sup_norm,
            "sup_inv_norm": self.sup_inv_norm,
            "min_det": self.min_det,
            "det_positive": self.det_positive,
        }


def verify_generation(spec: SequenceSpec, v_battery: Sequence,
                      g_battery: Sequence, k_ladder: Sequence[int],
                      threads: int = 1) -> GenerationReport:
    """Compare empirical pairings of the k-laminates against the limit
    measure pairing, for every (v, g) combination.

    Errors at float precision (below EXACT_ERROR_TOL) are flagged exact;
    they arise when the quadrature happens to integrate g exactly and do
    not carry a decay rate.
    """
    ks = sorted(set(int(k) for k in k_ladder))
    fields = [build_laminate_sequence(
        SequenceSpec(spec.atoms, spec.weights, k, None)) for k in ks]
    gs = []
    for name in g_battery:
        if isinstance(name, str):
            if name not in WEIGHT_FUNCTIONS:
                raise ValueError(f"unknown spatial weight {name!r}; "
                                 f"known: {sorted(WEIGHT_FUNCTIONS)}")
            gs.append((name, WEIGHT_FUNCTIONS[name]))
        else:
            gs.append(name)
    normal = fields[0].normal
    n = spec.atoms[0].n

    g_integrals = {gname: integrate_weight(g, n, normal) for gname, g in gs}
    atom_pairs = list(zip(spec.atoms, spec.weights))

    def run_pair(v, gname, g):
        limit = math.fsum(w * v.evaluate(a) for a, w in atom_pairs) * g_integrals[gname]
        errs = []
        for k, field in zip(ks, fields):
            emp = empirical_pairing(field, v, g)
            errs.append((k, abs(emp - limit)))
        slope = fit_loglog_slope([(k, e) for k, e in errs if e > EXACT_ERROR_TOL])
        exact = all(e <= EXACT_ERROR_TOL for _, e in errs)
        decaying = exact or (slope is not None and slope <= -0.5)
        return GenerationEntry(v.description or "v", gname, limit,
                               tuple(errs), slope, exact, decaying)

    jobs = [(v, gname, g) for v in v_battery for gname, g in gs]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(lambda args: run_pair(*args), jobs))
    else:
        entries = [run_pair(*args) for args in jobs]

    sup = max(f.sup_norm() for f in fields)
    sup_inv = max(f.sup_inv_norm() for f in fields)
    mdet = min(f.min_det() for f in fields)
    return GenerationReport(tuple(ks), tuple(entries), sup, sup_inv,
                            mdet, mdet > 0.0)


# -- boundary gluing --------------------------------------------------------


@dataclass(frozen=True)
class GlueReport:
    """What the transition layer did to the field."""

    modified_volume: float
    alpha: float
    cap: float
    sup_norm: float
    sup_inv_norm: float
    min_det: float
    layer_gradients: tuple
    boundary_mismatch: float
    orientation_preserved: bool

    def to_json_dict(self) -> dict:
        return {
            "modified_volume": self.modified_volume,
            "alpha": self.alpha,
            "cap": self.cap,
            "sup_norm": self.sup_norm,
            "sup_inv_norm": self.sup_inv_norm,
            "min_det": self.min_det,
            "layer_gradients": [list(g.flat) for g in self.layer_gradients],
            "boundary_mismatch": self.boundary_mismatch,
            "orientation_preserved": self.orientation_preserved,
        }


def _restrict_pieces(field: GradientField, lo: float, hi: float) -> list:
    """Pieces of the field clipped to [lo, hi]: (t0, t1, grad, offset)."""
    out = []
    for i in range(field.pieces):
        a, b = field.breaks[i], field.breaks[i + 1]
        t0, t1 = max(a, lo), min(b, hi)
        if t1 - t0 > 1e-15:
            out.append((t0, t1, field.grads[i], field.offsets[i]))
    return out


def _layer_is_affine(field: GradientField, f: Mat, lo: float, hi: float) -> bool:
    scale = max(1.0, frob_norm(f))
    for _, _, g, b in _restrict_pieces(field, lo, hi):
        if frob_norm(g - f) > 1e-12 * scale:
            return False
        if math.sqrt(math.fsum(x * x for x in b)) > 1e-12 * scale:
            return False
    return True


def _alpha_of(field: GradientField) -> float:
    worst = 0.0
    for g in field.grads:
        if not is_invertible(g):
            raise InfeasibleLayer("an interior gradient is singular; no slope "
                                  "cap bounds the field")
        worst = max(worst, frob_norm(g), frob_norm(invert(g)))
    return worst


def _two_slope_layer(disp: float, width: float, cap: float) -> list:
    """Split a layer of the given width into slopes +-cap realizing the
    displacement exactly.  Returns [(width, slope), ...]."""
    avg = disp / width
    if abs(avg) > cap * (1.0 + 1e-12):
        raise InfeasibleLayer(f"layer needs average slope {avg:.6g}, "
                              f"cap is {cap:.6g}; shrink the layer or raise epsilon")
    theta = 0.5 * (1.0 + min(1.0, max(-1.0, avg / cap)))
    out = []
    if theta > 0.0:
        out.append((theta * width, cap))
    if theta < 1.0:
        out.append(((1.0 - theta) * width, -cap))
    return out


def boundary_glue(field: GradientField, f: Mat, layer_width: float,
                  epsilon: float):
    """Impose the affine boundary condition y = F x through transition
    layers of the given width at both ends of the slab direction.

    1D: exact.  The layer uses the two slopes +-(alpha + epsilon), the
    scaled one-dimensional orthogonal set, chosen to match endpoint
    displacements; endpoint values are exact and the interior is
    untouched.  Orientation is generally not preserved inside the layer.

    2D: approximate.  One affine band per end matches the interior trace
    and the boundary value on the two slab-end edges exactly; on the two
    lateral edges the residual oscillation remains and its sup is
    reported as boundary_mismatch.  Band gradients must stay in the
    (alpha + epsilon)-ball or InfeasibleLayer is raised.
    """
    if not 0.0 < layer_width < 0.5:
        raise ValueError("layer width must sit in (0, 1/2)")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if f.n != field.n:
        raise ValueError("boundary matrix dimension mismatch")
    alpha = _alpha_of(field)
    if frob_norm(f) > alpha + 1e-12:
        raise InfeasibleLayer(f"|F| = {frob_norm(f):.6g} exceeds the interior "
                              f"bound alpha = {alpha:.6g}")
    cap = alpha + epsilon
    w = layer_width

    if field.n == 1:
        return _glue_1d(field, f, w, cap, alpha)
    return _glue_2d(field, f, w, cap, alpha)


def _glue_1d(field: GradientField, f: Mat, w: float, cap: float, alpha: float):
    fs = f.flat[0]
    do_left = not _layer_is_affine(field, f, 0.0, w)
    do_right = not _layer_is_affine(field, f, 1.0 - w, 1.0)
    if not (do_left or do_right):
        report = GlueReport(0.0, alpha, cap, field.sup_norm(), field.sup_inv_norm(),
                            field.min_det(), (), 0.0, field.min_det() > 0.0)
        return field, report

    mid_lo = w if do_left else 0.0
    mid_hi = 1.0 - w if do_right else 1.0
    middle = _restrict_pieces(field, mid_lo, mid_hi)
    layer_grads = []

    pieces = []  # (t0, t1, grad, offset)
    if do_left:
        y_at_w = field.value((w,))[0]
        t = 0.0
        b = 0.0
        for width, slope in _two_slope_layer(y_at_w, w, cap):
            pieces.append((t, t + width, Mat.scalar(slope), (b - slope * t,)))
            b = b + slope * width
            t += width
            layer_grads.append(Mat.scalar(slope))
    pieces.extend(middle)
    if do_right:
        y_in = field.value((1.0 - w,))[0]
        t = 1.0 - w
        val = y_in
        for width, slope in _two_slope_layer(fs - y_in, w, cap):
            pieces.append((t, t + width, Mat.scalar(slope), (val - slope * t,)))
            val = val + slope * width
            t += width
            layer_grads.append(Mat.scalar(slope))

    glued = _assemble(1, (1.0,), pieces)
    mismatch = max(abs(glued.value((0.0,))[0]), abs(glued.value((1.0,))[0] - fs))
    report = GlueReport((w if do_left else 0.0) + (w if do_right else 0.0),
                        alpha, cap, glued.sup_norm(), glued.sup_inv_norm(),
                        glued.min_det(), tuple(layer_grads), mismatch,
                        glued.min_det() > 0.0)
    return glued, report


def _glue_2d(field: GradientField, f: Mat, w: float, cap: float, alpha: float):
    m = field.normal
    perp = _perp(m)
    g_tan = field.grads[0].mul_vec(perp)
    f_tan = f.mul_vec(perp)
    tan_err = math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(g_tan, f_tan)))
    if tan_err > 1e-9 * max(1.0, frob_norm(f)):
        raise InfeasibleLayer("boundary matrix acts differently on the lateral "
                              f"direction than the field (mismatch {tan_err:.3e}); "
                              "no slab-wise transition band exists")
    ball = RhoBall(cap)
    do_left = not _layer_is_affine(field, f, 0.0, w)
    do_right = not _layer_is_affine(field, f, 1.0 - w, 1.0)
    if not (do_left or do_right):
        report = GlueReport(0.0, alpha, cap, field.sup_norm(), field.sup_inv_norm(),
                            field.min_det(), (), 0.0, field.min_det() > 0.0)
        return field, report

    mid_lo = w if do_left else 0.0
    mid_hi = 1.0 - w if do_right else 1.0
    middle = _restrict_pieces(field, mid_lo, mid_hi)
    layer_grads = []
    pieces = []

    if do_left:
        _, _, g1, b1 = middle[0]
        band = g1 + Mat.outer(tuple(x / w for x in b1), m)
        if not in_rho_ball(band, ball):
            raise InfeasibleLayer(f"left band gradient leaves the {cap:.4g}-ball "
                                  f"(|G| = {frob_norm(band):.4g})")
        pieces.append((0.0, w, band, (0.0, 0.0)))
        layer_grads.append(band)
    pieces.extend(middle)
    if do_right:
        _, _, ge, be = middle[-1]
        fm = f.mul_vec(m)
        gem = ge.mul_vec(m)
        c = tuple((fm[i] - gem[i] - be[i]) / w for i in range(2))
        band = ge + Mat.outer(c, m)
        bb = tuple(be[i] - (1.0 - w) * c[i] for i in range(2))
        if not in_rho_ball(band, ball):
            raise InfeasibleLayer(f"right band gradient leaves the {cap:.4g}-ball "
                                  f"(|G| = {frob_norm(band):.4g})")
        pieces.append((1.0 - w, 1.0, band, bb))
        layer_grads.append(band)

    glued = _assemble(2, m, pieces)
    mismatch = _lateral_mismatch(glued, f)
    report = GlueReport((w if do_left else 0.0) + (w if do_right else 0.0),
                        alpha, cap, glued.sup_norm(), glued.sup_inv_norm(),
                        glued.min_det(), tuple(layer_grads), mismatch,
                        glued.min_det() > 0.0)
    return glued, report


def _assemble(n: int, normal: tuple, pieces: list) -> GradientField:
    pieces = sorted(pieces, key=lambda p: p[0])
    breaks = [pieces[0][0]] + [p[1] for p in pieces]
    breaks[0], breaks[-1] = 0.0, 1.0
    return GradientField(n, tuple(normal), tuple(breaks),
                         tuple(p[2] for p in pieces), tuple(p[3] for p in pieces))


def _lateral_mismatch(field: GradientField, f: Mat) -> float:
    """sup |y - Fx| over the whole domain boundary, sampled at piece corners."""
    m = field.normal
    perp = _perp(m)
    worst = 0.0
    for i in range(field.pieces):
        for t in (field.breaks[i], field.breaks[i + 1]):
            for s in (0.0, 1.0):
                x = tuple(t * m[k] + s * perp[k] for k in range(2))
                y = field.value(x)
                fx = f.mul_vec(x)
                worst = max(worst, math.sqrt(math.fsum(
                    (a - b) ** 2 for a, b in zip(y, fx))))
    # slab-end edges
    for t in (0.0, 1.0):
        for s in (0.0, 0.5, 1.0):
            x = tuple(t * m[k] + s * perp[k] for k in range(2))
            y = field.value(x)
            fx = f.mul_vec(x)
            worst = max(worst, math.sqrt(math.fsum(
                (a - b) ** 2 for a, b in zip(y, fx))))
    return worst


# -- convex mixing by scaled copies -----------------------------------------


def mix_deformations(y1: GradientField, y2: GradientField, lam: float,
                     depth: int = 6):
    """Pack scaled copies of y1 on a fraction lam of the interval and of
    y2 on the rest, dyadically to the given depth; the unpacked residual
    (volume fraction 2^-depth) carries the shared affine map.

    Both inputs must be one-dimensional and share the same affine
    boundary datum.  Returns (field, residual_fraction); gradient
    statistics of the result match the lam-mixture of the inputs up to
    the reported residual.
    """
    if y1.n != 1 or y2.n != 1:
        raise ValueError("deformation mixing is implemented on the interval only")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must sit in [0, 1]")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    a1 = y1.value((1.0,))[0] - y1.value((0.0,))[0]
    a2 = y2.value((1.0,))[0] - y2.value((0.0,))[0]
    if abs(a1 - a2) > 1e-10 * max(1.0, abs(a1)):
        raise ValueError("inputs carry different affine boundary data")
    slope = a1

    def copy_pieces(y: GradientField, h: float, out: list):
        for i in range(y.pieces):
            out.append((h * (y.breaks[i + 1] - y.breaks[i]), y.grads[i]))

    widths_grads: list = []
    for y, span in ((y1, lam), (y2, 1.0 - lam)):
        if span <= 0.0:
            continue
        used = 0.0
        for j in range(1, depth + 1):
            h = span * (0.5 ** j)
            copy_pieces(y, h, widths_grads)
            used += h
        widths_grads.append((span - used, Mat.scalar(slope)))  # residual

    residual = 0.5 ** depth
    widths = [w for w, _ in widths_grads if w > 0.0]
    grads = [g for w, g in widths_grads if w > 0.0]
    field = GradientField.from_pieces(1, (1.0,), widths, grads,
                                      (y1.value((0.0,))[0],))
    return field, residual
