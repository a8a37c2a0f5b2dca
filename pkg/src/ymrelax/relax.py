"""Relaxed energy minimization over deformation/measure-field pairs.

The discrete relaxation alternates two blocks:

* measures: per mesh cell, the cheapest atomic measure with barycenter
  equal to the cell gradient of the deformation, solved as a small LP
  over the cell's working atom set and enriched by column generation
  (new atoms enter when their dual reduced cost is negative);
* deformation: coordinate descent of the node values against the
  cellwise relaxed cost induced by the working atoms.

Both blocks decrease the energy, so the trace is monotone; the loop
stops when an outer round gains less than the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._search import golden_min
from .errors import Infeasible, Stalled
from .matcore import Mat, RhoBall, frob_norm, in_rho_ball, is_invertible, det
from .measure import (AtomicMeasure, Mesh, YoungMeasureField, classify,
                      first_moment, pair)
from .meshdef import MeshDeformation

REDUCED_COST_TOL = 1e-8
MOMENT_TOL = 1e-8
PIVOT_TOL = 1e-10


@dataclass(frozen=True)
class AdmissibleSet:
    """Matrices a generated atom may use: optional norm cap, optional
    orientation constraint, always invertible."""

    rho_cap: float | None = None
    positive_det: bool = False

    def ok(self, a: Mat) -> bool:
        if self.rho_cap is not None:
            return in_rho_ball(a, RhoBall(self.rho_cap, self.positive_det))
        if not is_invertible(a):
            return False
        return det(a) > 0.0 if self.positive_det else True


# -- dense two-phase simplex -------------------------------------------------


@dataclass(frozen=True)
class LpSolution:
    weights: tuple
    value: float
    dual_moment: tuple
    dual_mass: float
    residual: float
    basis: tuple


def _pivot(tab: np.ndarray, row: int, col: int):
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]


def _bland(tab: np.ndarray, basis: list, costs: np.ndarray, ncols: int,
           max_pivots: int = 20000):
    """Minimize costs over the tableau with Bland's anticycling rule."""
    m = tab.shape[0]
    in_basis = set(basis)
    for _ in range(max_pivots):
        cb = costs[basis]
        red = costs[:ncols] - cb @ tab[:, :ncols]
        enter = -1
        for j in range(ncols):
            if j not in in_basis and red[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return
        leave = -1
        best = None
        for i in range(m):
            a = tab[i, enter]
            if a > PIVOT_TOL:
                ratio = tab[i, -1] / a
                if best is None or ratio < best - 1e-12 or \
                        (abs(ratio - best) <= 1e-12 and basis[i] < basis[leave]):
                    best = ratio
                    leave = i
        if leave < 0:
            raise Infeasible("restricted problem is unbounded")
        in_basis.discard(basis[leave])
        in_basis.add(enter)
        _pivot(tab, leave, enter)
        basis[leave] = enter
    raise Stalled("simplex pivot budget exhausted")


def lp_weights(atoms, target: Mat, costs) -> LpSolution:
    """Cheapest convex combination of the atoms with the given barycenter.

    minimize sum c_i w_i  s.t.  sum w_i atom_i = target, sum w_i = 1,
    w >= 0.  Dense two-phase simplex; duals (dual_moment, dual_mass)
    price the moment and mass constraints so the reduced cost of a
    candidate matrix s is c(s) - dual_moment . s - dual_mass.
    """
    atoms = list(atoms)
    cost_arr = [float(c) for c in costs]
    n = target.n
    keep = [i for i, c in enumerate(cost_arr) if c < math.inf]
    if not keep:
        raise Infeasible("no finite-cost atoms")
    m = n * n + 1
    nk = len(keep)
    a_mat = np.empty((m, nk))
    for col, i in enumerate(keep):
        a_mat[:-1, col] = atoms[i].flat
        a_mat[-1, col] = 1.0
    b = np.array(list(target.flat) + [1.0])

    # phase 1: artificial variables form the starting basis
    sign = np.where(b < 0.0, -1.0, 1.0)
    tab = np.hstack([a_mat * sign[:, None], np.eye(m), (b * sign)[:, None]])
    basis = list(range(nk, nk + m))
    phase1costs = np.concatenate([np.zeros(nk), np.ones(m)])
    _bland(tab, basis, phase1costs, nk + m)
    infeas = float(phase1costs[basis] @ tab[:, -1])
    if infeas > 1e-9:
        raise Infeasible(f"barycenter outside the atom hull "
                         f"(phase-1 residual {infeas:.3e})")
    # drive leftover artificials out of the basis
    drop_rows = []
    for i, bi in enumerate(basis):
        if bi >= nk:
            col = next((j for j in range(nk) if abs(tab[i, j]) > 1e-9), None)
            if col is None:
                drop_rows.append(i)
            else:
                _pivot(tab, i, col)
                basis[i] = col
    if drop_rows:
        keep_rows = [i for i in range(m) if i not in drop_rows]
        tab = tab[keep_rows]
        basis = [basis[i] for i in keep_rows]

    phase2costs = np.concatenate([np.array([cost_arr[i] for i in keep]),
                                  np.zeros(m)])
    _bland(tab, basis, phase2costs, nk)

    weights = [0.0] * len(atoms)
    for i, bi in enumerate(basis):
        if bi < nk:
            weights[keep[bi]] = max(0.0, float(tab[i, -1]))
    value = math.fsum(w * c for w, c in zip(weights, cost_arr) if w > 0.0)

    # duals from the final basis against the original constraint rows
    bmat = np.empty((len(basis), m))
    cb = np.empty(len(basis))
    for i, bi in enumerate(basis):
        bmat[i, :] = a_mat[:, bi] if bi < nk else 0.0
        cb[i] = phase2costs[bi]
    y, *_ = np.linalg.lstsq(bmat, cb, rcond=None)
    resid = a_mat @ np.array([weights[i] for i in keep]) - b
    return LpSolution(tuple(weights), value, tuple(y[:-1]), float(y[-1]),
                      float(np.max(np.abs(resid))), tuple(keep[bi] for bi in basis if bi < nk))


# -- column generation -------------------------------------------------------


def refine_atoms(atoms, dual_moment, dual_mass: float, w, admissible: AdmissibleSet,
                 rng, n: int, starts: int = 16):
    """Search for a matrix with negative reduced cost against the duals.

    Multistart local descent: the identity, the current atoms, and
    random perturbations of the atoms, each polished entrywise by
    golden section at shrinking radii.  Returns (matrix or None,
    best reduced cost found).
    """
    pi = tuple(dual_moment)

    def reduced_flat(flat) -> float:
        mat = Mat.from_flat(flat)
        if not admissible.ok(mat):
            return math.inf
        val = w.evaluate(mat)
        if val == math.inf:
            return math.inf
        return val - math.fsum(p * s for p, s in zip(pi, flat)) - dual_mass

    seeds = [Mat.identity(n).flat] + [a.flat for a in atoms]
    k = 0
    while len(seeds) < starts and atoms:
        base = atoms[k % len(atoms)].flat
        seeds.append(tuple(b + d for b, d in zip(base, rng.normal(0.0, 0.3, n * n))))
        k += 1
    seeds = seeds[:starts]

    best_flat, best_val = None, math.inf
    for seed in seeds:
        cur = list(seed)
        val = reduced_flat(cur)
        for radius in (0.6, 0.2, 0.05):
            for idx in range(n * n):
                x0 = cur[idx]

                def entry_obj(x):
                    trial = cur.copy()
                    trial[idx] = x
                    return reduced_flat(trial)

                xn, fn = golden_min(entry_obj, x0 - radius, x0 + radius,
                                    iters=28, coarse=9)
                if fn < val - 1e-14:
                    cur[idx] = xn
                    val = fn
        if val < best_val:
            best_val, best_flat = val, tuple(cur)

    if best_flat is not None and best_val < -REDUCED_COST_TOL:
        return Mat.from_flat(best_flat), best_val
    return None, best_val


# -- the alternating solver --------------------------------------------------


@dataclass(frozen=True)
class RelaxProblem:
    """Energy, mesh, affine boundary data and growth exponents for the
    discrete relaxation."""

    w: object
    mesh: Mesh
    f: Mat
    p: float = 2.0
    q: float = 2.0
    rho_cap: float | None = None
    positive_det: bool = False
    atom_budget: int = 12
    max_outer: int = 30
    tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        n = self.f.n
        if self.mesh.dim != n:
            raise ValueError("mesh dimension does not match the boundary matrix")
        if self.atom_budget < n * n + 1:
            raise ValueError(f"atom budget must be at least {n * n + 1} "
                             f"for dimension {n}")
        if self.rho_cap is not None and self.rho_cap < math.sqrt(n) - 1e-12:
            raise ValueError("rho_cap below sqrt(n) admits no matrices")
        if not (self.p > 0.0 and self.q > 0.0):
            raise ValueError("growth exponents must be positive")


@dataclass(frozen=True)
class RelaxSolution:
    u_h: MeshDeformation
    field: YoungMeasureField
    energy: float
    iterations: int
    energy_trace: tuple
    moment_residual: float
    kkt_residual: float

    def to_json_dict(self) -> dict:
        return {
            "energy": self.energy,
            "iterations": self.iterations,
            "energy_trace": list(self.energy_trace),
            "moment_residual": self.moment_residual,
            "kkt_residual": self.kkt_residual,
            "u_h": self.u_h.to_json_dict(),
            "field": self.field.to_json_dict(),
        }


def _spanning_atoms(center: Mat, delta: float, admissible: AdmissibleSet,
                    rng) -> list:
    """center plus axis perturbations; inadmissible members get jittered."""
    n = center.n
    out = []
    cands = [center]
    for idx in range(n * n):
        for s in (+1.0, -1.0):
            flat = list(center.flat)
            flat[idx] += s * delta
            cands.append(Mat.from_flat(flat))
    for cand in cands:
        if admissible.ok(cand):
            out.append(cand)
            continue
        for _ in range(12):
            jit = Mat.from_flat(tuple(x + e for x, e in
                                      zip(cand.flat, rng.normal(0.0, 0.1 * delta, n * n))))
            if admissible.ok(jit):
                out.append(jit)
                break
    return out


def _initial_atoms(g: Mat, w, admissible: AdmissibleSet, rng) -> list:
    n = g.n
    base = g if admissible.ok(g) and w.evaluate(g) < math.inf else Mat.identity(n)
    delta = max(0.5, 2.0 * max((abs(a - b) for a, b in
                                zip(g.flat, base.flat)), default=0.0))
    for _ in range(8):
        atoms = _spanning_atoms(base, delta, admissible, rng)
        costs = [w.evaluate(a) for a in atoms]
        finite = [a for a, c in zip(atoms, costs) if c < math.inf]
        if len(finite) >= n * n + 1:
            try:
                lp_weights(finite, g, [w.evaluate(a) for a in finite])
                return finite
            except Infeasible:
                pass
        delta *= 2.0
    raise Stalled("no feasible starting atom set: the cell gradient cannot "
                  "be reached from admissible finite-cost atoms")


def _lower_hull_1d(atoms, costs):
    pts = sorted((a.flat[0], c) for a, c in zip(atoms, costs) if c < math.inf)
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (p[0] - x1) * (y2 - y1) <= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def _hull_eval(hull, x: float) -> float:
    if not hull or x < hull[0][0] - 1e-12 or x > hull[-1][0] + 1e-12:
        return math.inf
    if len(hull) == 1:
        return hull[0][1]
    lo, hi = 0, len(hull) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if hull[mid][0] <= x:
            lo = mid
        else:
            hi = mid
    (x1, y1), (x2, y2) = hull[lo], hull[hi]
    if x2 - x1 < 1e-300:
        return min(y1, y2)
    t = min(1.0, max(0.0, (x - x1) / (x2 - x1)))
    return y1 + t * (y2 - y1)


def relax_solve(problem: RelaxProblem) -> RelaxSolution:
    """Alternating minimization; see the module docstring.

    The returned field satisfies the cellwise barycenter constraint to
    MOMENT_TOL and the final atoms price out to REDUCED_COST_TOL.
    """
    w = problem.w
    mesh = problem.mesh
    n = problem.f.n
    admissible = AdmissibleSet(problem.rho_cap, problem.positive_det)
    vol = mesh.cell_volume
    ncells = mesh.n_cells
    u = MeshDeformation.affine(mesh, problem.f)

    seed_rng = np.random.default_rng([problem.seed, 0])
    grads = u.cell_gradients()
    atoms = [list(_initial_atoms(grads[c], w, admissible, seed_rng))
             for c in range(ncells)]
    costs = [[w.evaluate(a) for a in atoms[c]] for c in range(ncells)]

    def solve_cell(c: int, g: Mat) -> LpSolution:
        return lp_weights(atoms[c], g, costs[c])

    sols = [solve_cell(c, grads[c]) for c in range(ncells)]
    energy = vol * math.fsum(s.value for s in sols)
    trace = [energy]
    last_reduced = [0.0] * ncells

    def add_atom(c: int, mat: Mat, sol: LpSolution) -> bool:
        for a in atoms[c]:
            if frob_norm(a - mat) < 1e-9:
                return False
        if len(atoms[c]) >= problem.atom_budget:
            drop = next((i for i, wgt in enumerate(sol.weights)
                         if wgt <= 1e-14), None)
            if drop is None:
                return False
            atoms[c].pop(drop)
            costs[c].pop(drop)
        atoms[c].append(mat)
        costs[c].append(w.evaluate(mat))
        return True

    outer = 0
    for it in range(1, problem.max_outer + 1):
        outer = it
        # (a) enrich the measures by column generation
        for c in range(ncells):
            for rnd in range(8):
                sol = sols[c]
                rng = np.random.default_rng([problem.seed, it, rnd, c])
                cand, red = refine_atoms(atoms[c], sol.dual_moment,
                                         sol.dual_mass, w, admissible, rng, n)
                last_reduced[c] = red
                if cand is None or not add_atom(c, cand, sol):
                    break
                sols[c] = solve_cell(c, grads[c])
        energy_a = vol * math.fsum(s.value for s in sols)
        trace.append(energy_a)

        # (b) move the deformation against the cellwise relaxed cost
        if n == 1:
            u = _move_nodes_1d(u, atoms, costs, problem)
        else:
            u = _move_nodes_2d(u, atoms, costs, problem)
        grads = u.cell_gradients()
        sols = [solve_cell(c, grads[c]) for c in range(ncells)]
        energy_b = vol * math.fsum(s.value for s in sols)
        trace.append(energy_b)

        if energy - energy_b < problem.tol and it >= 2:
            energy = energy_b
            break
        energy = energy_b

    # refresh the pricing residual against the final deformation
    for c in range(ncells):
        rng = np.random.default_rng([problem.seed, problem.max_outer + 1, 0, c])
        _, red = refine_atoms(atoms[c], sols[c].dual_moment, sols[c].dual_mass,
                              w, admissible, rng, n)
        last_reduced[c] = red

    measures = []
    for c in range(ncells):
        pairs = [(a, wgt) for a, wgt in zip(atoms[c], sols[c].weights)
                 if wgt > 1e-14]
        total = math.fsum(wgt for _, wgt in pairs)
        measures.append(AtomicMeasure.from_pairs(
            (a, wgt / total) for a, wgt in pairs))
    field = YoungMeasureField(mesh, tuple(measures))

    moment_res = max(frob_norm(first_moment(measures[c]) - grads[c])
                     for c in range(ncells))
    if moment_res > MOMENT_TOL:
        raise Stalled(f"barycenter constraint violated by {moment_res:.3e}")
    pair_energy = vol * math.fsum(pair(measures[c], w) for c in range(ncells))
    if abs(pair_energy - energy) > 1e-9 * max(1.0, abs(energy)):
        raise Stalled("energy bookkeeping drifted from the measure pairing")
    report = classify(field, problem.p, problem.q)
    if not report.in_ypq or (problem.positive_det and not report.in_ypq_plus):
        raise Stalled("solution field left the admissible measure class")
    kkt = max(moment_res, max(0.0, -min(last_reduced)))
    return RelaxSolution(u, field, energy, outer, tuple(trace),
                         moment_res, kkt)


def _move_nodes_1d(u: MeshDeformation, atoms, costs,
                   problem: RelaxProblem) -> MeshDeformation:
    cells = u.mesh.shape[0]
    h = 1.0 / cells
    hulls = [_lower_hull_1d(atoms[c], costs[c]) for c in range(cells)]
    vals = np.array(u.values)
    span = max((hull[-1][0] - hull[0][0]) for hull in hulls if hull)
    radius = max(1.0, span) * h
    for _ in range(8):
        improved = 0.0
        for i in range(1, cells):
            yl, yr = vals[i - 1], vals[i + 1]
            hl, hr = hulls[i - 1], hulls[i]

            def local(y):
                return h * (_hull_eval(hl, (y - yl) / h)
                            + _hull_eval(hr, (yr - y) / h))

            cur = local(vals[i])
            yn, fn = golden_min(local, vals[i] - radius, vals[i] + radius,
                                iters=40, coarse=11)
            if fn < cur - 1e-15:
                improved += cur - fn
                vals[i] = yn
        if improved < problem.tol / 10.0:
            break
    return MeshDeformation(u.mesh, vals)


def _move_nodes_2d(u: MeshDeformation, atoms, costs,
                   problem: RelaxProblem) -> MeshDeformation:
    mesh = u.mesh
    nx, ny = mesh.shape
    vals = np.array(u.values)
    incident: dict = {}
    corners = {}
    for c in range(mesh.n_cells):
        pts = mesh.triangle_vertices(c)
        corners[c] = [(round(p[0] * nx), round(p[1] * ny)) for p in pts]
        for i, j in corners[c]:
            incident.setdefault((i, j), []).append(c)

    def cell_grad(c) -> Mat:
        pts = mesh.triangle_vertices(c)
        idx = [j * (nx + 1) + i for i, j in corners[c]]
        y = vals[idx]
        x0, x1, x2 = (np.array(p) for p in pts)
        dx = np.column_stack((x1 - x0, x2 - x0))
        dy = np.column_stack((y[1] - y[0], y[2] - y[0]))
        return Mat.from_flat((dy @ np.linalg.inv(dx)).reshape(-1))

    def cell_value(c) -> float:
        try:
            return lp_weights(atoms[c], cell_grad(c), costs[c]).value
        except Infeasible:
            return math.inf

    radius = 2.0 / max(nx, ny)
    for _ in range(2):
        improved = 0.0
        for j in range(1, ny):
            for i in range(1, nx):
                k = j * (nx + 1) + i
                cells = incident[(i, j)]
                for axis in (0, 1):
                    y0 = float(vals[k, axis])
                    cur = math.fsum(cell_value(c) for c in cells)

                    def obj(y):
                        vals[k, axis] = y
                        out = math.fsum(cell_value(c) for c in cells)
                        vals[k, axis] = y0
                        return out

                    yn, fn = golden_min(obj, y0 - radius, y0 + radius,
                                        iters=20, coarse=7)
                    if fn < cur - 1e-15:
                        improved += cur - fn
                        vals[k, axis] = yn
        if improved < problem.tol / 10.0:
            break
    return MeshDeformation(mesh, vals)
