"""Test functions, cut-offs and the builtin energy library.

A TestFn pairs an evaluator on matrices with a declared growth class:

* C_p        -- continuous everywhere, |v(s)| controlled by |s|^p
* C_pmp      -- continuous on invertibles, controlled by |s|^p + |s^-1|^p;
                evaluation at a singular matrix raises DomainError
* C_0inv     -- continuous, vanishes on singular matrices and at infinity
* O_rho      -- finite and continuous on the rho ball, +inf outside it

Infinite values are returned as math.inf (a distinguished value, never a
large float stand-in).  Cut-off transitions use the quintic smoothstep,
which is C^2 and monotone on [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, UnknownEnergy
from .matcore import (
    Mat,
    RhoBall,
    det,
    frob_norm,
    in_rho_ball,
    invert,
    is_invertible,
)


@dataclass(frozen=True)
class Growth:
    """Declared growth class of a test function."""

    kind: str  # "C_p" | "C_pmp" | "C_0inv" | "O_rho"
    param: float | None = None

    _KINDS = ("C_p", "C_pmp", "C_0inv", "O_rho")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown growth kind {self.kind!r}")
        if self.kind in ("C_p", "C_pmp", "O_rho") and self.param is None:
            raise ValueError(f"growth class {self.kind} needs a parameter")

    @classmethod
    def c_p(cls, p: float) -> "Growth":
        return cls("C_p", float(p))

    @classmethod
    def c_pmp(cls, p: float) -> "Growth":
        return cls("C_pmp", float(p))

    @classmethod
    def c_0inv(cls) -> "Growth":
        return cls("C_0inv")

    @classmethod
    def o_rho(cls, rho: float) -> "Growth":
        return cls("O_rho", float(rho))


@dataclass(frozen=True)
class TestFn:
    """Matrix test function with declared growth."""

    evaluate: Callable
    growth: Growth
    description: str = ""

    def __call__(self, a: Mat) -> float:
        return self.evaluate(a)


@dataclass(frozen=True)
class CutoffFn:
    """Cut-off with its construction parameters kept inspectable."""

    kind: str  # "phi_rho" | "det_zero" | "det_plus"
    evaluate: Callable
    rho: float | None = None
    epsilon: float | None = None
    description: str = ""

    def __call__(self, a: Mat) -> float:
        return self.evaluate(a)

    def to_testfn(self) -> TestFn:
        growth = Growth.c_0inv() if self.kind == "phi_rho" else Growth.c_p(1.0)
        return TestFn(self.evaluate, growth, self.description)


def smoothstep(u: float) -> float:
    """Quintic smoothstep: 0 below 0, 1 above 1, 6u^5-15u^4+10u^3 between."""
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0)


def _theta(t: float, rho: float) -> float:
    """Radial profile: 1 for t <= rho, 0 for t >= rho + 1, smooth between."""
    return 1.0 - smoothstep(t - rho)


def make_phi_rho(rho: float) -> CutoffFn:
    """Cut-off equal to 1 on R_rho, 0 outside R_{rho+1}, 0 on singular
    matrices.  Built as the product of radial profiles of |s| and |s^-1|,
    hence symmetric under inversion."""
    if not rho > 0.0:
        raise ValueError("rho must be positive")

    def evaluate(a: Mat) -> float:
        if not is_invertible(a):
            return 0.0
        t1 = _theta(frob_norm(a), rho)
        if t1 == 0.0:
            return 0.0
        t2 = _theta(frob_norm(invert(a)), rho)
        return t1 * t2

    return CutoffFn("phi_rho", evaluate, rho=float(rho),
                    description=f"rho-ball cutoff, quintic transition on [{rho}, {rho + 1}]")


def make_det_cutoff(epsilon: float, signed: bool) -> CutoffFn:
    """Determinant cut-off.

    Unsigned: 1 where det = 0, 0 where |det| >= epsilon.
    Signed:   1 where det <= 0, 0 where det >= epsilon.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")

    if signed:
        def evaluate(a: Mat) -> float:
            return 1.0 - smoothstep(det(a) / epsilon)
        kind = "det_plus"
        desc = f"signed determinant cutoff, transition on (0, {epsilon})"
    else:
        def evaluate(a: Mat) -> float:
            return 1.0 - smoothstep(abs(det(a)) / epsilon)
        kind = "det_zero"
        desc = f"unsigned determinant cutoff, transition on (0, {epsilon})"

    return CutoffFn(kind, evaluate, epsilon=float(epsilon), description=desc)


def orho_extend(core, rho: float, description: str = "") -> TestFn:
    """Extend a finite integrand by +inf outside the rho ball.

    The evaluator of a TestFn (or any callable on Mat) is kept on R_rho
    and replaced by math.inf elsewhere, producing an O_rho-class TestFn.
    """
    ball = RhoBall(rho)
    inner = core.evaluate if isinstance(core, TestFn) else core
    if not description:
        base = core.description if isinstance(core, TestFn) else "integrand"
        description = f"{base}, +inf outside the {rho}-ball"

    def evaluate(a: Mat) -> float:
        if not in_rho_ball(a, ball):
            return math.inf
        return inner(a)

    return TestFn(evaluate, Growth.o_rho(rho), description)


# -- builtin energies ---------------------------------------------------


def _inv_penalty(p: float):
    def evaluate(a: Mat) -> float:
        if not is_invertible(a):
            return math.inf
        return frob_norm(a) ** p + frob_norm(invert(a)) ** p
    return evaluate


def _double_well(well_a: Mat, well_b: Mat, p: float, gamma: float):
    def evaluate(a: Mat) -> float:
        if not is_invertible(a):
            return math.inf
        da = frob_norm(a - well_a)
        db = frob_norm(a - well_b)
        w = min(da * da, db * db)
        if gamma != 0.0:
            w += gamma * frob_norm(invert(a)) ** p
        return w
    return evaluate


def builtin_energy(name: str, params: dict | None = None) -> TestFn:
    """Energy library.  All members are +inf on singular matrices and sit
    inside the two-sided sandwich c(-1 + |s|^p + |s^-1|^p) <= W <=
    c'(1 + |s|^p + |s^-1|^p) for the exponents stated in the description.
    """
    params = dict(params or {})

    def take(key, default):
        return params.pop(key, default)

    if name == "inv_penalty":
        p = float(take("p", 2.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for inv_penalty: {sorted(params)}")
        if not p > 0.0:
            raise UnknownEnergy("inv_penalty needs p > 0")
        return TestFn(_inv_penalty(p), Growth.c_pmp(p),
                      f"|s|^{p:g} + |s^-1|^{p:g}, sandwich constants c=c'=1")

    if name == "double_well_inv":
        wells = take("wells", (1.0, -1.0))
        p = float(take("p", 2.0))
        gamma = float(take("gamma", 0.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for double_well_inv: {sorted(params)}")
        if len(wells) != 2:
            raise UnknownEnergy("double_well_inv needs exactly two wells")
        wa = Mat.coerce(wells[0])
        wb = Mat.coerce(wells[1], n=wa.n)
        if gamma < 0.0:
            raise UnknownEnergy("double_well_inv needs gamma >= 0")
        desc = (f"two-well distance energy, wells at {list(wa.flat)} and {list(wb.flat)}, "
                f"inverse coupling {gamma:g}*|s^-1|^{p:g}; "
                f"sandwich exponents (2, -{p:g}) with c=min(1/2, gamma), c'=2+gamma+2*max well norm^2")
        return TestFn(_double_well(wa, wb, p, gamma), Growth.c_pmp(max(2.0, p)), desc)

    if name == "shear_well_2d":
        kappa = float(take("kappa", 1.0))
        gamma = float(take("gamma", 0.0))
        p = float(take("p", 2.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for shear_well_2d: {sorted(params)}")
        wa = Mat.identity(2)
        wb = Mat.from_rows([[1.0, kappa], [0.0, 1.0]])
        desc = (f"planar shear wells I and I + {kappa:g} e1(x)e2, "
                f"inverse coupling {gamma:g}*|s^-1|^{p:g}; sandwich exponents (2, -{p:g})")
        return TestFn(_double_well(wa, wb, p, gamma), Growth.c_pmp(max(2.0, p)), desc)

    raise UnknownEnergy(f"no builtin energy named {name!r}")


# -- named plain test functions (used by batteries and the CLI) ---------


def named_testfn(kind: str, params: dict | None = None) -> TestFn:
    """Small registry of plain test functions addressable by name."""
    params = dict(params or {})
    if kind == "energy":
        name = params.pop("name")
        return builtin_energy(name, params.pop("params", None) or params or None)
    if kind == "frob_power":
        p = float(params.pop("p", 2.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for frob_power: {sorted(params)}")
        return TestFn(lambda a, _p=p: frob_norm(a) ** _p, Growth.c_p(p + 1.0),
                      f"|s|^{p:g}")
    if kind == "det":
        if params:
            raise UnknownEnergy(f"unexpected parameters for det: {sorted(params)}")
        return TestFn(det, Growth.c_p(3.0), "det s")
    if kind == "phi_rho":
        rho = float(params.pop("rho", 2.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for phi_rho: {sorted(params)}")
        return make_phi_rho(rho).to_testfn()
    if kind == "entry_power":
        k = int(params.pop("exponent", 2))
        if params:
            raise UnknownEnergy(f"unexpected parameters for entry_power: {sorted(params)}")

        def evaluate(a: Mat, _k=k) -> float:
            if a.n != 1:
                raise DomainError("entry_power is a 1D test function")
            return a.flat[0] ** _k
        return TestFn(evaluate, Growth.c_p(float(k + 1)), f"s^{k} (1D)")
    if kind == "quartic_well_1d":
        if params:
            raise UnknownEnergy(f"unexpected parameters for quartic_well_1d: {sorted(params)}")

        def evaluate(a: Mat) -> float:
            if a.n != 1:
                raise DomainError("quartic_well_1d is a 1D test function")
            s = a.flat[0]
            return (s * s - 1.0) ** 2
        return TestFn(evaluate, Growth.c_p(5.0), "(s^2 - 1)^2 (1D)")
    if kind == "inv_power":
        q = float(params.pop("q", 2.0))
        if params:
            raise UnknownEnergy(f"unexpected parameters for inv_power: {sorted(params)}")

        def evaluate(a: Mat, _q=q) -> float:
            if not is_invertible(a):
                raise DomainError("inv_power is undefined on singular matrices")
            return frob_norm(invert(a)) ** _q
        return TestFn(evaluate, Growth.c_pmp(q), f"|s^-1|^{q:g}")
    raise UnknownEnergy(f"no named test function of kind {kind!r}")


# -- growth verification -------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    """Sampled growth diagnosis for a declared class."""

    declared: Growth
    max_ratio: float
    scale_ratios: tuple  # (scale, mean ratio) pairs
    decays: bool
    consistent: bool
    notes: str = ""


def _growth_samples(n: int, samples: int, rng) -> list:
    """Matrices whose |s| + |s^-1| spans several decades, deterministic
    for a fixed sample count."""
    out = []
    scales = np.logspace(-1.5, 2.5, max(4, samples))
    for lam in scales:
        g = rng.normal(size=(n, n))
        # keep the random factor well conditioned, then stretch it
        base = np.eye(n) + 0.3 * g
        out.append(Mat.from_rows((lam * base).tolist()))
        if n >= 2:
            d = [lam] + [1.0 / lam] * (n - 1)
            out.append(Mat.diag(*d))
        else:
            out.append(Mat.scalar(1.0 / lam))
    return out


def growth_check(v: TestFn, samples: int = 64) -> GrowthReport:
    """Sample |v| against the declared growth denominator over a scale
    ladder.  Reports the max ratio, whether ratios decay along the ladder,
    and a consistency verdict (ratios not growing, structural zeros and
    infinities where the class requires them)."""
    rng = np.random.default_rng(1234)
    # infer the dimension the function accepts: try 1, then 2
    n = 1
    try:
        v.evaluate(Mat.identity(1))
    except (DomainError, ValueError):
        n = 2
    mats = _growth_samples(n, samples, rng)

    kind = v.growth.kind
    p = v.growth.param
    entries = []
    consistent = True
    notes = []
    for a in mats:
        scale = frob_norm(a) + (frob_norm(invert(a)) if is_invertible(a) else math.inf)
        if kind == "O_rho":
            ball = RhoBall(p)
            val = v.evaluate(a)
            inside = in_rho_ball(a, ball)
            if inside and not math.isfinite(val):
                consistent = False
                notes.append("infinite inside the rho ball")
            if not inside and val != math.inf:
                # outside the ball the function must be +inf
                consistent = False
                notes.append("finite outside the rho ball")
            continue
        try:
            val = v.evaluate(a)
        except DomainError:
            if kind != "C_pmp":
                consistent = False
                notes.append("unexpected DomainError")
            continue
        if not math.isfinite(val):
            consistent = False
            notes.append("infinite value in a finite-growth class")
            continue
        if kind == "C_p":
            denom = max(frob_norm(a), 1e-300) ** p
        elif kind == "C_pmp":
            denom = frob_norm(a) ** p + frob_norm(invert(a)) ** p
        else:  # C_0inv
            denom = 1.0
        entries.append((scale, abs(val) / denom))

    if kind == "C_0inv":
        # structural zero on a singular matrix
        z = v.evaluate(Mat.zero(n))
        if z != 0.0:
            consistent = False
            notes.append("nonzero on a singular matrix")

    if kind == "O_rho":
        return GrowthReport(v.growth, 0.0, (), True, consistent, "; ".join(notes))

    entries.sort(key=lambda e: e[0])
    ratios = [r for _, r in entries]
    max_ratio = max(ratios) if ratios else 0.0
    third = max(1, len(entries) // 3)
    low = sum(r for _, r in entries[:third]) / third
    high = sum(r for _, r in entries[-third:]) / third
    growing = high > 10.0 * max(low, 1e-12) and high > 1e-9
    decays = high < 0.1 * max(low, 1e-300) or max_ratio == 0.0
    if growing:
        consistent = False
        notes.append(f"ratio grows along the scale ladder ({low:.3e} -> {high:.3e})")
    scale_ratios = tuple((s, r) for s, r in entries)
    return GrowthReport(v.growth, max_ratio, scale_ratios, decays, consistent,
                        "; ".join(notes))
