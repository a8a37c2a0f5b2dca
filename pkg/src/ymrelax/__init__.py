"""Numerical toolkit for Young-measure relaxation of integral energies
that are finite only on invertible matrix arguments.

The package builds atomic Young measures and piecewise-affine gradient
fields, evaluates quasiconvex-envelope bounds restricted to invertibility
balls, solves a discretized relaxation by alternating linear programs and
atom generation, and certifies the resulting objects against the class
conditions the theory requires.
"""

__version__ = "0.1.0"

from .errors import (
    BudgetExceeded,
    ConfigError,
    DomainError,
    HypothesisViolated,
    Infeasible,
    InfeasibleBarycenter,
    InfeasibleLayer,
    NoAdmissibleSplit,
    NoFeasibleStart,
    NotRankOne,
    SingularAtom,
    SingularError,
    Stalled,
    ToolError,
    UnknownEnergy,
)
from .matcore import (
    Mat,
    RhoBall,
    det,
    frob_norm,
    in_rho_ball,
    invert,
    is_invertible,
    iter_coordinate_dyads,
    largest_singular_value,
    mat_close,
    max_norm_pair,
    rank_one_difference,
    singular_threshold,
    singular_values,
)
from .testfn import (
    CutoffFn,
    Growth,
    GrowthReport,
    TestFn,
    builtin_energy,
    growth_check,
    make_det_cutoff,
    make_phi_rho,
    named_testfn,
    orho_extend,
    smoothstep,
)
from .measure import (
    INFINITE,
    AtomicMeasure,
    ClassReport,
    Mesh,
    YoungMeasureField,
    classify,
    first_moment,
    hat_pushforward,
    homogenize,
    inverse_penalty_moment,
    mass_moments,
    measures_equal,
    moment_pq,
    pair,
    support_in_ball,
    truncate,
)
from .laminate import (
    WEIGHT_FUNCTIONS,
    BoundaryDatum,
    GenerationEntry,
    GenerationReport,
    GlueReport,
    GradientField,
    SequenceSpec,
    boundary_glue,
    build_laminate_sequence,
    empirical_pairing,
    integrate_weight,
    mix_deformations,
    verify_generation,
)
from .meshdef import MeshDeformation
from .envelope import (
    EnvelopeEstimate,
    qinv_fe_upper,
    qinv_laminate_upper,
    qinv_oracle_1d,
)
from .relax import (
    AdmissibleSet,
    LpSolution,
    RelaxProblem,
    RelaxSolution,
    lp_weights,
    refine_atoms,
    relax_solve,
)
from .certify import (
    Certificate,
    Check,
    check_det_limit,
    check_support_from_sequence,
    check_thm3,
    check_thm12,
)

__all__ = [
    "__version__",
    # errors
    "ToolError", "SingularError", "DomainError", "SingularAtom", "NotRankOne",
    "BudgetExceeded", "InfeasibleLayer", "InfeasibleBarycenter",
    "NoAdmissibleSplit", "NoFeasibleStart", "Infeasible", "Stalled",
    "UnknownEnergy", "HypothesisViolated", "ConfigError",
    # matrices
    "Mat", "RhoBall", "mat_close", "frob_norm", "det", "singular_threshold",
    "is_invertible", "invert", "singular_values", "largest_singular_value",
    "rank_one_difference", "in_rho_ball", "max_norm_pair",
    "iter_coordinate_dyads",
    # test functions
    "Growth", "TestFn", "CutoffFn", "smoothstep", "make_phi_rho",
    "make_det_cutoff", "orho_extend", "builtin_energy", "named_testfn",
    "GrowthReport", "growth_check",
    # measures
    "INFINITE", "AtomicMeasure", "pair", "first_moment", "hat_pushforward",
    "truncate", "mass_moments", "inverse_penalty_moment", "Mesh",
    "YoungMeasureField", "moment_pq", "homogenize", "ClassReport", "classify",
    "measures_equal", "support_in_ball",
    # laminates
    "GradientField", "BoundaryDatum", "SequenceSpec", "WEIGHT_FUNCTIONS",
    "build_laminate_sequence", "empirical_pairing", "integrate_weight",
    "GenerationEntry", "GenerationReport", "verify_generation", "GlueReport",
    "boundary_glue", "mix_deformations",
    # deformations
    "MeshDeformation",
    # envelopes
    "EnvelopeEstimate", "qinv_oracle_1d", "qinv_laminate_upper",
    "qinv_fe_upper",
    # relaxation
    "AdmissibleSet", "LpSolution", "lp_weights", "refine_atoms",
    "RelaxProblem", "RelaxSolution", "relax_solve",
    # certificates
    "Check", "Certificate", "check_thm12", "check_support_from_sequence",
    "check_det_limit", "check_thm3",
]
