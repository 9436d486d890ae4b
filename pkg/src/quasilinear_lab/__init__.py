"""Numerical laboratory for quasilinear elliptic systems in divergence form.

Coefficient structure checks, a piecewise-linear Picard solver, and the
level-set machinery (superlevel Caccioppoli sides, excess traces, the
superlinear iteration lemma) used to certify local boundedness.
"""
from .analysis import (
    CaccioppoliCheckSpec,
    Condition19Input,
    ExcessTrace,
    RadialField,
    admissible_radius,
    boundedness_level,
    caccioppoli_sides,
    condition19_delta_scan,
    condition19_example_ratio,
    condition19_lhs,
    condition19_rhs,
    excess_trace,
    fit_decay,
    radial_diagnostics,
    radial_eval,
    two_sided_bound,
)
from .coefficients import (
    CoefficientTensor,
    ExampleTensorSpec,
    SampleSpec,
    StructureReport,
    build_example_tensor,
    check_boundedness,
    check_ellipticity,
    check_staircase_support,
    check_structure,
    evaluate_tensor,
    identity_tensor,
    quadratic_form,
    reflect_tensor,
)
from .degiorgi import (
    LevelSchedule,
    RadiusSchedule,
    RecursionParams,
    caccioppoli_constant,
    level_at,
    radii_at,
    recursion_threshold,
    simulate_recursion,
)
from .mesh_field import (
    Ball,
    DiscreteField,
    Mesh,
    build_box_mesh,
    excess,
    gradient_on_simplex,
    integrate,
    sobolev_seminorm,
    superlevel_measure,
)
from .solver import (
    DirichletData,
    PicardConfig,
    SolveResult,
    assemble,
    boundary_preset,
    linear_solve,
    manufactured_rhs,
    picard_solve,
    weak_residual,
)

__version__ = "0.1.0"
