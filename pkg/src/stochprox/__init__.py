"""Stochastic proximal point and alternating projection toolkit.

Closed-form proximal operators with an independent numeric oracle, random
finite-sum instance generators with a deterministic reference solver, the
stochastic proximal point loop with trace capture, executable regularity
constants and distance-recursion bounds, and a CLI for reproducible
stepsize-sweep experiments.
"""

__version__ = "0.1.0"

from .prox import (
    Component,
    HalfspaceIndicator,
    HingeReg,
    LeastSquares,
    ProxResult,
    ScalarComposite,
    component_value,
    moreau,
    numeric_prox,
    project_halfspace,
    prox_hinge_reg,
    prox_least_squares,
    prox_scalar_composite,
    subgradient,
)
from .problems import (
    InstanceSpec,
    ReferenceSolution,
    StochasticProblem,
    evaluate_F,
    evaluate_feasibility,
    generate_constrained_regression,
    generate_halfspace_cfp,
    generate_interpolation_regression,
    mean_envelope,
    problem_from_json,
    problem_to_json,
    reference_solve,
)
from .solver import (
    ConstantStep,
    PolynomialStep,
    ReplicateTrace,
    RunTrace,
    StepSchedule,
    TraceMetrics,
    replicate,
    spp_run,
    step_size,
    write_trace_csv,
)
from .regularity import (
    RateRegime,
    RegularityConstants,
    RegularityEstimate,
    classify_rate,
    constants_cfp,
    constants_quadratic_growth,
    constants_rsc,
    estimate_linear_regularity,
    phi_alpha,
    recurrence_bound,
    recurrence_bound_curve,
)
from .diagnostics import (
    AffineOptimum,
    IntersectionOptimum,
    OptimalSetModel,
    PointOptimum,
    dist_to_optimal,
    envelope_residual,
    fit_rate_slope,
    mean_sq_subgradient,
    point_model_from_reference,
)
from .geometry import distance_to_intersection, dykstra_project
