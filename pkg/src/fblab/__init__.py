"""Desk-scale laboratory for a gradient-activated obstacle-type problem.

Solves Delta u = 1 on {|grad u| > 0} on disk grids, evaluates the
scale-normalized Weiss and Monneau energies, fits blowup candidates at
free-boundary centers, and runs the finite matching algebra that makes
the limit form unique.
"""

from .errors import DegenerateFitError, DomainError, ParseError
from .fields import (
    AnalyticField,
    CoincidenceMask,
    GridSpec,
    ScalarField,
    coincidence_mask,
    default_threshold,
    gradient_at,
    load_field,
    recenter,
    save_field,
    value_at,
)
from .quadrature import (
    BallRule,
    QuadratureRules,
    SphereRule,
    ball_integral,
    circle_rule,
    default_rules,
    disk_rule,
    moment_identity_check,
    sphere_integral,
)
from .quadforms import (
    QuadraticForm,
    alpha_n,
    bt_family,
    eval_form,
    frobenius_distance,
    grad_form,
    is_in_Qplus,
    q_form,
)
from .solver import (
    SolveParams,
    SolveResult,
    halfspace_solution,
    make_halfspace_field,
    make_perturbed_singular_field,
    make_polynomial_field,
    perturbed_singular_solution,
    polynomial_solution,
    residual,
    solve,
)
from .functionals import (
    RadialProfile,
    hypothesis_check,
    monneau,
    monneau_decomposition_check,
    monneau_profile,
    rescale,
    scaling_identity_check,
    weiss,
    weiss_limit_estimate,
    weiss_profile,
)
from .blowup import (
    BlowupReport,
    fit_halfspace,
    fit_quadratic,
    matching_df,
    matching_f,
    uniqueness_report,
    verify_uniqueness_algebra,
)

__version__ = "0.1.0"
