"""Petrov-Galerkin finite elements with L*-spline test functions for
singularly perturbed turning point problems in one dimension.

Typical use::

    from tpgfem import builtin_example, pgfem_solve
    spec = builtin_example("ex2")
    sol = pgfem_solve(spec.problem(1e-6), 128)
"""

__version__ = "1.0.0"

from .benchmarks import (
    BenchmarkResult,
    ExampleSpec,
    ReferenceCache,
    builtin_example,
    custom_example,
    derivative_bound,
    derivative_bound_diagnostic,
    run_example,
    upwind_shishkin_solve,
)
from .coefficients import AmbiguityError, PiecewiseCoefficients, approximate_coefficients, plan_neighborhoods
from .duals import (
    DualConditioningError,
    DualDomainError,
    DualHalf,
    DualStabilityWarning,
    TestFunction,
    build_element_duals,
    build_test_functions,
    solve_dual_exact_constant,
    solve_dual_exact_linear,
    solve_dual_tfpm,
)
from .expression import ExpressionSyntaxError, derivative, parse_expression
from .mesh import ConfigurationError, Layer, Partition, ResolutionError, build_partition, shishkin_mesh
from .norms import ErrorReport, ErrorRow, convergence_rate, energy_h, error_report, l2_h, linf_h, restrict_to
from .pcf import PcfDomainError, pcf_eval, pcf_scaled
from .pgfem import (
    GridSolution,
    PipelineError,
    SolverOptions,
    assemble,
    check_discrete_max_principle,
    pgfem_solve,
    solve_tridiagonal,
)
from .problem import (
    BoundaryValueProblem,
    SingularKind,
    SingularPoint,
    classify_singular_points,
    find_turning_points,
    validate_problem,
)
