"""Petrov-Galerkin assembly and solve with L*-spline test functions.

With piecewise linear trial functions and test functions solving the
adjoint of the approximate operator, integration by parts leaves only
boundary fluxes of the test functions:

    A(phi_{i-1}, psi_i) = -eps psi_i'(x_{i-1}^+)
    A(phi_{i+1}, psi_i) =  eps psi_i'(x_{i+1}^-)
    A(phi_i, psi_i)     =  eps [psi_i'(x_i^-) - psi_i'(x_i^+)]
                           + p_bar(x_i^-) - p_bar(x_i^+)

and the load is ``(f, psi_i)``.  With ``load="midpoint"`` the load is
``sum_k f_bar_k int_{I_k} psi_i`` and the nodal values are those of the
exact solution of the approximate problem; the default ``"quadrature"``
integrates the true ``f`` against the test functions, which removes the
``f - f_bar`` part of the consistency error.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .coefficients import AmbiguityError, PiecewiseCoefficients, approximate_coefficients, plan_neighborhoods
from .duals import ElementDuals, TestFunction, build_element_duals
from .mesh import ConfigurationError, Partition, build_partition
from .problem import (
    BoundaryValueProblem,
    SingularKind,
    SingularPoint,
    classify_singular_points,
    find_turning_points,
    validate_problem,
)

__all__ = [
    "GridSolution",
    "MaxPrincipleReport",
    "PipelineError",
    "SingularSystemError",
    "SolverOptions",
    "TriDiagonalSystem",
    "assemble",
    "check_discrete_max_principle",
    "pgfem_solve",
    "solve_tridiagonal",
]


class SingularSystemError(ArithmeticError):
    """Zero pivot in the tridiagonal solve."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` says why."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.detail = message


@dataclass
class TriDiagonalSystem:
    """Interior equations ``sub_i u_{i-1} + diag_i u_i + sup_i u_{i+1} = rhs_i``.

    Arrays have length ``N - 1``.  ``sub[0]`` and ``sup[-1]`` couple to the
    boundary values; they are kept for inspection but their contribution
    is already in ``rhs``.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matrix(self) -> np.ndarray:
        """Dense matrix (for tests and small systems)."""
        n = self.size
        m = np.diag(self.diag)
        if n > 1:
            m += np.diag(self.sub[1:], -1) + np.diag(self.sup[:-1], 1)
        return m


def _gather(tests: Sequence[TestFunction]):
    rise = np.array([[t.left.d_left, t.left.d_right, t.left.mass] for t in tests])
    fall = np.array([[t.right.d_left, t.right.d_right, t.right.mass] for t in tests])
    if all(t.left.load is not None and t.right.load is not None for t in tests):
        loads = (np.array([t.left.load for t in tests]), np.array([t.right.load for t in tests]))
    else:
        loads = None
    return rise.T, fall.T, loads


def assemble(
    coeffs: PiecewiseCoefficients,
    tests,
    partition: Partition,
    bvp: BoundaryValueProblem,
    load: str = "quadrature",
) -> TriDiagonalSystem:
    """Flux-form assembly.

    ``tests`` is either an :class:`ElementDuals` or the list of
    :class:`TestFunction` for nodes ``1..N-1``.  ``load="quadrature"``
    needs the loads computed by :func:`build_element_duals` with ``f``.
    """
    if load not in ("quadrature", "midpoint"):
        raise ValueError(f"unknown load rule {load!r}")
    n = partition.n_elements
    if n < 2:
        raise ConfigurationError("need at least two elements")
    eps = bvp.epsilon
    if isinstance(tests, ElementDuals):
        r_dl, r_dr, r_m = tests.rise_dl[:-1], tests.rise_dr[:-1], tests.rise_mass[:-1]
        f_dl, f_dr, f_m = tests.fall_dl[1:], tests.fall_dr[1:], tests.fall_mass[1:]
        loads = None
        if tests.rise_load is not None:
            loads = (tests.rise_load[:-1], tests.fall_load[1:])
    else:
        if len(tests) != n - 1:
            raise ValueError("need one test function per interior node")
        (r_dl, r_dr, r_m), (f_dl, f_dr, f_m), loads = _gather(tests)
    jumps = coeffs.jumps(partition)
    sub = -eps * r_dl
    sup = eps * f_dr
    diag = eps * (r_dr - f_dl) + jumps
    if load == "quadrature":
        if loads is None:
            raise ValueError("quadrature loads were not computed for these test functions")
        rhs = loads[0] + loads[1]
    else:
        rhs = coeffs.f[:-1] * r_m + coeffs.f[1:] * f_m
    rhs = np.array(rhs, dtype=float)
    rhs[0] -= sub[0] * bvp.u_left
    rhs[-1] -= sup[-1] * bvp.u_right
    return TriDiagonalSystem(sub, diag, sup, rhs)


@dataclass(frozen=True)
class MaxPrincipleReport:
    """Outcome of the M-matrix check."""

    holds: bool
    worst_row: int
    worst_margin: float
    tolerance: float
    failures: tuple = ()

    def __str__(self):
        status = "holds" if self.holds else f"fails in {len(self.failures)} rows"
        return f"M-matrix {status}; worst row {self.worst_row} margin {self.worst_margin:.3e}"


def check_discrete_max_principle(system: TriDiagonalSystem, rel_tol: float = 1e-12) -> MaxPrincipleReport:
    """diag > 0, off-diagonals <= 0, weak row diagonal dominance.

    Tolerances are ``rel_tol`` times the largest matrix entry.  Rows count
    from 1 (interior node numbers).  The margin of a row is
    ``diag - |sub| - |sup|``.
    """
    sub, diag, sup = system.sub, system.diag, system.sup
    scale = float(max(np.abs(sub).max(), np.abs(diag).max(), np.abs(sup).max(), 1e-300))
    tol = rel_tol * scale
    margin = diag - np.abs(sub) - np.abs(sup)
    bad = (diag <= 0.0) | (sub > tol) | (sup > tol) | (margin < -tol)
    failures = tuple(int(i) + 1 for i in np.flatnonzero(bad))
    worst = int(np.argmin(margin))
    return MaxPrincipleReport(not failures, worst + 1, float(margin[worst]), tol, failures)


def _thomas(sub, diag, sup, rhs):
    n = diag.size
    cp = np.empty(n)
    dp = np.empty(n)
    pivot_tol = 1e-300
    m = diag[0]
    if abs(m) < pivot_tol:
        raise SingularSystemError("zero pivot in row 1")
    cp[0] = sup[0] / m
    dp[0] = rhs[0] / m
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        if abs(m) < pivot_tol:
            raise SingularSystemError(f"zero pivot in row {i + 1}")
        cp[i] = sup[i] / m
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def solve_tridiagonal(system: TriDiagonalSystem, pivoting: Optional[bool] = None) -> np.ndarray:
    """Interior nodal values.

    Thomas elimination is used for M-matrices (where it is stable); other
    systems, or ``pivoting=True``, go through LAPACK's banded solver with
    partial pivoting.
    """
    if pivoting is None:
        pivoting = not check_discrete_max_principle(system).holds
    n = system.size
    if not pivoting:
        return _thomas(system.sub, system.diag, system.sup, system.rhs)
    ab = np.zeros((3, n))
    ab[0, 1:] = system.sup[:-1]
    ab[1] = system.diag
    ab[2, :-1] = system.sub[1:]
    try:
        return scipy.linalg.solve_banded((1, 1), ab, system.rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc


@dataclass
class SolverOptions:
    """Knobs of the pipeline.

    ``mode``: ``"exact"`` (parabolic cylinder duals) or ``"tfpm"``.
    ``drop_repulsive``: ignore repulsive interior turning points when
    building neighbourhoods; ``None`` means "only in TFPM mode".
    ``boundary_anchor``: anchor of the tangent line on the element next to
    a singular endpoint (``"midpoint"`` or ``"singular"``).
    ``freeze``: TFPM coefficient freezing for endpoint derivatives.
    ``load``: ``"quadrature"`` for ``(f, psi_i)``, ``"midpoint"`` for
    ``(f_bar, psi_i)``.
    """

    mode: str = "exact"
    n1: int = 256
    drop_repulsive: Optional[bool] = None
    boundary_anchor: str = "midpoint"
    freeze: str = "endpoint"
    cond_limit: float = 1e12
    scan_resolution: int = 256
    load: str = "quadrature"

    def __post_init__(self):
        if self.mode not in ("exact", "tfpm"):
            raise ConfigurationError(f"unknown dual mode {self.mode!r}")
        if int(self.n1) != self.n1 or self.n1 < 2:
            raise ConfigurationError("n1 must be an integer >= 2")
        if self.load not in ("quadrature", "midpoint"):
            raise ConfigurationError(f"unknown load rule {self.load!r}")


@dataclass
class GridSolution:
    """Nodal solution and everything needed to audit it."""

    partition: Partition
    values: np.ndarray
    epsilon: float
    options: SolverOptions
    singular_points: list
    coefficients: PiecewiseCoefficients = field(repr=False)
    system: TriDiagonalSystem = field(repr=False)
    duals: ElementDuals = field(repr=False)
    max_principle: MaxPrincipleReport = None
    timings: dict = field(default_factory=dict)

    @property
    def nodes(self) -> np.ndarray:
        return self.partition.nodes

    @property
    def n(self) -> int:
        return self.partition.n_elements

    def interpolate(self, x):
        """Piecewise linear interpolant of the nodal values."""
        return np.interp(x, self.nodes, self.values)


def _stage(name, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except PipelineError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise PipelineError(name, str(exc)) from exc


def pgfem_solve(
    bvp: BoundaryValueProblem,
    n: int,
    options: Optional[SolverOptions] = None,
    singular_points: Optional[Sequence[SingularPoint]] = None,
    **kwargs,
) -> GridSolution:
    """Solve ``bvp`` on N elements.

    Keyword arguments not covered by ``options`` are forwarded to
    :class:`SolverOptions`, so ``pgfem_solve(bvp, 64, mode="tfpm")`` works.
    """
    if options is None:
        options = SolverOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either options or keyword arguments")
    timings: dict = {}
    t0 = time.perf_counter()
    report = _stage("validate", validate_problem, bvp)
    if not report.condition_ok and not bvp.waive_condition:
        raise PipelineError("validate", f"well-posedness condition violated: {report}")
    if singular_points is None:
        tps = _stage("turning-points", find_turning_points, bvp, options.scan_resolution)
        singular_points = _stage("classify", classify_singular_points, bvp, tps)
    singular_points = list(singular_points)
    drop = options.drop_repulsive
    if drop is None:
        drop = options.mode == "tfpm"
    active = [s for s in singular_points
              if not (drop and s.kind is SingularKind.REPULSIVE_INTERIOR_TP)]
    timings["classify"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    partition = _stage("mesh", build_partition, bvp.x_left, bvp.x_right, n,
                       [s.location for s in active])
    plan = _stage("coefficients", plan_neighborhoods, active, bvp.x_left, bvp.x_right)
    try:
        coeffs = approximate_coefficients(bvp, partition, plan, options.boundary_anchor)
    except AmbiguityError as exc:
        raise PipelineError("coefficients", str(exc)) from exc
    timings["coefficients"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    duals = _stage("duals", build_element_duals, bvp.epsilon, coeffs, partition, options.mode,
                   options.n1, options.freeze, options.cond_limit,
                   bvp.f if options.load == "quadrature" else None)
    timings["duals"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    system = _stage("assemble", assemble, coeffs, duals, partition, bvp, options.load)
    mp = check_discrete_max_principle(system)
    interior = _stage("solve", solve_tridiagonal, system, not mp.holds)
    timings["solve"] = time.perf_counter() - t0
    values = np.concatenate(([bvp.u_left], interior, [bvp.u_right]))
    if not np.all(np.isfinite(values)):
        raise PipelineError("solve", "non-finite nodal values")
    return GridSolution(partition, values, bvp.epsilon, options, singular_points, coeffs,
                        system, duals, mp, timings)
