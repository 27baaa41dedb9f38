"""Built-in test problems, convergence sweeps and comparison baselines.

The three built-in examples are

* ``ex1``: ``-eps u'' + cos(2 pi x) u' + u = 1/(1+x^2)`` on (0, 1),
  ``u(0) = 1``, ``u(1) = 2``; interior turning points at 1/4 and 3/4 and
  an outflow layer at 1.  ``b - p'`` changes sign, so the well-posedness
  check is waived.
* ``ex2``: ``-eps u'' + (1-x^2) u' + 3u = e^x`` on (-1, 1), ``u(-1) = 1``,
  ``u(1) = 2``; turning points at both ends.
* ``ex3``: ``-eps u'' - x^3 u' + u = f`` on (0, 1) with
  ``u = exp(-x/sqrt(eps)) + exp(x)`` and ``f`` derived from it.

Errors are measured against a fine PGFEM run (``ref_n`` elements, exact
duals) unless the example carries a closed-form solution.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .expression import EPS, Expression, Num, derivative, parse_expression, simplify
from .mesh import ConfigurationError, Layer, Partition, shishkin_mesh
from .norms import ErrorReport, error_report, restrict_to
from .pgfem import (
    GridSolution,
    PipelineError,
    SolverOptions,
    TriDiagonalSystem,
    pgfem_solve,
    solve_tridiagonal,
)
from .problem import (
    BoundaryValueProblem,
    SingularKind,
    SingularPoint,
    classify_singular_points,
    find_turning_points,
)

__all__ = [
    "BenchmarkResult",
    "DerivativeBoundReport",
    "EPS_LIST",
    "ExampleSpec",
    "N_LIST",
    "ReferenceCache",
    "UpwindSolution",
    "builtin_example",
    "custom_example",
    "derivative_bound",
    "derivative_bound_diagnostic",
    "run_example",
    "upwind_shishkin_solve",
]

EPS_LIST = (1.0, 1e-2, 1e-4, 1e-6)
N_LIST = (32, 64, 128, 256, 512, 1024)

# per-element TFPM grid used by the built-in examples; the library default
# (SolverOptions.n1) stays at 256
BENCH_N1 = 4096


@dataclass(frozen=True)
class ExampleSpec:
    """A benchmark problem and its sweep.

    Boundary values are expressions evaluated at the corresponding endpoint,
    so they may depend on ``eps`` (and, for closed-form examples, simply be
    the exact solution).
    """

    identifier: str
    p: Expression
    b: Expression
    f: Expression
    domain: tuple
    u_left: Expression
    u_right: Expression
    eps_list: tuple = EPS_LIST
    n_list: tuple = N_LIST
    mode: str = "exact"
    n1: int = BENCH_N1
    exact: Optional[Expression] = None
    waive_condition: bool = False
    multiple_turning_point: bool = False

    def __post_init__(self):
        if len(self.domain) != 2 or not self.domain[0] < self.domain[1]:
            raise ConfigurationError(f"bad domain {self.domain!r}")
        if not self.eps_list:
            raise ConfigurationError("empty eps list")
        if not self.n_list:
            raise ConfigurationError("empty N list")
        if any(e <= 0 for e in self.eps_list):
            raise ConfigurationError("eps values must be positive")
        if any(int(n) != n or n < 2 for n in self.n_list):
            raise ConfigurationError("N values must be integers >= 2")
        if self.mode not in ("exact", "tfpm"):
            raise ConfigurationError(f"unknown dual mode {self.mode!r}")

    def problem(self, eps: float) -> BoundaryValueProblem:
        xl, xr = (float(v) for v in self.domain)
        return BoundaryValueProblem(
            epsilon=float(eps),
            p=self.p.bind(eps),
            b=self.b.bind(eps),
            f=self.f.bind(eps),
            x_left=xl,
            x_right=xr,
            u_left=float(self.u_left.evaluate(xl, eps)),
            u_right=float(self.u_right.evaluate(xr, eps)),
            dp=derivative(self.p).bind(eps),
            db=derivative(self.b).bind(eps),
            df=derivative(self.f).bind(eps),
            waive_condition=self.waive_condition,
            multiple_turning_point=self.multiple_turning_point,
            name=self.identifier,
            exact=None if self.exact is None else self.exact.bind(eps),
        )

    def describe(self) -> dict:
        """Plain-data description for run manifests."""
        return {
            "identifier": self.identifier,
            "p": str(self.p),
            "b": str(self.b),
            "f": str(self.f),
            "domain": [float(v) for v in self.domain],
            "u_left": str(self.u_left),
            "u_right": str(self.u_right),
            "eps": [float(e) for e in self.eps_list],
            "N": [int(n) for n in self.n_list],
            "dual_mode": self.mode,
            "N1": int(self.n1),
            "exact": None if self.exact is None else str(self.exact),
            "waive_condition": self.waive_condition,
        }


def _ex1() -> ExampleSpec:
    return ExampleSpec(
        "ex1",
        p=parse_expression("cos(2*pi*x)"),
        b=Num(1.0),
        f=parse_expression("1/(1 + x^2)"),
        domain=(0.0, 1.0),
        u_left=Num(1.0),
        u_right=Num(2.0),
        waive_condition=True,
    )


def _ex2() -> ExampleSpec:
    return ExampleSpec(
        "ex2",
        p=parse_expression("1 - x^2"),
        b=Num(3.0),
        f=parse_expression("exp(x)"),
        domain=(-1.0, 1.0),
        u_left=Num(1.0),
        u_right=Num(2.0),
    )


def _ex3() -> ExampleSpec:
    p = parse_expression("-x^3")
    b = Num(1.0)
    u = parse_expression("exp(-x/sqrt(eps)) + exp(x)")
    du = derivative(u)
    f = simplify(-EPS * derivative(du) + p * du + b * u)
    return ExampleSpec("ex3", p=p, b=b, f=f, domain=(0.0, 1.0), u_left=u, u_right=u,
                       mode="tfpm", exact=u)


_BUILTIN = {"ex1": _ex1, "ex2": _ex2, "ex3": _ex3}


def builtin_example(name: str, **overrides) -> ExampleSpec:
    """``ex1``, ``ex2`` or ``ex3``; keyword overrides replace spec fields."""
    try:
        spec = _BUILTIN[name]()
    except KeyError:
        raise ConfigurationError(f"unknown example {name!r}; choose from {sorted(_BUILTIN)}") from None
    return replace(spec, **overrides) if overrides else spec


def custom_example(p: str, b: str, f: str, domain=(0.0, 1.0), u_left="0", u_right="0",
                   exact: Optional[str] = None, **fields) -> ExampleSpec:
    """Spec from expression strings."""

    def expr(v):
        return v if isinstance(v, Expression) else parse_expression(str(v))

    return ExampleSpec("custom", expr(p), expr(b), expr(f), tuple(float(v) for v in domain),
                       expr(u_left), expr(u_right),
                       exact=None if exact is None else expr(exact), **fields)


# ---------------------------------------------------------------------------
# references


class ReferenceCache:
    """Fine reference solutions keyed by (example, eps, ref_n)."""

    def __init__(self):
        self._store: dict = {}

    def __len__(self):
        return len(self._store)

    def get(self, spec: ExampleSpec, eps: float, ref_n: int, **options) -> GridSolution:
        key = (spec.identifier, str(spec.p), str(spec.b), str(spec.f), str(spec.u_left),
               str(spec.u_right), tuple(spec.domain), float(eps), int(ref_n),
               tuple(sorted(options.items())))
        if key not in self._store:
            self._store[key] = pgfem_solve(spec.problem(eps), int(ref_n),
                                           SolverOptions(mode="exact", **options))
        return self._store[key]


def _grid_reference(ref: GridSolution, notes: list):
    def values(sol):
        try:
            return restrict_to(sol.partition, ref.nodes, ref.values)
        except ValueError:
            notes.append(f"eps={sol.epsilon!r} N={sol.n}: nodes not nested in the reference, "
                         "reference interpolated linearly")
            return ref.interpolate(sol.nodes)

    return values


# ---------------------------------------------------------------------------
# upwind baseline on a Shishkin mesh


@dataclass
class UpwindSolution:
    """Nodal values of the upwind/Shishkin baseline."""

    partition: Partition
    values: np.ndarray
    epsilon: float
    layers: list
    method: str = "upwind-shishkin"

    @property
    def nodes(self) -> np.ndarray:
        return self.partition.nodes

    @property
    def n(self) -> int:
        return self.partition.n_elements

    def interpolate(self, x):
        return np.interp(x, self.nodes, self.values)


def _layers(bvp: BoundaryValueProblem, singular: Sequence[SingularPoint]) -> list[Layer]:
    root = math.sqrt(bvp.epsilon)
    out = []
    for s in singular:
        if s.kind is SingularKind.EXPONENTIAL_BOUNDARY_LAYER:
            side = "left" if s.location == bvp.x_right else "right"
            out.append(Layer(s.location, bvp.epsilon, side))
        elif s.kind is SingularKind.ATTRACTIVE_INTERIOR_TP:
            out.append(Layer(s.location, root, "both"))
        elif s.kind is SingularKind.REPULSIVE_INTERIOR_TP:
            continue  # no layer forms at a repulsive point
        else:
            side = "right" if s.location == bvp.x_left else "left"
            out.append(Layer(s.location, root, side))
    return out


def upwind_shishkin_solve(bvp: BoundaryValueProblem, n: int,
                          singular_points: Optional[Sequence[SingularPoint]] = None) -> UpwindSolution:
    """First-order upwind differences on a Shishkin mesh.

    Layer widths scale like ``eps`` at outflow boundaries and ``sqrt(eps)``
    at turning points; the convection difference is backward where
    ``p > 0`` and forward where ``p < 0``.
    """
    if singular_points is None:
        singular_points = classify_singular_points(bvp, find_turning_points(bvp))
    layers = _layers(bvp, singular_points)
    part = shishkin_mesh(bvp.x_left, bvp.x_right, n, layers)
    x = part.nodes
    h = part.sizes
    hl, hr = h[:-1], h[1:]
    xi = x[1:-1]
    eps = bvp.epsilon
    p, b, f = bvp.p(xi), bvp.b(xi), bvp.f(xi)
    dd = 2.0 * eps / (hl + hr)
    sub = -dd / hl
    sup = -dd / hr
    diag = dd / hl + dd / hr + b
    back = p > 0.0
    sub = sub - np.where(back, p / hl, 0.0)
    diag = diag + np.where(back, p / hl, -p / hr)
    sup = sup + np.where(back, 0.0, p / hr)
    rhs = f.astype(float).copy()
    rhs[0] -= sub[0] * bvp.u_left
    rhs[-1] -= sup[-1] * bvp.u_right
    interior = solve_tridiagonal(TriDiagonalSystem(sub, diag, sup, rhs))
    values = np.concatenate(([bvp.u_left], interior, [bvp.u_right]))
    return UpwindSolution(part, values, eps, layers)


# ---------------------------------------------------------------------------
# derivative bounds near singular points


def _window(location: float, others: Iterable[float], x_left: float, x_right: float) -> float:
    gaps = [abs(o - location) for o in others if o != location]
    if gaps:
        return 0.5 * min(gaps)
    return 0.5 * (x_right - x_left)


def derivative_bound(solution, location: float, window: float) -> float:
    """max |(x_i - s) Du_h(x_i)| over nodes with ``|x_i - s| <= window``.

    ``Du_h`` is the difference quotient on the element between ``x_i`` and
    ``s``, so the statistic stays finite at the singular point itself.
    """
    x = solution.nodes
    u = np.asarray(solution.values, dtype=float)
    slopes = np.diff(u) / np.diff(x)
    best = 0.0
    for i, xi in enumerate(x):
        d = xi - location
        if d == 0.0 or abs(d) > window * (1.0 + 1e-12):
            continue
        k = i - 1 if d > 0.0 else i
        if not 0 <= k < slopes.size:
            continue
        best = max(best, abs(d * slopes[k]))
    return best


@dataclass
class DerivativeBoundReport:
    """Statistic per singular point (outer key) and eps (inner key)."""

    values: dict
    windows: dict
    n: Optional[int] = None

    def growth(self, location: float, eps_from: float, eps_to: float) -> float:
        """stat(eps_to) / stat(eps_from)."""
        row = self.values[location]
        return row[eps_to] / row[eps_from]

    def rows(self):
        for s, row in self.values.items():
            for eps, v in row.items():
                yield s, eps, v


def derivative_bound_diagnostic(solutions: Sequence, singular: Optional[Sequence[float]] = None,
                                windows: Optional[Mapping[float, float]] = None) -> DerivativeBoundReport:
    """Derivative-bound statistic of each solution near each singular point.

    ``solutions`` share one problem family and differ in eps.  Singular
    locations default to those classified for the first solution; the
    window around ``s`` is half the distance to the nearest other singular
    point, or half the domain when there is none.
    """
    solutions = list(solutions)
    if not solutions:
        raise ValueError("need at least one solution")
    first = solutions[0]
    all_points = [s.location for s in getattr(first, "singular_points", [])]
    locs = list(singular) if singular is not None else all_points
    x0, x1 = float(first.nodes[0]), float(first.nodes[-1])
    win = {}
    for s in locs:
        win[s] = (windows or {}).get(s, _window(s, all_points or locs, x0, x1))
    values = {s: {} for s in locs}
    for sol in sorted(solutions, key=lambda v: -v.epsilon):
        for s in locs:
            values[s][sol.epsilon] = derivative_bound(sol, s, win[s])
    ns = {sol.n for sol in solutions}
    return DerivativeBoundReport(values, win, ns.pop() if len(ns) == 1 else None)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class BenchmarkResult:
    spec: ExampleSpec
    report: ErrorReport
    solutions: dict
    references: dict
    baselines: dict = field(default_factory=dict)
    diagnostics: Optional[DerivativeBoundReport] = None
    errors: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def run_example(
    spec: ExampleSpec,
    mode: Optional[str] = None,
    n1: Optional[int] = None,
    ref_n: int = 4096,
    baseline: bool = False,
    diagnose: bool = False,
    cache: Optional[ReferenceCache] = None,
    **solver_options,
) -> BenchmarkResult:
    """Sweep ``spec`` over its eps and N lists.

    Failing cells are recorded in ``errors`` as ``(eps, N, stage, message)``
    and the sweep carries on.  The reference for each eps is computed once
    and reused for every N.
    """
    mode = mode or spec.mode
    n1 = int(n1 or spec.n1)
    cache = cache if cache is not None else ReferenceCache()
    opts = SolverOptions(mode=mode, n1=n1, **solver_options)
    solutions: dict = {}
    references: dict = {}
    baselines: dict = {}
    errors: list = []
    notes: list = []
    timings: dict = {"reference": 0.0, "sweep": 0.0, "baseline": 0.0}
    ref_fns: dict = {}
    for eps in spec.eps_list:
        bvp = spec.problem(eps)
        if spec.exact is not None:
            exact = bvp.exact
            ref_fns[eps] = lambda sol, exact=exact: exact(sol.nodes)
            references[eps] = "closed-form"
        else:
            t0 = time.perf_counter()
            try:
                ref = cache.get(spec, eps, ref_n, **{k: v for k, v in solver_options.items()
                                                     if k not in ("mode", "n1")})
            except PipelineError as exc:
                for n in spec.n_list:
                    errors.append((eps, n, "reference:" + exc.stage, exc.detail))
                continue
            finally:
                timings["reference"] += time.perf_counter() - t0
            references[eps] = ref
            ref_fns[eps] = _grid_reference(ref, notes)
        for n in spec.n_list:
            t0 = time.perf_counter()
            try:
                solutions[(eps, n)] = pgfem_solve(bvp, n, opts)
            except PipelineError as exc:
                errors.append((eps, n, exc.stage, exc.detail))
            timings["sweep"] += time.perf_counter() - t0
            if baseline:
                t0 = time.perf_counter()
                try:
                    baselines[(eps, n)] = upwind_shishkin_solve(bvp, n)
                except (ValueError, ArithmeticError) as exc:
                    errors.append((eps, n, "baseline", str(exc)))
                timings["baseline"] += time.perf_counter() - t0

    rows = []
    for eps in spec.eps_list:
        sols = [solutions[(eps, n)] for n in spec.n_list if (eps, n) in solutions]
        if sols and eps in ref_fns:
            rows.extend(error_report(sols, ref_fns[eps], spec.identifier).rows)
    report = ErrorReport(tuple(rows))

    diagnostics = None
    if diagnose and solutions:
        n_diag = max(n for (_, n) in solutions)
        diagnostics = derivative_bound_diagnostic(
            [s for (e, n), s in solutions.items() if n == n_diag])
    return BenchmarkResult(spec, report, solutions, references, baselines, diagnostics,
                           errors, notes, timings,
                           {"mode": mode, "n1": n1, "ref_n": int(ref_n), **solver_options})
