"""Boundary value problem definition, well-posedness checks and singular points.

The problem class is

    -eps u'' + p(x) u' + b(x) u = f(x),   x_L < x < x_R,
    u(x_L) = u_L,  u(x_R) = u_R.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "BoundaryValueProblem",
    "ClassificationError",
    "EvaluationError",
    "SingularKind",
    "SingularPoint",
    "ValidationReport",
    "classify_singular_points",
    "find_turning_points",
    "validate_problem",
]

Coefficient = Callable[[np.ndarray], np.ndarray]


class EvaluationError(ValueError):
    """A coefficient returned a non-finite value."""


class ClassificationError(ValueError):
    """A turning point could not be classified unambiguously."""


def _as_array_function(func):
    """Wrap ``func`` so it maps arrays to float arrays of the same shape."""

    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        out = np.asarray(func(arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).copy()
        return out

    return wrapped


def _central_difference(func):
    def deriv(x):
        arr = np.asarray(x, dtype=float)
        step = 1e-6 * (1.0 + np.abs(arr))
        return (func(arr + step) - func(arr - step)) / (2.0 * step)

    return deriv


@dataclass(frozen=True)
class BoundaryValueProblem:
    """Singularly perturbed two-point boundary value problem.

    ``p``, ``b`` and ``f`` map numpy arrays to arrays.  Derivatives ``dp``,
    ``db``, ``df`` are optional; missing ones fall back to central finite
    differences with step ``1e-6 * (1 + |x|)``.

    ``waive_condition`` lets the solver run when ``b - p'`` is not bounded
    away from zero.  ``multiple_turning_point`` admits interior zeros of
    ``p`` with vanishing slope; endpoint zeros of that type are always
    accepted.
    """

    epsilon: float
    p: Coefficient
    b: Coefficient
    f: Coefficient
    x_left: float
    x_right: float
    u_left: float
    u_right: float
    dp: Optional[Coefficient] = None
    db: Optional[Coefficient] = None
    df: Optional[Coefficient] = None
    waive_condition: bool = False
    multiple_turning_point: bool = False
    name: str = "custom"
    exact: Optional[Coefficient] = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.x_left < self.x_right:
            raise ValueError(f"need x_left < x_right, got [{self.x_left}, {self.x_right}]")
        for name in ("p", "b", "f", "dp", "db", "df", "exact"):
            func = getattr(self, name)
            if func is not None:
                object.__setattr__(self, name, _as_array_function(func))
        for name, base in (("dp", "p"), ("db", "b"), ("df", "f")):
            if getattr(self, name) is None:
                object.__setattr__(self, name, _central_difference(getattr(self, base)))

    @property
    def width(self) -> float:
        return self.x_right - self.x_left

    @property
    def domain(self) -> tuple[float, float]:
        return (self.x_left, self.x_right)

    def p_scale(self, samples: int = 1025) -> float:
        """max(1, sup |p|) sampled on a uniform grid."""
        xs = np.linspace(self.x_left, self.x_right, samples)
        return max(1.0, float(np.max(np.abs(self.p(xs)))))


@dataclass(frozen=True)
class ValidationReport:
    gamma0_estimate: float
    condition_ok: bool
    violations: list

    def __str__(self) -> str:
        status = "satisfied" if self.condition_ok else "violated"
        return (
            f"min(b - p') = {self.gamma0_estimate:.6g}; condition {status}"
            + (f" at {len(self.violations)} sample points" if self.violations else "")
        )


def validate_problem(bvp: BoundaryValueProblem, samples: int = 1001) -> ValidationReport:
    """Sample ``b - p'`` on a uniform grid and report its minimum."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    xs = np.linspace(bvp.x_left, bvp.x_right, samples)
    for name in ("p", "b", "f", "dp"):
        vals = getattr(bvp, name)(xs)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise EvaluationError(f"coefficient {name} is not finite at x={xs[bad][0]!r}")
    margin = bvp.b(xs) - bvp.dp(xs)
    gamma0 = float(margin.min())
    violations = [float(x) for x in xs[margin <= 0.0]]
    return ValidationReport(gamma0, gamma0 > 0.0, violations)


def _bisect(func, lo, hi, f_lo, tol):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = float(func(np.array([mid]))[0])
        if abs(f_mid) <= tol or hi - lo <= 4e-16 * max(1.0, abs(mid)):
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_turning_points(bvp: BoundaryValueProblem, scan_resolution: int = 256) -> list[float]:
    """Zeros of ``p`` on the closed interval, sorted.

    Sign changes on a uniform scan grid are refined by bisection; endpoint
    zeros are detected with the tolerance ``1e-12 * max(1, sup|p|)``.
    Tangential (even-order) interior zeros are not detected, and
    ``p`` vanishing on the whole scan grid yields no turning points.
    """
    if scan_resolution < 16:
        raise ValueError("scan_resolution must be >= 16")
    xs = np.linspace(bvp.x_left, bvp.x_right, scan_resolution + 1)
    ps = bvp.p(xs)
    scale = max(1.0, float(np.max(np.abs(ps))))
    end_tol = 1e-12 * scale
    root_tol = 1e-13 * scale
    if np.all(np.abs(ps) <= end_tol):
        return []  # p == 0: pure reaction-diffusion, no turning points
    roots: list[float] = []
    if abs(ps[0]) <= end_tol:
        roots.append(float(xs[0]))
    cell = xs[1] - xs[0]
    for i in range(1, scan_resolution + 1):
        left, right = ps[i - 1], ps[i]
        if i == scan_resolution and abs(right) <= end_tol:
            continue
        if abs(right) <= root_tol and 0 < i < scan_resolution:
            roots.append(float(xs[i]))
        elif left * right < 0.0 and abs(left) > root_tol:
            roots.append(_bisect(bvp.p, xs[i - 1], xs[i], left, root_tol))
    if abs(ps[-1]) <= end_tol:
        roots.append(float(xs[-1]))
    roots.sort()
    deduped: list[float] = []
    for r in roots:
        if deduped and r - deduped[-1] <= cell:
            continue
        deduped.append(r)
    return deduped


class SingularKind(enum.Enum):
    EXPONENTIAL_BOUNDARY_LAYER = "ExponentialBoundaryLayer"
    ATTRACTIVE_INTERIOR_TP = "AttractiveInteriorTP"
    REPULSIVE_INTERIOR_TP = "RepulsiveInteriorTP"
    BOUNDARY_TP_POSITIVE_SLOPE = "BoundaryTPPositiveSlope"
    BOUNDARY_TP_NEGATIVE_SLOPE = "BoundaryTPNegativeSlope"
    MULTIPLE_BOUNDARY_TP = "MultipleBoundaryTP"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SingularPoint:
    """A point needing special treatment.

    ``lam`` is ``-b(z)/p'(z)``, attached to attractive interior turning
    points only.
    """

    location: float
    kind: SingularKind
    slope: float
    lam: Optional[float] = None

    @property
    def is_boundary(self) -> bool:
        return self.kind not in (
            SingularKind.ATTRACTIVE_INTERIOR_TP,
            SingularKind.REPULSIVE_INTERIOR_TP,
        )


def classify_singular_points(
    bvp: BoundaryValueProblem, turning_points: Sequence[float]
) -> list[SingularPoint]:
    """Classify zeros of ``p`` and add exponential layers at outflow ends."""
    scale = max(1.0, bvp.p_scale() / bvp.width)
    slope_tol = 1e-10 * scale
    out: list[SingularPoint] = []
    at_left = at_right = False
    for z in turning_points:
        z = float(z)
        slope = float(bvp.dp(np.array([z]))[0])
        on_left = abs(z - bvp.x_left) <= 1e-14 * max(1.0, abs(bvp.x_left))
        on_right = abs(z - bvp.x_right) <= 1e-14 * max(1.0, abs(bvp.x_right))
        if on_left or on_right:
            at_left |= on_left
            at_right |= on_right
            z = bvp.x_left if on_left else bvp.x_right
            if abs(slope) < slope_tol:
                out.append(SingularPoint(z, SingularKind.MULTIPLE_BOUNDARY_TP, 0.0))
            elif slope > 0.0:
                out.append(SingularPoint(z, SingularKind.BOUNDARY_TP_POSITIVE_SLOPE, slope))
            else:
                out.append(SingularPoint(z, SingularKind.BOUNDARY_TP_NEGATIVE_SLOPE, slope))
            continue
        if abs(slope) < slope_tol:
            if not bvp.multiple_turning_point:
                raise ClassificationError(
                    f"interior zero of p at x={z} has |p'| = {abs(slope):.3g} below "
                    "tolerance; set multiple_turning_point to accept it"
                )
            # odd-order zero: classify by the direction of the sign change
            probe = 1e-3 * bvp.width
            left, right = bvp.p(np.array([z - probe, z + probe]))
            kind = (SingularKind.ATTRACTIVE_INTERIOR_TP if right < left
                    else SingularKind.REPULSIVE_INTERIOR_TP)
            out.append(SingularPoint(z, kind, 0.0))
            continue
        if slope < 0.0:
            b_z = float(bvp.b(np.array([z]))[0])
            out.append(SingularPoint(z, SingularKind.ATTRACTIVE_INTERIOR_TP, slope, -b_z / slope))
        else:
            out.append(SingularPoint(z, SingularKind.REPULSIVE_INTERIOR_TP, slope))
    ends = bvp.p(np.array([bvp.x_left, bvp.x_right]))
    if ends[1] > 0.0 and not at_right:
        out.append(SingularPoint(bvp.x_right, SingularKind.EXPONENTIAL_BOUNDARY_LAYER,
                                 float(bvp.dp(np.array([bvp.x_right]))[0])))
    if ends[0] < 0.0 and not at_left:
        out.append(SingularPoint(bvp.x_left, SingularKind.EXPONENTIAL_BOUNDARY_LAYER,
                                 float(bvp.dp(np.array([bvp.x_left]))[0])))
    out.sort(key=lambda s: s.location)
    return out
