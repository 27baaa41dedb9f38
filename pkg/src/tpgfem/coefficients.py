"""Piecewise coefficient approximation on a partition.

Away from singular points ``p`` is frozen at element midpoints.  Near a
singular point it is replaced by a tangent line, which keeps the turning
point (or the boundary layer) inside the approximate problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mesh import Partition
from .problem import BoundaryValueProblem, SingularPoint

__all__ = [
    "AmbiguityError",
    "NeighborhoodPlan",
    "PiecewiseCoefficients",
    "approximate_coefficients",
    "plan_neighborhoods",
]

CONSTANT = 0
LINEAR = 1


class AmbiguityError(ValueError):
    """An element touches two distinct singular points."""


@dataclass(frozen=True)
class NeighborhoodPlan:
    """Neighbourhoods ``[s_i - delta, s_i + delta]`` clipped to the domain."""

    points: tuple
    delta: float
    intervals: tuple

    def containing(self, x: float):
        """Index of the neighbourhood containing ``x``, or ``None``."""
        for i, (lo, hi) in enumerate(self.intervals):
            if lo <= x <= hi:
                return i
        return None


def plan_neighborhoods(
    singular_points: Sequence[SingularPoint], x_left: float, x_right: float
) -> NeighborhoodPlan:
    """delta = min(0.1, min gap / 3), with the domain width standing in
    for the gap when there is a single singular point."""
    pts = tuple(sorted(singular_points, key=lambda s: s.location))
    locs = [s.location for s in pts]
    if len(locs) >= 2:
        gap = min(b - a for a, b in zip(locs, locs[1:]))
        if gap <= 0.0:
            raise AmbiguityError("duplicate singular points")
    else:
        gap = x_right - x_left
    delta = min(0.1, gap / 3.0)
    intervals = tuple((max(x_left, s - delta), min(x_right, s + delta)) for s in locs)
    return NeighborhoodPlan(pts, delta, intervals)


@dataclass(frozen=True)
class PiecewiseCoefficients:
    """Per-element data, element ``k`` stored at index ``k - 1``.

    On element ``k`` the approximate convection is
    ``p_bar(x) = value[k] + slope[k] * (x - anchor[k])``, with ``slope == 0``
    and ``anchor`` the midpoint on constant elements.
    """

    kind: np.ndarray
    value: np.ndarray
    slope: np.ndarray
    anchor: np.ndarray
    b: np.ndarray
    f: np.ndarray
    region: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.value.size

    def p_bar(self, k: int, x):
        i = k - 1
        return self.value[i] + self.slope[i] * (np.asarray(x, dtype=float) - self.anchor[i])

    def endpoint_values(self, partition: Partition) -> tuple[np.ndarray, np.ndarray]:
        """``p_bar`` at the left and right ends of every element."""
        x = partition.nodes
        left = self.value + self.slope * (x[:-1] - self.anchor)
        right = self.value + self.slope * (x[1:] - self.anchor)
        return left, right

    def jumps(self, partition: Partition) -> np.ndarray:
        """``p_bar_k(x_k^-) - p_bar_{k+1}(x_k^+)`` at interior nodes."""
        left, right = self.endpoint_values(partition)
        return right[:-1] - left[1:]


def approximate_coefficients(
    bvp: BoundaryValueProblem,
    partition: Partition,
    plan: NeighborhoodPlan,
    boundary_anchor: str = "midpoint",
) -> PiecewiseCoefficients:
    """Build the piecewise constant/linear coefficient approximation.

    Elements whose midpoint lies in a neighbourhood get the tangent line of
    ``p``.  Elements adjacent to an interior turning point are anchored at
    it, all others at their midpoint.  ``boundary_anchor`` sets the anchor
    of the element next to a singular endpoint: ``"midpoint"`` (default) or
    ``"singular"`` (the endpoint itself).
    """
    if boundary_anchor not in ("midpoint", "singular"):
        raise ValueError("boundary_anchor must be 'midpoint' or 'singular'")
    x = partition.nodes
    n = partition.n_elements
    mid = 0.5 * (x[:-1] + x[1:])
    kind = np.zeros(n, dtype=int)
    anchor = mid.copy()
    region = np.full(n, -1, dtype=int)
    locs = [s.location for s in plan.points]
    for k in range(n):
        touching = [i for i, s in enumerate(locs) if s == x[k] or s == x[k + 1]]
        if len(touching) > 1:
            raise AmbiguityError(
                f"element [{x[k]}, {x[k + 1]}] touches singular points "
                f"{[locs[i] for i in touching]}; increase N"
            )
        r = plan.containing(mid[k])
        if r is None:
            continue
        kind[k] = LINEAR
        region[k] = r
        if touching and touching[0] == r:
            sp = plan.points[r]
            if not sp.is_boundary or boundary_anchor == "singular":
                anchor[k] = sp.location
    value = bvp.p(anchor)
    slope = np.where(kind == LINEAR, bvp.dp(anchor), 0.0)
    b = bvp.b(mid)
    f = bvp.f(mid)
    for name, arr in (("p", value), ("p'", slope), ("b", b), ("f", f)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite {name} in coefficient approximation")
    return PiecewiseCoefficients(kind, value, slope, anchor, b, f, region)
