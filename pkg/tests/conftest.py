"""Shared oracles and problem factories for the test suite."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tpgfem import BoundaryValueProblem


def ode_dual(eps, value, slope, anchor, bhat, x1, x2, bc, xs, chunks=200):
    """Shooting oracle for -eps psi'' - p_bar psi' + bhat psi = 0.

    Integrates from the end where psi vanishes with unit slope, renormalising
    between chunks, then scales so psi = 1 at the other end.  Returns the
    values at ``xs`` and the derivatives at both element ends.
    """

    def pbar(x):
        return value + slope * (x - anchor)

    def rhs(x, y):
        return [y[1], (bhat * y[0] - pbar(x) * y[1]) / eps]

    if tuple(bc) == (0, 1):
        start, end, y0 = x1, x2, [0.0, 1.0]
    else:
        start, end, y0 = x2, x1, [0.0, -1.0]
    # keep growth per chunk near e^40 so no chunk overflows
    rate = max(abs(pbar(x1)), abs(pbar(x2))) * (x2 - x1) / eps
    chunks = max(chunks, int(math.ceil(rate / 40.0)))
    grid = np.linspace(start, end, chunks + 1)
    y = np.array(y0)
    logs = 0.0
    pts = {}
    xs = np.asarray(xs, dtype=float)
    for a, b in zip(grid[:-1], grid[1:]):
        lo, hi = min(a, b), max(a, b)
        inside = xs[(xs >= lo) & (xs <= hi)]
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=1e-13, atol=1e-20, dense_output=True)
        for t in inside:
            pts[float(t)] = (sol.sol(t)[0], logs)
        y = sol.y[:, -1]
        n = np.abs(y).max()
        y = y / n
        logs += math.log(n)
    yend = y[0]
    vals = np.array([pts[float(t)][0] * math.exp(pts[float(t)][1] - logs) / yend for t in xs])
    d_start = y0[1] * math.exp(-logs) / yend
    d_end = y[1] / yend
    if tuple(bc) == (0, 1):
        return vals, d_start, d_end
    return vals, d_end, d_start


def reaction_diffusion(eps=1.0):
    """-eps u'' + u = 1 on (0, 1), u(0) = u(1) = 0."""
    r = 1.0 / math.sqrt(eps)

    def exact(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - (np.exp(-r * x) + np.exp(-r * (1.0 - x))) / (1.0 + math.exp(-r))

    return BoundaryValueProblem(eps, lambda x: 0.0 * x, lambda x: 1.0 + 0.0 * x,
                                lambda x: 1.0 + 0.0 * x, 0.0, 1.0, 0.0, 0.0,
                                dp=lambda x: 0.0 * x, exact=exact)


@pytest.fixture
def oracle():
    return ode_dual
