"""
A custom problem from text
==========================

Coefficients can be typed as expressions in x and eps.  Derivatives of p are
taken symbolically, so the tangent lines on the turning point neighbourhood
are exact.  Here p = 0.5 - x has an attractive turning point at x = 1/2.
"""

import numpy as np

from tpgfem import SolverOptions, custom_example, derivative, pgfem_solve, validate_problem

spec = custom_example("0.5 - x", "2 + x", "sin(pi*x)", u_left="1", u_right="0")
print("p'(x) =", derivative(spec.p))

for eps in (1e-2, 1e-4, 1e-6):
    bvp = spec.problem(eps)
    print(f"eps={eps:g}:", validate_problem(bvp))
    exact = pgfem_solve(bvp, 256)
    tfpm = pgfem_solve(bvp, 256, SolverOptions(mode="tfpm", n1=1024))
    gap = np.max(np.abs(exact.values - tfpm.values))
    mid = exact.values[128]
    print(f"  u(1/2) = {mid:.6f}; exact vs numerical test functions differ by {gap:.1e}")
