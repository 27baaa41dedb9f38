"""
Second-order nodal convergence with a boundary turning point
============================================================

-eps u'' - x^3 u' + u = f on (0, 1) has a triple zero of p at x = 0 and the
exact solution u = exp(-x/sqrt(eps)) + exp(x).  Test functions are built
numerically (TFPM) on each element.  The errors stay uniform in eps and the
observed rate is close to 2.
"""

from tpgfem import builtin_example, run_example
from tpgfem.output import format_csv

spec = builtin_example("ex3", eps_list=(1.0, 1e-4, 1e-6), n_list=(32, 64, 128, 256))
res = run_example(spec)

print(f"{'eps':>8s} {'N':>5s} {'Linf':>10s} {'rate':>5s}")
for r in res.report.rows:
    rate = "" if r.rate_linf is None else f"{r.rate_linf:.2f}"
    print(f"{r.eps:8.0e} {r.n:5d} {r.linf:10.3e} {rate:>5s}")

# the same table in the machine readable schema
print(format_csv(res.report))
