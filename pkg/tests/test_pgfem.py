import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import reaction_diffusion
from tpgfem import BoundaryValueProblem
from tpgfem.benchmarks import BENCH_N1, builtin_example
from tpgfem.duals import build_test_functions
from tpgfem.mesh import ConfigurationError
from tpgfem.pgfem import (
    PipelineError,
    SolverOptions,
    TriDiagonalSystem,
    assemble,
    check_discrete_max_principle,
    pgfem_solve,
    solve_tridiagonal,
)


def constant_problem(eps, p=1.0, b=1.0, f=1.0):
    """-eps u'' + p u' + b u = f with zero boundary values, constant data."""
    sq = math.sqrt(p * p + 4 * eps * b)
    r1, r2 = (p + sq) / (2 * eps), (p - sq) / (2 * eps)
    c = f / b
    # u = c + A e^{r2 x} + B e^{r1 (x - 1)}
    m = np.array([[1.0, math.exp(-r1)], [math.exp(r2), 1.0]])
    A, B = np.linalg.solve(m, [-c, -c])

    def exact(x):
        return c + A * np.exp(r2 * x) + B * np.exp(r1 * (x - 1.0))

    const = lambda v: (lambda x: v + 0.0 * x)
    return BoundaryValueProblem(eps, const(p), const(b), const(f), 0.0, 1.0, 0.0, 0.0,
                                dp=const(0.0), exact=exact)


def test_nodal_exactness_reaction_diffusion():
    prob = reaction_diffusion(1.0)
    pgfem_solve(prob, 16)  # warm caches
    t0 = time.perf_counter()
    sol = pgfem_solve(prob, 16)
    elapsed = time.perf_counter() - t0
    assert np.max(np.abs(sol.values - prob.exact(sol.nodes))) <= 1e-10
    assert elapsed < 0.1


@pytest.mark.parametrize("eps", [1.0, 1e-3, 1e-6])
@pytest.mark.parametrize("n", [4, 16, 64])
def test_nodal_exactness_constant_coefficients(eps, n):
    prob = constant_problem(eps)
    sol = pgfem_solve(prob, n)
    assert np.max(np.abs(sol.values - prob.exact(sol.nodes))) <= 1e-10


def test_symmetric_for_self_adjoint_problem():
    prob = reaction_diffusion(1.0)
    sol = pgfem_solve(prob, 12)
    m = sol.system.matrix()
    assert np.max(np.abs(m - m.T)) <= 1e-12 * np.max(np.abs(m))


def test_no_jump_from_continuous_p():
    prob = constant_problem(1e-2, p=2.0)
    sol = pgfem_solve(prob, 8)
    np.testing.assert_array_equal(sol.coefficients.jumps(sol.partition), 0.0)


def _quadrature_system(sol, prob):
    """B(phi_j, psi_i) and (f, psi_i) by adaptive quadrature on every element."""
    x = sol.nodes
    n = sol.n
    eps = prob.epsilon
    c = sol.coefficients
    tests = build_test_functions(sol.duals)
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    sub, diag, sup, rhs = (np.zeros(n - 1) for _ in range(4))
    for row, t in enumerate(tests):
        i = t.node
        for k, half in ((i, t.left), (i + 1, t.right)):
            a, b = x[k - 1], x[k]
            h = b - a
            psi = lambda s: float(half.evaluate(np.array([s]))[0])
            jump = psi(b) - psi(a)
            pbar = lambda s: float(c.p_bar(k, s))
            bb = c.b[k - 1]
            m_psi = quad(lambda s: pbar(s) * psi(s), a, b, **opts)[0]
            m_left = quad(lambda s: bb * (b - s) / h * psi(s), a, b, **opts)[0]
            m_right = quad(lambda s: bb * (s - a) / h * psi(s), a, b, **opts)[0]
            # phi_{k-1} falls, phi_k rises on I_k
            fall = -eps / h * jump - m_psi / h + m_left
            rise = eps / h * jump + m_psi / h + m_right
            if k == i:
                sub[row] += fall
                diag[row] += rise
            else:
                diag[row] += fall
                sup[row] += rise
            rhs[row] += quad(lambda s: float(prob.f(np.array([s]))[0]) * psi(s), a, b, **opts)[0]
    return sub, diag, sup, rhs


def test_flux_assembly_matches_quadrature():
    prob = builtin_example("ex2").problem(0.5)
    sol = pgfem_solve(prob, 8)
    sub, diag, sup, rhs = _quadrature_system(sol, prob)
    s = sol.system
    rhs[0] -= sub[0] * prob.u_left
    rhs[-1] -= sup[-1] * prob.u_right
    for got, want in ((s.sub, sub), (s.diag, diag), (s.sup, sup), (s.rhs, rhs)):
        np.testing.assert_allclose(got, want, rtol=1e-9)


def test_midpoint_load_option():
    prob = builtin_example("ex2").problem(1e-2)
    a = pgfem_solve(prob, 64, load="midpoint")
    b = pgfem_solve(prob, 64)
    assert 0 < np.max(np.abs(a.values - b.values)) < 1e-2
    with pytest.raises(ValueError):
        assemble(a.coefficients, build_test_functions(a.duals), a.partition, prob, load="midpoint2")


def test_assemble_from_test_function_list():
    prob = builtin_example("ex2").problem(1e-2)
    sol = pgfem_solve(prob, 16)
    sys_list = assemble(sol.coefficients, build_test_functions(sol.duals), sol.partition, prob)
    for name in ("sub", "diag", "sup", "rhs"):
        np.testing.assert_allclose(getattr(sys_list, name), getattr(sol.system, name), rtol=1e-14)


def test_thomas_identity_and_dense_oracle():
    n = 6
    eye = TriDiagonalSystem(np.zeros(n), np.ones(n), np.zeros(n), np.arange(n, dtype=float))
    np.testing.assert_array_equal(solve_tridiagonal(eye), np.arange(n))
    rng = np.random.default_rng(3)
    n = 50
    sub, sup = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    diag = np.abs(sub) + np.abs(sup) + rng.uniform(0.1, 1, n)
    rhs = rng.normal(size=n)
    system = TriDiagonalSystem(sub, diag, sup, rhs)
    dense = np.linalg.solve(system.matrix(), rhs)
    for piv in (False, True):
        np.testing.assert_allclose(solve_tridiagonal(system, pivoting=piv), dense, rtol=1e-12)


def test_residual_ex3():
    spec = builtin_example("ex3")
    sol = pgfem_solve(spec.problem(1e-6), 256, mode="tfpm", n1=spec.n1)
    s = sol.system
    u = sol.values[1:-1]
    a = s.matrix() @ u
    ref = s.rhs
    assert np.max(np.abs(a - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_max_principle_report():
    good = TriDiagonalSystem(np.array([-1.0, -1.0, -1.0]), np.array([3.0, 3.0, 3.0]),
                             np.array([-1.0, -1.0, -1.0]), np.zeros(3))
    assert check_discrete_max_principle(good).holds
    bad = TriDiagonalSystem(np.array([-1.0, -1.0, -1.0]), np.array([3.0, 1.5, 3.0]),
                            np.array([-1.0, -1.0, -1.0]), np.zeros(3))
    rep = check_discrete_max_principle(bad)
    assert not rep.holds and rep.worst_row == 2 and rep.failures == (2,)
    assert rep.worst_margin == pytest.approx(-0.5)
    pos = TriDiagonalSystem(np.array([0.0, 0.2, -1.0]), np.array([3.0, 3.0, 3.0]),
                            np.array([-1.0, -1.0, 0.0]), np.zeros(3))
    assert check_discrete_max_principle(pos).failures == (2,)


@pytest.mark.parametrize("name", ["ex2", "ex3"])
def test_max_principle_paper_examples(name):
    spec = builtin_example(name)
    for eps in (1.0, 1e-2, 1e-4, 1e-6):
        for n in (32, 256):
            sol = pgfem_solve(spec.problem(eps), n, mode="exact")
            assert sol.max_principle.holds, (eps, n, str(sol.max_principle))


def test_mode_consistency_ex2():
    prob = builtin_example("ex2").problem(1e-4)
    a = pgfem_solve(prob, 128, mode="exact")
    b = pgfem_solve(prob, 128, mode="tfpm", n1=1024)
    assert np.max(np.abs(a.values - b.values)) <= 1e-5


def test_keyword_options():
    prob = reaction_diffusion()
    with pytest.raises(TypeError):
        pgfem_solve(prob, 8, SolverOptions(), mode="tfpm")
    with pytest.raises(ConfigurationError):
        SolverOptions(mode="spline")
    with pytest.raises(ConfigurationError):
        SolverOptions(n1=1)


def test_pipeline_errors_carry_stage():
    ex1 = builtin_example("ex1")
    strict = BoundaryValueProblem(1e-2, ex1.p.evaluate, ex1.b.evaluate, ex1.f.evaluate, 0.0, 1.0, 1.0, 2.0)
    with pytest.raises(PipelineError) as info:
        pgfem_solve(strict, 64)
    assert info.value.stage == "validate"
    with pytest.raises(PipelineError) as info:
        pgfem_solve(reaction_diffusion(), 1)
    assert info.value.stage == "mesh"
    with pytest.raises(PipelineError) as info:
        pgfem_solve(ex1.problem(1.0), 64, mode="tfpm")
    assert info.value.stage == "duals"
    assert "[duals]" in str(info.value) and "[duals]" not in info.value.detail


def test_ex1_waived_runs_and_records_max_principle():
    sol = pgfem_solve(builtin_example("ex1").problem(1e-4), 128)
    assert np.all(np.isfinite(sol.values))
    assert isinstance(sol.max_principle.holds, bool)
    assert sol.values[0] == 1.0 and sol.values[-1] == 2.0


def test_ex2_table1_cell():
    prob = builtin_example("ex2").problem(1e-6)
    ref = pgfem_solve(prob, 4096, mode="exact")
    sol = pgfem_solve(prob, 1024, mode="exact")
    err = np.max(np.abs(sol.values - ref.values[::4]))
    assert 1.51e-5 / 3 <= err <= 3 * 1.51e-5


def test_ex3_table4_cell():
    spec = builtin_example("ex3")
    prob = spec.problem(1e-6)
    sol = pgfem_solve(prob, 256, mode="tfpm", n1=BENCH_N1)
    err = np.max(np.abs(sol.values - prob.exact(sol.nodes)))
    assert 1.77e-5 / 3 <= err <= 3 * 1.77e-5
