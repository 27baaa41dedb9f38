import math
import warnings

import numpy as np
import pytest

from tpgfem.benchmarks import builtin_example
from tpgfem.duals import (
    DualDomainError,
    DualStabilityWarning,
    build_element_duals,
    build_test_functions,
    dual_summary,
    solve_dual_exact_constant,
    solve_dual_exact_linear,
    solve_dual_tfpm,
)
from tpgfem.pgfem import SolverOptions, pgfem_solve

RISE, FALL = (0, 1), (1, 0)


def test_constant_closed_form():
    half = solve_dual_exact_constant(1.0, 0.0, 1.0, (0.0, 1.0), RISE)
    assert half.evaluate(0.5) == pytest.approx(math.sinh(0.5) / math.sinh(1.0), rel=1e-14)
    assert half.d_left == pytest.approx(1 / math.sinh(1.0), rel=1e-13)
    assert half.d_right == pytest.approx(math.cosh(1.0) / math.sinh(1.0), rel=1e-13)
    assert half.mass == pytest.approx((math.cosh(1.0) - 1) / math.sinh(1.0), rel=1e-13)


@pytest.mark.parametrize("solve,args", [
    (solve_dual_exact_constant, (1.0, 0.3, 1.0)),
    (solve_dual_exact_linear, (1e-2, 0.0, 1.5, 0.0, 1.0)),
    (solve_dual_tfpm, (1e-2, 0.0, 1.5, 0.0, 1.0)),
])
def test_zero_boundary_data(solve, args):
    half = solve(*args, (0.0, 0.5), (0, 0))
    assert half.mass == 0.0 and half.d_left == 0.0 and half.d_right == 0.0
    np.testing.assert_array_equal(half.evaluate(np.linspace(0, 0.5, 7)), 0.0)


def test_constant_small_eps_is_finite_and_bounded():
    for bc in (RISE, FALL):
        half = solve_dual_exact_constant(1e-6, 1.0, 1.0, (0.0, 1 / 64), bc)
        vals = half.evaluate(np.linspace(0, 1 / 64, 2001))
        assert np.all(np.isfinite([half.d_left, half.d_right, half.mass]))
        assert vals.min() >= 0.0 and vals.max() <= 1.0
        assert 0.0 < half.mass <= 1 / 64


def test_constant_against_oracle(oracle):
    xs = np.linspace(0.2, 0.3, 11)
    for eps, c, bh in ((1e-2, 1.0, 2.0), (1e-3, -2.0, 0.5), (0.3, 0.0, 0.0)):
        for bc in (RISE, FALL):
            half = solve_dual_exact_constant(eps, c, bh, (0.2, 0.3), bc)
            ref, dl, dr = oracle(eps, c, 0.0, 0.0, bh, 0.2, 0.3, bc, xs)
            np.testing.assert_allclose(half.evaluate(xs), ref, atol=1e-11)
            assert half.d_left == pytest.approx(dl, rel=1e-9, abs=1e-9)
            assert half.d_right == pytest.approx(dr, rel=1e-9, abs=1e-9)


def test_constant_monotone_and_mass():
    xs = np.linspace(0.0, 0.1, 401)
    for eps, c, bh in ((1e-4, 1.0, 1.0), (1e-4, -1.0, 3.0), (1.0, 0.5, 0.0)):
        rise = solve_dual_exact_constant(eps, c, bh, (0.0, 0.1), RISE).evaluate(xs)
        fall = solve_dual_exact_constant(eps, c, bh, (0.0, 0.1), FALL).evaluate(xs)
        assert np.all(np.diff(rise[rise > 1e-300]) > 0)
        assert np.all(np.diff(fall[fall > 1e-300]) < 0)
        assert rise[0] == 0.0 and rise[-1] == 1.0 and fall[0] == 1.0 and fall[-1] == 0.0


def test_constant_rejects_negative_bhat():
    with pytest.raises(DualDomainError):
        solve_dual_exact_constant(1.0, 0.0, -0.5, (0.0, 1.0), RISE)
    with pytest.raises(ValueError):
        solve_dual_exact_constant(1.0, 0.0, 1.0, (0.0, 1.0), (1, 1))


def random_linear_configs(count, seed):
    """Random elements and linear convections around a turning point x0."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        eps = 10 ** rng.uniform(-6, 0)
        slope = rng.uniform(0.5, 3) * rng.choice([-1.0, 1.0])
        bhat = rng.uniform(0.5, 4)
        h = 2.0 ** -int(rng.integers(3, 7))
        x1 = rng.uniform(-1, 1 - h)
        x2 = x1 + h
        x0 = [x1, x2, x1 + rng.uniform(0, h), x1 - rng.uniform(0, 2 * h)][int(rng.integers(4))]
        out.append((eps, slope, x0, bhat, x1, x2))
    return out


@pytest.mark.parametrize("config", random_linear_configs(8, 7))
def test_linear_against_oracle(config, oracle):
    eps, slope, x0, bhat, x1, x2 = config
    xs = np.linspace(x1, x2, 11)
    for bc in (RISE, FALL):
        half = solve_dual_exact_linear(eps, 0.0, slope, x0, bhat, (x1, x2), bc)
        ref, dl, dr = oracle(eps, 0.0, slope, x0, bhat, x1, x2, bc, xs, chunks=40)
        assert np.max(np.abs(half.evaluate(xs) - ref)) <= 1e-8
        scale = max(abs(dl), abs(dr), 1.0)
        assert abs(half.d_left - dl) <= 1e-8 * scale
        assert abs(half.d_right - dr) <= 1e-8 * scale


def test_linear_negative_bhat(oracle):
    # b_hat < 0 is fine for the PCF construction
    xs = np.linspace(0.0, 0.125, 9)
    half = solve_dual_exact_linear(1e-3, 0.0, -2.0, 0.0, -0.4, (0.0, 0.125), RISE)
    ref, _, _ = oracle(1e-3, 0.0, -2.0, 0.0, -0.4, 0.0, 0.125, RISE, xs)
    assert np.max(np.abs(half.evaluate(xs) - ref)) <= 1e-8


def test_linear_close_to_constant_away_from_turning_point():
    # x0 far outside: p_bar varies by O(h), so the frozen constant is O(h) away
    diffs = []
    for h in (0.1, 0.05, 0.025):
        x1, x2 = 1.0, 1.0 + h
        lin = solve_dual_exact_linear(1e-2, 1.0, 1.0, x1, 1.0, (x1, x2), RISE)
        con = solve_dual_exact_constant(1e-2, 1.0 + 0.5 * h, 1.0, (x1, x2), RISE)
        xs = np.linspace(x1, x2, 21)
        diffs.append(np.max(np.abs(lin.evaluate(xs) - con.evaluate(xs))))
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[1] / diffs[2] > 1.8


def test_linear_adjoint_residual():
    eps, value, slope, anchor, bhat = 1e-2, 0.1, -1.5, 0.3, 2.0
    x1, x2 = 0.25, 0.375
    d = 1e-4
    xs = np.linspace(x1 + 2 * d, x2 - 2 * d, 10)
    for bc in (RISE, FALL):
        half = solve_dual_exact_linear(eps, value, slope, anchor, bhat, (x1, x2), bc)
        e = half.evaluate
        dd = (e(xs + d) - 2 * e(xs) + e(xs - d)) / d**2
        dp = (e(xs + d) - e(xs - d)) / (2 * d)
        res = -eps * dd - (value + slope * (xs - anchor)) * dp + bhat * e(xs)
        assert np.max(np.abs(res)) <= 1e-8 / eps


def test_tfpm_constant_is_exact():
    for eps, c, bh in ((1e-4, 1.0, 1.0), (1e-6, -0.7, 2.0), (1.0, 0.0, 1.0), (1e-2, 3.0, 0.0)):
        for bc in (RISE, FALL):
            exact = solve_dual_exact_constant(eps, c, bh, (0.0, 0.125), bc)
            tf = solve_dual_tfpm(eps, c, 0.0, 0.0, bh, (0.0, 0.125), bc, n1=64)
            ys = np.linspace(0.0, 0.125, 65)
            ref = exact.evaluate(ys)
            got = tf.evaluate(ys)
            big = ref > 1e-150
            np.testing.assert_allclose(got[big], ref[big], rtol=1e-12)
            assert tf.d_left == pytest.approx(exact.d_left, rel=1e-12)
            assert tf.d_right == pytest.approx(exact.d_right, rel=1e-12)
            assert tf.mass == pytest.approx(exact.mass, rel=1e-12)


def test_tfpm_self_convergence():
    # left element of Ex. 4.2 at N = 256, midpoint tangent
    eps, h = 1e-4, 1 / 128
    x1, x2 = -1.0, -1.0 + h
    m = 0.5 * (x1 + x2)
    v, s, bh = 1 - m * m, -2 * m, 3 + 2 * m
    errs = []
    for n1 in (32, 64, 128, 256):
        worst = 0.0
        for bc in (RISE, FALL):
            ex = solve_dual_exact_linear(eps, v, s, m, bh, (x1, x2), bc)
            tf = solve_dual_tfpm(eps, v, s, m, bh, (x1, x2), bc, n1=n1)
            ys = np.linspace(x1, x2, n1 + 1)
            worst = max(worst, np.max(np.abs(ex.evaluate(ys) - tf.evaluate(ys))))
        errs.append(worst)
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-6


@pytest.mark.parametrize("freeze", ["endpoint", "midpoint"])
def test_tfpm_derivatives_converge(freeze):
    eps, x1, x2 = 1e-3, 0.25, 0.3125
    args = (eps, 0.0, -2 * math.pi, 0.25, 1 + 2 * math.pi)
    ex = solve_dual_exact_linear(*args, (x1, x2), FALL)
    errs = [abs(solve_dual_tfpm(*args, (x1, x2), FALL, n1=n, freeze=freeze).d_left - ex.d_left)
            for n in (64, 256, 1024)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-3 * abs(ex.d_left)


def test_tfpm_large_n1_endpoint_derivatives_are_stable():
    # eps = 1 and a very fine submesh used to lose every digit of d_left
    ex = solve_dual_exact_linear(1.0, 2 * (1 / 2048), 2.0 - 1 / 512, -1 + 1 / 2048, 3.0, (-1.0, -1 + 1 / 1024), FALL)
    tf = solve_dual_tfpm(1.0, 2 * (1 / 2048), 2.0 - 1 / 512, -1 + 1 / 2048, 3.0, (-1.0, -1 + 1 / 1024), FALL, n1=4096)
    assert tf.d_left == pytest.approx(ex.d_left, rel=1e-6)
    assert tf.d_right == pytest.approx(ex.d_right, rel=1e-6)


def test_tfpm_domain():
    with pytest.raises(DualDomainError):
        solve_dual_tfpm(1.0, 0.0, 1.0, 0.05, -1.0, (0.0, 0.1), RISE)
    # negative b_hat with real exponentials is accepted (no maximum principle then)
    half = solve_dual_tfpm(1e-4, 1.0, 0.5, 0.0, -0.5, (0.0, 0.1), RISE, n1=32)
    assert half.mass > 0.0 and np.isfinite([half.d_left, half.d_right]).all()
    with pytest.raises(ValueError):
        solve_dual_tfpm(1e-2, 0.0, 1.0, 0.0, 1.0, (0.0, 0.1), RISE, n1=1)
    with pytest.raises(ValueError):
        solve_dual_tfpm(1e-2, 0.0, 1.0, 0.0, 1.0, (0.0, 0.1), RISE, freeze="left")


def test_tfpm_max_principle_and_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error", DualStabilityWarning)
        for bc in (RISE, FALL):
            half = solve_dual_tfpm(1e-6, 0.0, -3.0, 0.05, 1.0, (0.0, 0.1), bc, n1=128)
            vals = half.evaluate(np.linspace(0, 0.1, 513))
            assert vals.min() >= -1e-12 and vals.max() <= 1.0 + 1e-12
            assert half.stable


def _ex2(n, eps, mode, n1=256):
    prob = builtin_example("ex2").problem(eps)
    return pgfem_solve(prob, n, SolverOptions(mode=mode, n1=n1))


def _test_function_gap(a, b, n1):
    ta, tb = build_test_functions(a.duals), build_test_functions(b.duals)
    worst = 0.0
    for fa, fb in zip(ta, tb):
        xs = np.linspace(fa.left.interval[0], fa.right.interval[1], 2 * n1 + 1)
        worst = max(worst, np.max(np.abs(fa.evaluate(xs) - fb.evaluate(xs))))
    return worst


def test_cross_mode_test_functions_ex2():
    # stated target: N1 = 256 agrees with the exact duals to 1e-6; the
    # frozen-coefficient stencil is second order in the sub-step and gives
    # about 9e-6 here (see the decisions ledger)
    a = _ex2(64, 1e-4, "exact")
    b = _ex2(64, 1e-4, "tfpm", 256)
    assert _test_function_gap(a, b, 256) <= 1e-6


def test_cross_mode_converges_in_n1():
    a = _ex2(64, 1e-4, "exact")
    gaps = [_test_function_gap(a, _ex2(64, 1e-4, "tfpm", n1), n1) for n1 in (256, 512, 1024)]
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.1)
    assert gaps[2] <= 1e-6


def test_test_functions_structure():
    sol = _ex2(32, 1e-2, "exact")
    tests = build_test_functions(sol.duals)
    assert len(tests) == 31
    x = sol.nodes
    for t in tests:
        i = t.node
        assert t.left.bc == RISE and t.right.bc == FALL
        vals = t.evaluate(np.array([x[i - 1], x[i], x[i + 1]]))
        np.testing.assert_allclose(vals, [0.0, 1.0, 0.0], atol=1e-13)
        assert t.left.evaluate(x[i]) == pytest.approx(t.right.evaluate(x[i]), abs=1e-13)
        inner = t.evaluate(np.linspace(x[i - 1], x[i + 1], 41))
        assert inner.min() >= -1e-12 and inner.max() <= 1 + 1e-12


def test_all_constant_problem_gives_exponential_halves():
    from tpgfem.coefficients import PiecewiseCoefficients
    from tpgfem.mesh import build_partition
    part = build_partition(0.0, 1.0, 8)
    n = 8
    coeffs = PiecewiseCoefficients(np.zeros(n, int), np.linspace(-1, 1, n), np.zeros(n),
                                   0.5 * (part.nodes[:-1] + part.nodes[1:]), np.ones(n), np.ones(n),
                                   np.full(n, -1))
    duals = build_element_duals(1e-3, coeffs, part, mode="exact")
    assert set(duals.method) == {"exact-constant"}
    assert dual_summary(duals) == {"methods": {"exact-constant": 8}, "fallbacks": 0, "unstable": 0}
    for t in build_test_functions(duals):
        vals = t.evaluate(np.linspace(0, 1, 801))
        assert vals.min() >= 0.0 and vals.max() <= 1.0


def test_build_element_duals_validation():
    sol = _ex2(16, 1e-2, "exact")
    with pytest.raises(ValueError):
        build_element_duals(1e-2, sol.coefficients, sol.partition, mode="pcf")
    assert {m for m in sol.duals.method} == {"exact-constant", "exact-linear"}
    tf = _ex2(16, 1e-2, "tfpm", 64)
    assert {m for m in tf.duals.method} == {"exact-constant", "tfpm"}
