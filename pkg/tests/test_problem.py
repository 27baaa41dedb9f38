import math

import numpy as np
import pytest

from tpgfem.benchmarks import builtin_example
from tpgfem.problem import (
    BoundaryValueProblem,
    ClassificationError,
    EvaluationError,
    SingularKind as K,
    classify_singular_points,
    find_turning_points,
    validate_problem,
)


def bvp(p, b=lambda x: 1.0 + 0 * x, domain=(0.0, 1.0), **kw):
    return BoundaryValueProblem(1e-3, p, b, lambda x: 0 * x, domain[0], domain[1], 0.0, 0.0, **kw)


def kinds(points):
    return [(round(s.location, 12), s.kind) for s in points]


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        BoundaryValueProblem(0.0, np.sin, np.cos, np.cos, 0.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        BoundaryValueProblem(1.0, np.sin, np.cos, np.cos, 1.0, 1.0, 0.0, 0.0)


def test_validate_examples():
    rep = validate_problem(bvp(lambda x: 1 - x * x, lambda x: 3 + 0 * x, (-1.0, 1.0)))
    assert rep.gamma0_estimate == pytest.approx(1.0, abs=1e-8)
    assert rep.condition_ok
    rep = validate_problem(bvp(lambda x: 0 * x))
    assert rep.gamma0_estimate == 1.0 and rep.condition_ok
    rep = validate_problem(bvp(lambda x: np.cos(2 * np.pi * x)))
    assert not rep.condition_ok
    v = np.array(rep.violations)
    assert np.all(1 + 2 * np.pi * np.sin(2 * np.pi * v) < 1e-9)
    assert "violated" in str(rep)


def test_validate_non_finite():
    with pytest.raises(EvaluationError):
        with np.errstate(divide="ignore"):
            validate_problem(bvp(lambda x: 1.0 / (x - 0.5)))


def test_finite_difference_fallback():
    prob = bvp(lambda x: np.sin(3 * x))
    assert prob.dp(np.array([0.4]))[0] == pytest.approx(3 * math.cos(1.2), rel=1e-8)


def test_find_turning_points():
    assert find_turning_points(bvp(lambda x: np.cos(2 * np.pi * x))) == pytest.approx([0.25, 0.75], abs=1e-12)
    assert find_turning_points(bvp(lambda x: 1 - x * x, domain=(-1.0, 1.0))) == [-1.0, 1.0]
    assert find_turning_points(bvp(lambda x: x + 2)) == []
    assert find_turning_points(bvp(lambda x: 0 * x)) == []
    with pytest.raises(ValueError):
        find_turning_points(bvp(lambda x: x), scan_resolution=4)


def test_classify_paper_examples():
    ex1 = builtin_example("ex1").problem(1e-4)
    pts = classify_singular_points(ex1, find_turning_points(ex1))
    assert kinds(pts) == [(0.25, K.ATTRACTIVE_INTERIOR_TP), (0.75, K.REPULSIVE_INTERIOR_TP),
                          (1.0, K.EXPONENTIAL_BOUNDARY_LAYER)]
    assert pts[0].lam == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    assert pts[1].lam is None and not pts[0].is_boundary

    ex2 = builtin_example("ex2").problem(1e-4)
    pts = classify_singular_points(ex2, find_turning_points(ex2))
    assert kinds(pts) == [(-1.0, K.BOUNDARY_TP_POSITIVE_SLOPE), (1.0, K.BOUNDARY_TP_NEGATIVE_SLOPE)]
    assert pts[0].slope == pytest.approx(2.0)

    ex3 = builtin_example("ex3").problem(1e-4)
    pts = classify_singular_points(ex3, find_turning_points(ex3))
    assert kinds(pts) == [(0.0, K.MULTIPLE_BOUNDARY_TP)]


@pytest.mark.parametrize("name", ["ex1", "ex2", "ex3"])
def test_classification_stable_under_scan_refinement(name):
    prob = builtin_example(name).problem(1e-2)
    ref = kinds(classify_singular_points(prob, find_turning_points(prob, 64)))
    for res in (128, 256, 1024):
        assert kinds(classify_singular_points(prob, find_turning_points(prob, res))) == ref


def test_negating_p_swaps_kinds():
    swap = {K.ATTRACTIVE_INTERIOR_TP: K.REPULSIVE_INTERIOR_TP,
            K.REPULSIVE_INTERIOR_TP: K.ATTRACTIVE_INTERIOR_TP,
            K.BOUNDARY_TP_POSITIVE_SLOPE: K.BOUNDARY_TP_NEGATIVE_SLOPE,
            K.BOUNDARY_TP_NEGATIVE_SLOPE: K.BOUNDARY_TP_POSITIVE_SLOPE}
    for p, dom in ((lambda x: np.cos(2 * np.pi * x), (0.0, 1.0)), (lambda x: 1 - x * x, (-1.0, 1.0))):
        a = bvp(p, domain=dom)
        b = bvp(lambda x, p=p: -p(x), domain=dom)
        ka = [(s.location, s.kind) for s in classify_singular_points(a, find_turning_points(a))
              if s.kind in swap]
        kb = [(s.location, s.kind) for s in classify_singular_points(b, find_turning_points(b))
              if s.kind in swap]
        assert [(x, swap[k]) for x, k in ka] == kb


def test_lambda_positive_when_b_positive():
    prob = bvp(lambda x: 0.5 - x, lambda x: 2 + x)
    (s,) = [s for s in classify_singular_points(prob, find_turning_points(prob))
            if s.kind is K.ATTRACTIVE_INTERIOR_TP]
    assert s.lam == pytest.approx(2.5)


def test_outflow_layer_sides():
    pts = classify_singular_points(bvp(lambda x: 1 + x), [])
    assert kinds(pts) == [(1.0, K.EXPONENTIAL_BOUNDARY_LAYER)]
    pts = classify_singular_points(bvp(lambda x: -1 - x), [])
    assert kinds(pts) == [(0.0, K.EXPONENTIAL_BOUNDARY_LAYER)]


def test_interior_multiple_zero():
    prob = bvp(lambda x: -(x - 0.5) ** 3)
    with pytest.raises(ClassificationError):
        classify_singular_points(prob, find_turning_points(prob))
    prob = bvp(lambda x: -(x - 0.5) ** 3, multiple_turning_point=True)
    pts = classify_singular_points(prob, find_turning_points(prob))
    assert (0.5, K.ATTRACTIVE_INTERIOR_TP) in kinds(pts)
