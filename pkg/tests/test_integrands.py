import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bdlab
from bdlab import GrowthViolationError, InputError, ParseError
from bdlab.integrands import pretty_print


# -- parser ----------------------------------------------------------------


GOOD_EXPRS = [
    "norm(A)",
    "sqrt(1 + normsq(A))",
    "dot(A, A) + tr(A)^2",
    "min(norm(A), 3) * max(x[0], 0)",
    "abs(sin(x[1])) / (1 + norm(A))",
    "2*norm(A) - norm(A - A)",
    "-norm(A)",
]


@pytest.mark.parametrize("src", GOOD_EXPRS)
def test_pretty_print_fixed_point(src):
    printed = pretty_print(src)
    assert pretty_print(printed) == printed


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as exc:
        bdlab.parse_integrand("norm(A) + * 2")
    assert exc.value.position is not None


@pytest.mark.parametrize("src", [
    "A + 1",            # bare matrix outside a reducing function
    "sin(A)",           # scalar-only function fed a matrix
    "norm(x[0])",       # matrix function fed a scalar
    "dot(A)",           # wrong arity
    "x[2]",             # index out of range in 2D
    "norm(A",           # unbalanced parens
])
def test_grammar_rejections(src):
    # syntax errors surface as ParseError, type errors as InputError;
    # ParseError subclasses InputError so both are rejected inputs
    with pytest.raises(InputError):
        f = bdlab.parse_integrand(src)
        f(np.zeros((1, 2)), np.zeros((1, 2, 2)))


def test_parsed_evaluation_matches_numpy():
    f = bdlab.parse_integrand("sqrt(1 + normsq(A)) + 0.5*tr(A)*x[0]")
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 2, 2))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    x = rng.normal(size=(5, 2))
    expect = np.sqrt(1 + np.sum(A * A, axis=(-2, -1))) + \
        0.5 * np.trace(A, axis1=-2, axis2=-1) * x[:, 0]
    assert np.allclose(f(x, A), expect)


def test_precedence_and_power():
    f = bdlab.parse_integrand("1 + 2 * 3 ^ 2 + norm(A) * 0")
    assert float(f(None, np.zeros((2, 2)))) == 19.0


def test_x_dependence_detection():
    assert not bdlab.parse_integrand("norm(A)").x_dependent
    assert bdlab.parse_integrand("norm(A) + x[1]").x_dependent


# -- recession --------------------------------------------------------------


def test_recession_exact_for_one_homogeneous():
    f = bdlab.make_norm()
    A = np.array([[1.0, 2.0], [2.0, -1.0]])
    est = bdlab.recession(f, None, A)
    assert est.converged
    assert est.value == pytest.approx(np.linalg.norm(A), abs=1e-10)


def test_recession_area_is_norm():
    f = bdlab.make_area()
    A = np.array([[0.3, -0.2], [-0.2, 1.1]])
    est = bdlab.recession(f, None, A)
    assert est.value == pytest.approx(np.linalg.norm(A), abs=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_recession_positive_homogeneity(a, b, c):
    f = bdlab.make_area()
    A = np.array([[a, b], [b, c]])
    base = bdlab.recession(f, None, A).value
    for theta in (2.0, 10.0):
        scaled = bdlab.recession(f, None, theta * A).value
        assert scaled == pytest.approx(theta * base, abs=1e-6 * (1 + theta * abs(base)))


def test_recession_mode_ordering():
    f = bdlab.parse_integrand("norm(A) + sqrt(norm(A))")
    A = np.array([[1.0, 0.0], [0.0, -1.0]])
    lo = bdlab.recession(f, None, A, mode="lower_flat").value
    mid = bdlab.recession(f, None, A, mode="strong").value
    hi = bdlab.recession(f, None, A, mode="upper_sharp").value
    assert lo <= mid + 1e-9 and mid <= hi + 1e-9


def test_recession_growth_violation():
    f = bdlab.make_quadratic()
    with pytest.raises(GrowthViolationError):
        bdlab.recession(f, None, np.eye(2))


def test_transform_S():
    f = bdlab.make_norm()
    A_hat = 0.25 * np.array([[0.0, 1.0], [1.0, 0.0]])
    # for 1-homogeneous f the perspective map reduces to f itself
    assert bdlab.transform_S(f, None, A_hat) == pytest.approx(
        np.linalg.norm(A_hat), abs=1e-12)
    with pytest.raises(InputError):
        bdlab.transform_S(f, None, np.eye(2))


def test_growth_warning_flag():
    assert bdlab.make_quadratic().growth_warning
    assert not bdlab.make_norm().growth_warning


# -- cell problem -----------------------------------------------------------


def test_cell_problem_convex_no_violation():
    cell = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (17, 17))
    A = np.array([[1.0, 0.0], [0.0, -1.0]])
    res = bdlab.cell_problem_min(bdlab.make_norm(), A, cell)
    assert not res.violation
    assert res.min_mean <= res.h_at_A + 1e-12  # psi = 0 always evaluated
    assert res.min_mean == pytest.approx(res.h_at_A, abs=1e-6)


def test_cell_problem_strictly_convex_quadratic():
    cell = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (17, 17))
    res = bdlab.cell_problem_min(bdlab.make_quadratic(), np.eye(2), cell)
    assert not res.violation
    assert res.min_mean == pytest.approx(2.0, abs=1e-6)


def test_cell_problem_never_exceeds_h():
    cell = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (17, 17))
    res = bdlab.cell_problem_min(bdlab.make_neg_norm(), np.zeros((2, 2)), cell)
    assert res.min_mean <= res.h_at_A


def test_segment_scan_convex_empty():
    rng = np.random.default_rng(5)
    A_list = [0.5 * (M + M.T) for M in rng.normal(size=(5, 2, 2))]
    ab = [(rng.normal(size=2), rng.normal(size=2)) for _ in range(3)]
    thetas = [0.0, 0.25, 0.5, 0.75, 1.0]
    assert bdlab.dyad_segment_scan(bdlab.make_norm(), A_list, ab, thetas) == []


def test_segment_scan_violation_implies_cell_violation():
    h = bdlab.make_segment_violator()
    P2 = bdlab.sym_dyad([2.0, 0.0], [0.0, 1.0]).array  # = 2 e1 (.) e2
    A1 = -0.5 * P2
    out = bdlab.dyad_segment_scan(h, [A1], [([2.0, 0.0], [0.0, 1.0])], [0.5])
    assert len(out) == 1
    gap = out[0]["gap"]
    assert gap == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)
    mid = np.zeros((2, 2))
    cell = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (17, 17))
    res = bdlab.cell_problem_min(h, mid, cell)
    assert res.violation
