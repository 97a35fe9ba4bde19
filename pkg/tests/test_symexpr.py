import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from cartan import symexpr as sx
from cartan.symexpr import Chart, ParseError, Verdict

from conftest import NAMES, expressions, fd_derivative, random_expression


# ------------------------------------------------------------------ parsing

@given(expressions())
def test_print_parse_round_trip(e):
    assert sx.parse_expr(str(e)) == e


@given(expressions())
def test_printing_is_idempotent(e):
    s = str(e)
    assert str(sx.parse_expr(s)) == s


@pytest.mark.parametrize("text, expected", [
    ("x + 2*y", "x + 2*y"),
    ("-x^2", "-(x^2)"),
    ("(-x)^2", "(-x)^2"),
    ("x^-1", "x^-1"),
    ("2^3", "8"),
    ("sin(x)*cos(y)", "sin(x)*cos(y)"),
    ("1/x/y", "1/x/y"),
    ("x - (y - z)", "x - y + z"),
])
def test_parse_canonical_forms(text, expected):
    assert str(sx.parse_expr(text)) == expected


def test_unary_minus_binds_looser_than_power():
    e = sx.parse_expr("-h^2")
    assert sx.evaluate(e, {"h": 3.0}) == -9.0
    assert sx.evaluate(sx.parse_expr("(-h)^2"), {"h": 3.0}) == 9.0


@pytest.mark.parametrize("text, pos", [
    ("x + ", 4),
    ("x $ y", 2),
    ("foo(x)", 0),
    ("x^y", 2),
    ("(x + y", 6),
    ("x + q", 4),
    ("sin + 1", 0),
    ("x/0", 2),
])
def test_parse_errors_report_position(text, pos):
    with pytest.raises(ParseError) as info:
        sx.parse_expr(text, ["x", "y"])
    assert info.value.pos == pos


def test_parse_against_chart_rejects_undeclared():
    chart = Chart(["x"], [(0, 1)])
    with pytest.raises(ParseError, match="undeclared"):
        sx.parse_expr("x*y", chart)


# -------------------------------------------------------------- derivatives

def _fn(e):
    f = sx.lambdify([e], NAMES)
    return lambda p: f(p)[0]


@given(expressions(smooth=True, max_leaves=8), st.integers(0, 2), st.integers(0, 2 ** 31))
def test_derivative_matches_finite_differences(e, mu, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1, 1, 3)
    d = sx.evaluate(sx.differentiate(e, NAMES[mu]), dict(zip(NAMES, p)))
    fd = fd_derivative(_fn(e), p, mu)
    assert abs(d - fd) <= 1e-6 * max(1.0, abs(d))


@given(expressions(smooth=True, max_leaves=8))
def test_derivative_agrees_with_sympy(e):
    mine = sx.to_sympy(sx.differentiate(e, "x"))
    ref = sympy.diff(sx.to_sympy(e), sx.to_sympy(sx.var("x")))
    f = sympy.lambdify([sx.to_sympy(sx.var(n)) for n in NAMES], mine - ref)
    rng = np.random.default_rng(0)
    for p in rng.uniform(-1, 1, (5, 3)):
        assert abs(f(*p)) <= 1e-8 * max(1.0, abs(sympy.lambdify([sx.to_sympy(sx.var(n)) for n in NAMES], ref)(*p)))


def test_product_and_chain_rules():
    e = sx.parse_expr("x^2*sin(y*x)")
    d = sx.normalize(sx.differentiate(e, "x") - sx.parse_expr("2*x*sin(x*y) + x^2*y*cos(x*y)"))
    assert d.is_zero()


@given(expressions(smooth=True, max_leaves=6), expressions(smooth=True, max_leaves=6))
def test_leibniz_rule(f, g):
    lhs = sx.differentiate(sx.mul(f, g), "y")
    rhs = sx.add(sx.mul(sx.differentiate(f, "y"), g), sx.mul(f, sx.differentiate(g, "y")))
    chart = Chart(NAMES)
    res = sx.is_identically_zero(lhs - rhs, chart, n=50, abs_tol=1e-8)
    assert res.passed


# ---------------------------------------------------------------- zero tests

def test_zero_test_symbolic_identity():
    chart = Chart(["x"], [(-2, 2)])
    e = sx.parse_expr("sin(x)^2 + cos(x)^2 - 1")
    res = sx.is_identically_zero(e, chart)
    assert res.verdict is Verdict.ZERO


def test_zero_test_nonzero_has_witness():
    chart = Chart(["x", "y"], [(0.5, 2), (-1, 1)])
    res = sx.is_identically_zero(sx.parse_expr("x*y - y*x + 1e-3*x"), chart)
    assert res.verdict is Verdict.NONZERO
    p = res.witness
    assert abs(sx.evaluate(sx.parse_expr("1e-3*x"), p) - res.value) < 1e-15


def test_zero_test_numeric_only_is_unknown():
    chart = Chart(["x"], [(0.1, 2)])
    e = sx.parse_expr("sqrt(x^2) - x")
    res = sx.is_identically_zero(e, chart, symbolic=False)
    assert res.verdict is Verdict.UNKNOWN and res.numerically_zero and res.passed


def test_guards_exclude_singular_points():
    chart = Chart(["x"], [(-1, 1)], guards=[sx.var("x")])
    pts = chart.sample(500, 0)
    assert np.all(np.abs(pts) > chart.guard_tol)
    res = sx.is_identically_zero(sx.parse_expr("x/x - 1"), chart, symbolic=False)
    assert res.passed


def test_denominators_found():
    dens = sx.denominators(sx.parse_expr("1/x + y/(x + y) + z^-2"))
    got = {str(d) for d in dens}
    assert {"x", "x + y", "z"} <= got


# ---------------------------------------------------------- evaluation/sympy

@given(expressions(max_leaves=10))
def test_sympy_round_trip_preserves_values(e):
    back = sx.from_sympy(sx.to_sympy(e))
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.2, 1.0, (4, 3))
    a = sx.lambdify([e], NAMES)(pts)[:, 0]
    b = sx.lambdify([back], NAMES)(pts)[:, 0]
    ok = np.isfinite(a) & np.isfinite(b) & (np.abs(a) < 1e8)
    assert np.allclose(a[ok], b[ok], rtol=1e-8, atol=1e-10)


def test_lambdify_shapes():
    f = sx.lambdify([sx.parse_expr("x + y"), sx.const(2)], ["x", "y"])
    assert f(np.array([[1.0, 2.0], [3.0, 4.0]])).tolist() == [[3.0, 2.0], [7.0, 2.0]]
    assert f(np.array([1.0, 1.0])).tolist() == [2.0, 2.0]


def test_normalize_rational_function():
    e = sx.parse_expr("(x^2 - 1)/(x - 1)")
    assert sx.normalize(e) == sx.parse_expr("x + 1")


def test_substitute():
    e = sx.parse_expr("x*y + 1")
    s = sx.substitute(e, {"x": sx.parse_expr("1/y")})
    assert sx.normalize(s) == sx.const(2)


def test_chart_grid_is_interior_and_guarded():
    chart = Chart(["x", "y"], [(0, 1), (-1, 1)], guards=[sx.var("y")])
    g = chart.grid(4)
    assert np.all((g[:, 0] > 0) & (g[:, 0] < 1))
    assert np.all(np.abs(g[:, 1]) > 1e-3)


def test_fixed_corpus_round_trip():
    rng = np.random.default_rng(11)
    for _ in range(200):
        e = random_expression(rng, depth=5, smooth=False)
        assert sx.parse_expr(str(e)) == e
