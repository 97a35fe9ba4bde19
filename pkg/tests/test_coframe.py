import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cartan import symexpr as sx
from cartan.algebroid import certify
from cartan.catalog import exp_coframe, random_diffeo, random_triangular_coframe, rank2_coframe
from cartan.coframe import (ClosedFormUnavailable, Coframe, ExpressionNotFunctionOfInvariants, NotFullyRegular,
                            SingularCoframe, coframe_derivative, derive_classifying_algebroid, invariant_tower,
                            pullback, structure_functions, verify_classifying_data)
from cartan.symexpr import Chart

from conftest import expressions


def test_rank2_structure_function_is_exactly_reciprocal():
    C = structure_functions(rank2_coframe())
    assert sx.normalize(C[1][0][1] - sx.parse_expr("1/x")).is_zero()
    assert C[1][1][0] == sx.neg(C[1][0][1])
    assert C[0][0][1].is_zero()


def test_structure_functions_reproduce_exterior_derivative():
    rng = np.random.default_rng(2)
    theta = random_triangular_coframe(rng, 3)
    C = structure_functions(theta)
    xs = theta.chart.coords
    p = theta.chart.sample(1, 0)[0]
    a = theta.a_at(p)[0]
    Cp = np.array([[[sx.evaluate(C[k][i][j], dict(zip(xs, p))) for j in range(3)] for i in range(3)]
                   for k in range(3)])
    dtheta = np.zeros((3, 3, 3))
    for k in range(3):
        for mu in range(3):
            for nu in range(3):
                dtheta[k, mu, nu] = (sx.evaluate(sx.differentiate(theta.a[k][nu], xs[mu]), dict(zip(xs, p)))
                                     - sx.evaluate(sx.differentiate(theta.a[k][mu], xs[nu]), dict(zip(xs, p))))
    # d theta^k = sum_{i<j} C^k_ij theta^i ^ theta^j
    rhs = np.einsum("kij,im,jn->kmn", Cp, a, a)
    assert np.allclose(dtheta, rhs, atol=1e-10)


@settings(max_examples=25)
@given(expressions(names=("x", "y"), smooth=True, max_leaves=5),
       expressions(names=("x", "y"), smooth=True, max_leaves=5))
def test_coframe_derivative_leibniz(f, g):
    theta = rank2_coframe()
    lhs = coframe_derivative(theta, sx.mul(f, g))
    df, dg = coframe_derivative(theta, f), coframe_derivative(theta, g)
    for k in range(2):
        diff = lhs[k] - (df[k] * g + f * dg[k])
        assert sx.is_identically_zero(diff, theta.chart, n=40, abs_tol=1e-8, symbolic=False).passed


def test_coframe_derivative_recovers_gradient():
    theta = rank2_coframe()
    f = sx.parse_expr("x^2*y")
    d = coframe_derivative(theta, f)
    # df = 2xy dx + x^2 dy = 2xy theta1 + x theta2
    assert sx.normalize(d[0] - sx.parse_expr("2*x*y")).is_zero()
    assert sx.normalize(d[1] - sx.parse_expr("x")).is_zero()


@settings(max_examples=8)
@given(st.integers(0, 2 ** 31))
def test_structure_functions_are_pullback_invariant(seed):
    rng = np.random.default_rng(seed)
    theta = random_triangular_coframe(rng, 2)
    ys = ["u", "v"]
    phi = random_diffeo(rng, ys, scale=0.2)
    chart = Chart(ys, [(-0.2, 0.2)] * 2)
    pulled = pullback(theta, dict(zip(theta.chart.coords, phi)), chart)
    Cx, Cy = structure_functions(theta), structure_functions(pulled)
    sub = dict(zip(theta.chart.coords, phi))
    for k in range(2):
        diff = Cy[k][0][1] - sx.substitute(Cx[k][0][1], sub)
        assert sx.is_identically_zero(diff, chart, n=30, abs_tol=1e-9, symbolic=False).passed


def test_rank2_tower_and_classifying_algebroid():
    theta = rank2_coframe()
    tower = invariant_tower(theta, s_max=2)
    assert tower.d == 1 and tower.fully_regular and tower.stabilized
    assert tower.ranks == [1, 1, 1]
    A, cert = derive_classifying_algebroid(theta, tower, h_names=["h"])
    assert cert.status == "pass"
    h = tower.generators[0]
    assert sx.normalize(h - sx.parse_expr("1/x")).is_zero()
    assert sx.normalize(A.C[1][0][1] - sx.parse_expr("h")).is_zero()
    assert sx.normalize(A.F[0][0] + sx.parse_expr("h^2")).is_zero()
    assert A.F[0][1].is_zero()
    chk = verify_classifying_data(theta, [h], A)
    assert chk.passed and chk.structure.verdict == "zero" and chk.anchor.verdict == "zero"


def test_explicit_inverse_is_used():
    theta = rank2_coframe()
    tower = invariant_tower(theta)
    A, cert = derive_classifying_algebroid(theta, tower, inverse={"x": "1/h"}, h_names=["h"])
    assert cert.passed
    with pytest.raises(ClosedFormUnavailable):
        derive_classifying_algebroid(theta, tower, inverse={"y": "h"}, h_names=["h"])


def test_constant_structure_gives_lie_algebra():
    theta = exp_coframe()
    tower = invariant_tower(theta)
    assert tower.d == 0
    A, cert = derive_classifying_algebroid(theta, tower)
    assert A.d == 0 and cert.passed
    assert any(not e.is_zero() for plane in A.C for row in plane for e in row)


def test_wrong_classifying_data_fails_with_witness():
    theta = rank2_coframe()
    tower = invariant_tower(theta)
    A, _ = derive_classifying_algebroid(theta, tower, h_names=["h"])
    chk = verify_classifying_data(theta, [sx.parse_expr("2/x")], A)
    assert not chk.passed
    assert chk.structure.witness is not None or chk.anchor.witness is not None


def test_not_a_function_of_chosen_generators():
    chart = Chart(["x", "y", "z"], [(0.5, 2.0), (0.5, 2.0), (-1.0, 1.0)])
    theta = Coframe(chart, [["1", "0", "0"], ["0", "x", "0"], ["0", "0", "y"]])
    tower = invariant_tower(theta, s_max=1, generators=[0])
    assert tower.d == 2
    with pytest.raises(ExpressionNotFunctionOfInvariants) as info:
        derive_classifying_algebroid(theta, tower)
    fp, fq = info.value.values
    assert abs(fp - fq) > 1e-8


def test_rank_drop_is_detected():
    chart = Chart(["x", "y"], [(-1.0, 1.0), (-1.0, 1.0)])
    theta = Coframe(chart, [["1", "0"], ["0", "exp(x^3/3)"]])
    with pytest.raises(NotFullyRegular) as info:
        invariant_tower(theta, s_max=1)
    assert info.value.tower.witnesses
    tower = invariant_tower(theta, s_max=1, strict=False)
    assert not tower.fully_regular


def test_singular_coframe_rejected():
    chart = Chart(["x", "y"], [(-1.0, 1.0), (-1.0, 1.0)])
    with pytest.raises(SingularCoframe):
        Coframe(chart, [["1", "0"], ["1", "0"]])
    with pytest.raises(SingularCoframe):
        Coframe(chart, [["1", "0"], ["0", "x"]])


def test_inverse_is_exact():
    theta = rank2_coframe()
    b = theta.inverse
    p = np.array([1.3, 0.2])
    a = theta.a_at(p)[0]
    bp = np.array([[sx.evaluate(e, {"x": p[0], "y": p[1]}) for e in row] for row in b])
    assert np.allclose(bp @ a, np.eye(2))


@settings(max_examples=5)
@given(st.integers(0, 2 ** 31))
def test_random_coframe_classifying_algebroid_certifies(seed):
    rng = np.random.default_rng(seed)
    theta = random_triangular_coframe(rng, 2)
    from cartan.catalog import identity_classifying_algebroid

    A = identity_classifying_algebroid(theta)
    assert certify(A, mode="numeric", abs_tol=1e-8).passed
