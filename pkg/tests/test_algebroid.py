import itertools
import warnings

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from cartan import symexpr as sx
from cartan.algebroid import (FlatAlgebroid, anchor_morphism_residual, certify, fiber_algebra, isotropy_at,
                              jacobi_residual, numeric_residuals, orbit_rank_at, same_orbit)
from cartan.catalog import (aff1_algebroid, constant_curvature_algebroid, identity_classifying_algebroid,
                            random_triangular_coframe, rank2_algebroid)
from cartan.liealg import classify_3d
from cartan.symexpr import Chart

X, Y = sympy.symbols("x y", real=True)


def _sym_poly(rng, deg=2):
    terms = [X ** a * Y ** b for a in range(deg + 1) for b in range(deg + 1 - a)]
    return sum(int(c) * t for c, t in zip(rng.integers(-2, 3, len(terms)), terms))


def _to_text(e) -> str:
    return str(e).replace("**", "^")


class SectionBracket:
    """Bracket of sections of X x R^n written directly with sympy."""

    def __init__(self, C, F, sigma):
        self.C, self.F, self.sigma = C, F, sigma
        self.n = len(C)
        self.xs = (X, Y)

    def anchor(self, u):
        return [sum(self.F[a][i] * u[i] for i in range(self.n)) for a in range(len(self.xs))]

    def act(self, field, f):
        return sum(field[a] * sympy.diff(f, x) for a, x in enumerate(self.xs))

    def bracket(self, u, v):
        au, av = self.anchor(u), self.anchor(v)
        return [self.sigma * sum(self.C[k][i][j] * u[i] * v[j] for i in range(self.n) for j in range(self.n))
                + self.act(au, v[k]) - self.act(av, u[k]) for k in range(self.n)]

    def unit(self, i):
        return [sympy.Integer(1 if p == i else 0) for p in range(self.n)]

    def jacobiator(self, i, j, k):
        e = self.unit
        parts = [self.bracket(self.bracket(e(a), e(b)), e(c)) for a, b, c in ((i, j, k), (j, k, i), (k, i, j))]
        return [sum(p[m] for p in parts) for m in range(self.n)]

    def anchor_defect(self, i, j):
        """[#e_i, #e_j] - #[e_i, e_j] as a vector field."""
        fi, fj = self.anchor(self.unit(i)), self.anchor(self.unit(j))
        lie = [self.act(fi, fj[b]) - self.act(fj, fi[b]) for b in range(len(self.xs))]
        hom = self.anchor(self.bracket(self.unit(i), self.unit(j)))
        return [lie[b] - hom[b] for b in range(len(self.xs))]


def _random_pair(seed, n=3):
    rng = np.random.default_rng(seed)
    C = [[[sympy.Integer(0)] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i, j in itertools.combinations(range(n), 2):
            v = _sym_poly(rng)
            C[k][i][j], C[k][j][i] = v, -v
    F = [[_sym_poly(rng) for _ in range(n)] for _ in range(2)]
    chart = Chart(["x", "y"], [(-1, 1), (-1, 1)])
    A = FlatAlgebroid(chart, [[[_to_text(e) for e in row] for row in plane] for plane in C],
                      [[_to_text(e) for e in row] for row in F])
    return C, F, A


@settings(max_examples=15)
@given(st.integers(0, 2 ** 31), st.sampled_from(["realization", "displayed"]))
def test_residual_tables_match_section_bracket_oracle(seed, convention):
    C, F, A = _random_pair(seed)
    sigma = -1 if convention == "realization" else 1
    oracle = SectionBracket(C, F, sigma)
    J = jacobi_residual(A, convention)
    M = anchor_morphism_residual(A, convention)
    pts = np.random.default_rng(seed + 1).uniform(-1, 1, (3, 2))
    Jn, Mn = numeric_residuals(A, pts, convention)
    jac = oracle.jacobiator(0, 1, 2)
    defect = [oracle.anchor_defect(i, j) for i, j in itertools.combinations(range(3), 2)]
    for p, pt in enumerate(pts):
        env = {X: pt[0], Y: pt[1]}
        point = {"x": pt[0], "y": pt[1]}
        for m in range(3):
            ref = float(jac[m].subs(env))
            assert abs(sx.evaluate(J[m][0][1][2], point) - ref) < 1e-9 * max(1, abs(ref))
            assert abs(Jn[p, m, 0, 1, 2] - ref) < 1e-9 * max(1, abs(ref))
        for q, (i, j) in enumerate(itertools.combinations(range(3), 2)):
            for b in range(2):
                ref = float(defect[q][b].subs(env))
                assert abs(sx.evaluate(M[b][i][j], point) - ref) < 1e-9 * max(1, abs(ref))
                assert abs(Mn[p, b, i, j] - ref) < 1e-9 * max(1, abs(ref))


def test_jacobi_table_is_totally_antisymmetric():
    _, _, A = _random_pair(3, n=3)
    J = jacobi_residual(A)
    pt = {"x": 0.3, "y": -0.2}
    v = sx.evaluate(J[1][0][1][2], pt)
    assert abs(sx.evaluate(J[1][1][0][2], pt) + v) < 1e-12
    assert abs(sx.evaluate(J[1][1][2][0], pt) - v) < 1e-12


def test_constant_curvature_certifies_symbolically():
    cert = certify(constant_curvature_algebroid())
    assert cert.jacobi.verdict == "zero" and cert.anchor.verdict == "zero"
    assert cert.status == "pass"


def test_rank2_algebroid_certifies():
    assert certify(rank2_algebroid()).status == "pass"


@given(st.integers(0, 2 ** 31))
def test_coframes_always_produce_algebroids(seed):
    # d^2 = 0 on a realization forces both identities
    theta = random_triangular_coframe(np.random.default_rng(seed), 2)
    A = identity_classifying_algebroid(theta)
    assert certify(A, mode="numeric", abs_tol=1e-8).status == "pass"


def test_convention_matters_for_anchored_algebroids():
    A = aff1_algebroid()
    real = certify(A, "realization")
    disp = certify(A, "displayed")
    assert real.status == "fail" and real.anchor.witness is not None
    assert disp.status == "pass"


def test_mutation_gives_witness():
    A = constant_curvature_algebroid()
    C = [[[e for e in row] for row in plane] for plane in A.C]
    C[0][0][1] = sx.const(1)
    C[0][1][0] = sx.const(-1)
    cert = certify(FlatAlgebroid(A.chart, C, A.F))
    assert cert.status == "fail"
    w = cert.jacobi.witness
    assert w["point"] is not None and abs(w["value"]) > 1e-6


@given(st.permutations(range(3)), st.integers(0, 50))
def test_residuals_are_permutation_invariant(perm, seed):
    _, _, A = _random_pair(seed)
    B = A.relabel(list(perm))
    pts = np.random.default_rng(seed).uniform(-1, 1, (5, 2))
    J1, M1 = numeric_residuals(A, pts)
    J2, M2 = numeric_residuals(B, pts)
    assert np.isclose(np.abs(J1).max(), np.abs(J2).max())
    assert np.isclose(np.abs(M1).max(), np.abs(M2).max())
    p = list(perm)
    assert np.allclose(J2, J1[:, p][:, :, p][:, :, :, p][:, :, :, :, p])


def test_numeric_certification_matches_symbolic():
    for A in (constant_curvature_algebroid(), rank2_algebroid()):
        assert certify(A, mode="numeric").status == certify(A).status == "pass"


def test_non_antisymmetric_table_warns():
    chart = Chart(["x"], [(0, 1)])
    with pytest.warns(UserWarning, match="antisymmetric"):
        A = FlatAlgebroid(chart, [[["0", "x"], ["x", "0"]], [["0", "0"], ["0", "0"]]])
    assert A.C[0][0][1] == sx.ZERO


def test_undeclared_variables_rejected():
    chart = Chart(["x"], [(0, 1)])
    with pytest.raises(Exception):
        FlatAlgebroid(chart, [[["0", "y"], ["-y", "0"]], [["0", "0"], ["0", "0"]]])


# ------------------------------------------------------------- pointwise data

@pytest.mark.parametrize("k, name", [(-1.0, "sl2"), (0.0, "se2"), (1.0, "so3"), (-0.3, "sl2"), (1.7, "so3")])
def test_isotropy_classification_along_curvature_line(k, name):
    A = constant_curvature_algebroid()
    iso = isotropy_at(A, [k])
    assert iso.dim == 3
    assert classify_3d(iso.structure_constants) == name
    assert classify_3d(fiber_algebra(A, [k])) == name


def test_isotropy_of_anchored_algebroid():
    A = rank2_algebroid()
    assert orbit_rank_at(A, [1.0]) == 1
    iso = isotropy_at(A, [1.0])
    assert iso.dim == 1 and iso.closure_residual < 1e-12


def test_same_orbit_reaches_target():
    A = rank2_algebroid((0.2, 3.0))
    res = same_orbit(A, [1.0], [0.5])
    assert res.status == "yes" and res.distance <= 1e-6 and res.path


def test_same_orbit_negative_when_anchor_vanishes():
    A = constant_curvature_algebroid()
    res = same_orbit(A, [0.0], [1.0])
    assert res.status == "no"


def test_same_orbit_unknown_across_fixed_point():
    chart = Chart(["h"], [(-1, 1)])
    A = FlatAlgebroid(chart, [[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]], [["h", "0"]])
    res = same_orbit(A, [0.5], [-0.5], budget=5000)
    assert res.status == "unknown"


def test_from_arrays_constant_algebroid():
    c = np.zeros((3, 3, 3))
    c[2, 0, 1], c[2, 1, 0] = 1, -1
    A = FlatAlgebroid.from_arrays(c)
    assert certify(A).status == "pass"
    assert classify_3d(fiber_algebra(A, [])) == "heisenberg"
