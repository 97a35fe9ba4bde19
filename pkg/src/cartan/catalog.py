"""Built-in examples: constant curvature surfaces, Bochner-Kahler data and small coframes.

Everything here is assembled from the public constructors of the other
modules, so the examples double as usage references.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import symexpr as sx
from .algebroid import FlatAlgebroid
from .coframe import Coframe, structure_functions
from .gstruct import GRealizationCandidate, GRealizationData
from .liealg import MatrixLieAlgebra, make_algebra, u
from .mcform import AValuedOneForm
from .symexpr import Chart

__all__ = [
    "ROTATION", "rotation_algebra", "constant_curvature_algebroid", "constant_curvature_data",
    "constant_curvature_candidate", "bochner_kahler_data", "bochner_kahler_coords",
    "rank2_coframe", "rank2_algebroid", "exp_coframe", "aff1_algebroid",
    "random_triangular_coframe", "identity_classifying_algebroid", "random_diffeo",
    "pullback_form", "mc_corpus", "GEOMETRY_NAMES",
]

# generator of o(2) acting on R^2; with this basis d omega = -phi ^ omega
# matches the rotated orthonormal coframes below
ROTATION = np.array([[0.0, 1.0], [-1.0, 0.0]])

GEOMETRY_NAMES = {"so3": "Spherical Geometry", "se2": "Euclidean Geometry", "sl2": "Hyperbolic Geometry"}


def rotation_algebra() -> MatrixLieAlgebra:
    return make_algebra([ROTATION], name="o(2)")


def constant_curvature_algebroid(box=(-2.0, 2.0), name: str = "k") -> FlatAlgebroid:
    """Rank 3 bundle of Lie algebras over the curvature line.

    [e1, e2] = k e3, [e1, e3] = -e2, [e2, e3] = e1 and zero anchor.
    """
    chart = Chart([name], [box])
    C = np.zeros((3, 3, 3)).tolist()
    C[2][0][1] = name
    C[1][0][2] = -1
    C[0][1][2] = 1
    return FlatAlgebroid(chart, C, None, name="constant-curvature")


def constant_curvature_data(box=(-2.0, 2.0), name: str = "k") -> GRealizationData:
    chart = Chart([name], [box])
    b = [[[0, name], [0, 0]]]
    return GRealizationData(rotation_algebra(), chart, b=b)


def constant_curvature_candidate(k: int, box=None) -> GRealizationCandidate:
    """Rotated orthonormal coframe with its Levi-Civita form on the frame bundle chart.

    k = 0 uses Cartesian coordinates (x, y, t); k = 1 and k = -1 use polar
    coordinates (r, p, t) for the round sphere and the hyperbolic plane.
    """
    if k == 0:
        chart = Chart(["x", "y", "t"], box or [(-1, 1), (-1, 1), (-1, 1)])
        omega = [["cos(t)", "sin(t)", "0"], ["-sin(t)", "cos(t)", "0"]]
        phi = [["0", "0", "-1"]]
    elif k in (1, -1):
        f, fp = ("sin(r)", "cos(r)") if k == 1 else ("sinh(r)", "cosh(r)")
        chart = Chart(["r", "p", "t"], box or [(0.3, 1.2), (-1, 1), (-1, 1)])
        omega = [["cos(t)", f"sin(t)*{f}", "0"], ["-sin(t)", f"cos(t)*{f}", "0"]]
        phi = [["0", f"-{fp}", "-1"]]
    else:
        raise ValueError("candidates are available for k in {-1, 0, 1}")
    return GRealizationCandidate(chart, omega, phi, [str(k)])


# ------------------------------------------------------------- Bochner-Kahler

def bochner_kahler_coords(n: int) -> list[str]:
    """Coordinates of X: Hermitian S, complex vector T and real u."""
    names = [f"s{i}{i}" for i in range(1, n + 1)]
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            names += [f"sr{i}{j}", f"si{i}{j}"]
    for i in range(1, n + 1):
        names += [f"tr{i}", f"ti{i}"]
    return names + ["u"]


def bochner_kahler_data(n: int, box: float = 1.0) -> GRealizationData:
    """Classifying data for Bochner-Kahler metrics in complex dimension n.

    R^{2n} is C^n with real basis e_1..e_n, i e_1..i e_n; g = u(n) acts by
    its real representation with basis i E_kk, E_ij - E_ji, i (E_ij + E_ji).
    The term S omega* ^ omega is read as the scalar S times the 2-form
    omega* ^ omega.
    """
    import sympy as sp

    I = sp.I
    names = bochner_kahler_coords(n)
    sym = {s: sp.Symbol(s, real=True) for s in names}
    S = sp.zeros(n, n)
    for i in range(n):
        S[i, i] = sym[f"s{i + 1}{i + 1}"]
        for j in range(i + 1, n):
            a, b = sym[f"sr{i + 1}{j + 1}"], sym[f"si{i + 1}{j + 1}"]
            S[i, j], S[j, i] = a + I * b, a - I * b
    T = sp.Matrix([sym[f"tr{i + 1}"] + I * sym[f"ti{i + 1}"] for i in range(n)])
    U = sym["u"]
    Id = sp.eye(n)

    def E(i, j):
        M = sp.zeros(n, n)
        M[i, j] = 1
        return M

    ubasis = [I * E(k, k) for k in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            ubasis += [E(i, j) - E(j, i), I * (E(i, j) + E(j, i))]
    zbasis = [sp.Matrix([1 if q == k else 0 for q in range(n)]) for k in range(n)]
    zbasis += [I * z for z in zbasis]

    def ucoords(M):
        out = [sp.im(M[i, i]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                out += [sp.re(M[i, j]), sp.im(M[i, j])]
        return out

    def xcoords(dS, dT, dU):
        out = [sp.re(dS[i, i]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                out += [sp.re(dS[i, j]), sp.im(dS[i, j])]
        for i in range(n):
            out += [sp.re(dT[i]), sp.im(dT[i])]
        return out + [dU]

    def curv(z1, z2):
        H1, H2 = z1.H, z2.H
        return ((H1 * z2 - H2 * z1)[0] * S - S * (z1 * H2 - z2 * H1) - (z1 * H2 - z2 * H1) * S
                + (H1 * S * z2 - H2 * S * z1)[0] * Id)

    def anchor(z, al):
        dS = -al * S + S * al + T * z.H + z * T.H + sp.Rational(1, 2) * (T.H * z + z.H * T)[0] * Id
        dT = -al * T + (U * Id + S * S) * z
        dU = (T.H * S * z + z.H * S * T)[0]
        return xcoords(dS, dT, dU)

    def to_expr(v):
        return sx.from_sympy(sp.expand(sp.simplify(v)))

    m, r = len(ubasis), 2 * n
    b = [[[sx.ZERO] * r for _ in range(r)] for _ in range(m)]
    for a1, a2 in itertools.combinations(range(r), 2):
        vals = ucoords(sp.expand(curv(zbasis[a1], zbasis[a2])))
        for gm in range(m):
            b[gm][a1][a2] = to_expr(vals[gm])
    zero_z, zero_a = sp.zeros(n, 1), sp.zeros(n, n)
    Theta_cols = [anchor(z, zero_a) for z in zbasis]
    Phi_cols = [anchor(zero_z, al) for al in ubasis]
    d = len(names)
    Theta = [[to_expr(Theta_cols[a][x]) for a in range(r)] for x in range(d)]
    Phi = [[to_expr(Phi_cols[al][x]) for al in range(m)] for x in range(d)]
    chart = Chart(names, [(-box, box)] * d)
    return GRealizationData(u(n), chart, b=b, Theta=Theta, Phi=Phi)


# ----------------------------------------------------------- small coframes

def rank2_coframe(box=((0.5, 2.0), (-1.0, 1.0))) -> Coframe:
    """theta^1 = dx, theta^2 = x dy on x > 0."""
    return Coframe(Chart(["x", "y"], box), [["1", "0"], ["0", "x"]])


def rank2_algebroid(box=(0.5, 2.0)) -> FlatAlgebroid:
    """[e1, e2] = h e2 with anchor #e1 = -h^2 d/dh, #e2 = 0."""
    return FlatAlgebroid(Chart(["h"], [box]), [[[0, 0], [0, 0]], [[0, "h"], ["-h", 0]]], [["-h^2", 0]],
                         name="rank-2")


def exp_coframe(box=((-1.0, 1.0), (-1.0, 1.0))) -> Coframe:
    """theta^1 = dx, theta^2 = e^x dy, with constant structure functions."""
    return Coframe(Chart(["x", "y"], box), [["1", "0"], ["0", "exp(x)"]])


def aff1_algebroid(box=(-1.0, 1.0)) -> FlatAlgebroid:
    """C^1_12 = 1 with anchor (1, h): an action algebroid of aff(1) up to the sign of C."""
    return FlatAlgebroid(Chart(["h"], [box]), [[[0, 1], [-1, 0]], [[0, 0], [0, 0]]], [["1", "h"]],
                         name="aff(1)")


# -------------------------------------------------------- generated corpora

def _random_poly(rng, variables, degree=2, scale=1.0, ints=True):
    terms = [sx.ONE]
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(variables, deg):
            terms.append(sx.mul(*combo))
    coef = rng.integers(-2, 3, len(terms)) if ints else np.round(scale * rng.standard_normal(len(terms)), 2)
    return sx.add(*[sx.const(int(c) if ints else float(c)) * t for c, t in zip(coef, terms) if c != 0])


def random_triangular_coframe(rng, n: int, box: float = 0.5, exp_diagonal: bool = False) -> Coframe:
    """theta^i = e^{l_i} dx^i + sum_{j>i} p_ij(x) dx^j with small random polynomials."""
    names = [f"x{i + 1}" for i in range(n)]
    xs = [sx.var(v) for v in names]
    a = [[sx.ZERO] * n for _ in range(n)]
    for i in range(n):
        if exp_diagonal:
            others = [xs[j] for j in range(n) if j != i]
            lin = sx.add(*[sx.const(int(c)) * x for c, x in zip(rng.integers(-1, 2, len(others)), others)])
            a[i][i] = sx.func("exp", lin) if not lin.is_zero() else sx.ONE
        else:
            a[i][i] = sx.ONE
        for j in range(i + 1, n):
            a[i][j] = _random_poly(rng, xs, 2)
    return Coframe(Chart(names, [(-box, box)] * n), a)


def identity_classifying_algebroid(theta: Coframe, prefix: str = "h", margin: float = 0.5) -> FlatAlgebroid:
    """Algebroid realized by theta with h the identity map: C(h) and F = inverse coefficients."""
    n = theta.n
    hn = [f"{prefix}{i + 1}" for i in range(n)]
    sub = {x: sx.var(h) for x, h in zip(theta.chart.coords, hn)}
    C = structure_functions(theta)
    Ch = [[[sx.substitute(C[k][i][j], sub) for j in range(n)] for i in range(n)] for k in range(n)]
    b = theta.inverse
    F = [[sx.substitute(b[a][i], sub) for i in range(n)] for a in range(n)]
    box = [(lo - margin, hi + margin) for lo, hi in theta.chart.box]
    return FlatAlgebroid(Chart(hn, box), Ch, F, name="identity-classifying")


def random_diffeo(rng, names, scale: float = 0.3):
    """Triangular map x_i = y_i + p_i(y_1..y_{i-1}) with unit Jacobian determinant."""
    ys = [sx.var(v) for v in names]
    out = []
    for i, y in enumerate(ys):
        if i == 0:
            out.append(y)
        else:
            p = _random_poly(rng, ys[:i], 2, scale=scale, ints=False)
            out.append(sx.add(y, p))
    return out


def pullback_form(theta: Coframe, h, phi, chart: Chart) -> AValuedOneForm:
    """eta = phi^* theta with base map h o phi on the chart of y."""
    xs = theta.chart.coords
    ys = chart.coords
    sub = dict(zip(xs, phi))
    eta = []
    for row in theta.a:
        eta.append([sx.add(*[sx.substitute(row[j], sub) * sx.differentiate(phi[j], y) for j in range(len(xs))])
                    for y in ys])
    hh = [sx.substitute(v if isinstance(v, sx.Expr) else sx.parse_expr(str(v), theta.chart), sub) for v in h]
    return AValuedOneForm(chart, hh, eta)


def mc_corpus(count: int = 50, seed: int = 7):
    """Anchor-compatible (eta, algebroid) pairs that solve the Maurer-Cartan equation.

    Mixes random triangular coframes with h the identity, the rank-2 example
    and bundles of Lie algebras, each pulled back by a random triangular
    diffeomorphism.
    """
    rng = np.random.default_rng(seed)
    out = []
    i = 0
    while len(out) < count:
        kind = i % 5
        i += 1
        ybox = 0.25
        if kind in (0, 1, 2):
            n = 3 if kind == 1 else 2
            theta = random_triangular_coframe(rng, n, box=0.5, exp_diagonal=(kind == 2))
            A = identity_classifying_algebroid(theta)
            h = [sx.var(x) for x in theta.chart.coords]
            name = f"triangular-{n}{'-exp' if kind == 2 else ''}-{i}"
        elif kind == 3:
            theta = rank2_coframe(((0.5, 2.0), (-1.0, 1.0)))
            A = rank2_algebroid((0.2, 5.0))
            h = [sx.parse_expr("1/x", theta.chart)]
            name = f"rank2-{i}"
        else:
            theta = Coframe(Chart(["x1", "x2"], [(-0.5, 0.5)] * 2), [["1", "0"], ["0", "exp(x1)"]])
            A = FlatAlgebroid(Chart(["h"], [(-1.0, 1.0)]), [[[0, 0], [0, 0]], [[0, 1], [-1, 0]]], [["0", "0"]],
                              name="aff(1)-bundle")
            h = [sx.const(round(float(rng.uniform(-0.5, 0.5)), 3))]
            name = f"lie-bundle-{i}"
        yn = [f"y{q + 1}" for q in range(theta.n)]
        ychart = Chart(yn, [(-ybox, ybox)] * theta.n)
        phi = random_diffeo(rng, yn)
        if kind == 3:
            phi = [sx.add(sx.const(1.0), phi[0]), phi[1]]
        out.append((name, pullback_form(theta, h, phi, ychart), A))
    return out
