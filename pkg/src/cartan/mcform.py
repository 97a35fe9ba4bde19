"""Algebroid-valued 1-forms, connections, torsion and the Maurer-Cartan residual.

An A-valued 1-form on a chart M is a base map h: M -> X together with
components ``eta[i][mu]``, so that eta(d/dy^mu) = sum_i eta^i_mu e_i(h(y)).
A connection on the trivial bundle is a Christoffel table ``gamma[k][a][j]``
with nabla_{d/dx^a} e_j = sum_k gamma^k_aj e_k.

The residual computed by :func:`mc_residual` in the default convention is

    d_nabla eta - T(eta, eta),

where T is the torsion of the bracket ``-C`` with anchor F.  When eta is
anchor compatible, all connection terms cancel and the residual equals

    d eta^k_{mu nu} - sum_{i,j} C^k_ij(h) eta^i_mu eta^j_nu,

which is the structure equation for theta = eta.  The ``"displayed"``
convention evaluates d_nabla eta + T(eta, eta) with the torsion of ``+C``
instead; it agrees with the above for flat connections only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import symexpr as sx
from .algebroid import FlatAlgebroid, ResidualReport, _aggregate_numeric, _aggregate_symbolic, convention_sign
from .symexpr import Chart, Expr

__all__ = [
    "Connection", "AValuedOneForm", "MCReport", "flat_connection", "random_connection",
    "anchor_compatibility_residual", "torsion", "covariant_exterior_derivative",
    "mc_residual", "mc_check", "numeric_mc_residual",
]


def _expr(v, names) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, str):
        return sx.parse_expr(v, names)
    return sx.const(v)


class Connection:
    """Christoffel symbols gamma[k][a][j] on the base chart of an algebroid."""

    def __init__(self, A: FlatAlgebroid, gamma=None):
        n, d = A.n, A.d
        self.coords = A.chart.coords
        if gamma is None:
            gamma = [[[sx.ZERO] * n for _ in range(d)] for _ in range(n)]
        if len(gamma) != n or any(len(g) != d or any(len(r) != n for r in g) for g in gamma):
            raise ValueError(f"Christoffel table must have shape ({n}, {d}, {n})")
        self.gamma = [[[_expr(gamma[k][a][j], self.coords) for j in range(n)] for a in range(d)]
                      for k in range(n)]
        self.n, self.d = n, d

    @property
    def is_flat(self) -> bool:
        return all(e.is_zero() for g in self.gamma for r in g for e in r)

    def at(self, pts) -> np.ndarray:
        """gamma[N, k, a, j] at points of X."""
        flat = [e for g in self.gamma for r in g for e in r]
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return sx.lambdify(flat, self.coords)(pts).reshape(-1, self.n, self.d, self.n)


def flat_connection(A: FlatAlgebroid) -> Connection:
    return Connection(A)


def random_connection(A: FlatAlgebroid, rng=None, degree: int = 2, scale: float = 1.0) -> Connection:
    """Connection with random polynomial Christoffel symbols of the given degree."""
    rng = np.random.default_rng(rng)
    xs = [sx.var(c) for c in A.chart.coords]
    monomials = [sx.ONE]
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(xs, deg):
            monomials.append(sx.mul(*combo))

    def poly():
        coef = np.round(scale * rng.standard_normal(len(monomials)), 3)
        return sx.add(*[sx.const(float(c)) * m for c, m in zip(coef, monomials) if c != 0])

    n, d = A.n, A.d
    return Connection(A, [[[poly() for _ in range(n)] for _ in range(d)] for _ in range(n)])


class AValuedOneForm:
    """Base map h and components eta[i][mu] on a chart M."""

    def __init__(self, chart: Chart, h, eta):
        self.chart = chart
        names = chart.coords
        self.h = [_expr(v, names) for v in h]
        self.eta = [[_expr(v, names) for v in row] for row in eta]
        m = chart.dim
        if any(len(row) != m for row in self.eta):
            raise ValueError(f"each row of eta needs {m} components")

    @property
    def n(self) -> int:
        return len(self.eta)

    @property
    def m(self) -> int:
        return self.chart.dim

    def mutate(self, i: int, mu: int, delta: Expr | float = 1) -> "AValuedOneForm":
        eta = [list(r) for r in self.eta]
        eta[i][mu] = eta[i][mu] + sx._coerce(delta)
        return AValuedOneForm(self.chart, self.h, eta)


def _check(eta: AValuedOneForm, A: FlatAlgebroid, nabla: Connection | None = None):
    if eta.n != A.n:
        raise ValueError(f"form has {eta.n} components, algebroid has rank {A.n}")
    if len(eta.h) != A.d:
        raise ValueError(f"base map has {len(eta.h)} components, algebroid base has dimension {A.d}")
    if nabla is not None and (nabla.n, nabla.d) != (A.n, A.d):
        raise ValueError("connection does not match the algebroid")


def _on_h(e: Expr, A: FlatAlgebroid, eta: AValuedOneForm) -> Expr:
    return sx.substitute(e, dict(zip(A.chart.coords, eta.h)))


def anchor_compatibility_residual(eta: AValuedOneForm, A: FlatAlgebroid):
    """R[a][mu] = dh^a/dy^mu - sum_i F^a_i(h) eta^i_mu."""
    _check(eta, A)
    ys = eta.chart.coords
    out = []
    for a in range(A.d):
        Fa = [_on_h(A.F[a][i], A, eta) for i in range(A.n)]
        out.append([sx.add(sx.differentiate(eta.h[a], y),
                           *[sx.neg(Fa[i] * eta.eta[i][mu]) for i in range(A.n)])
                    for mu, y in enumerate(ys)])
    return out


def torsion(A: FlatAlgebroid, nabla: Connection, convention: str = "realization"):
    """T[k][i][j] on constant sections: sum_a (F^a_i G^k_aj - F^a_j G^k_ai) - sigma C^k_ij."""
    s = convention_sign(convention)
    n, d = A.n, A.d
    G, F = nabla.gamma, A.F
    T = [[[sx.ZERO] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                parts = [F[a][i] * G[k][a][j] - F[a][j] * G[k][a][i] for a in range(d)]
                parts.append(sx.const(-s) * A.C[k][i][j])
                T[k][i][j] = sx.add(*parts)
    return T


def covariant_exterior_derivative(eta: AValuedOneForm, A: FlatAlgebroid, nabla: Connection):
    """D[k][mu][nu] = d_mu eta^k_nu - d_nu eta^k_mu + pulled-back connection terms."""
    _check(eta, A, nabla)
    ys = eta.chart.coords
    m, n = eta.m, A.n
    dh = [[sx.differentiate(h, y) for y in ys] for h in eta.h]
    G = [[[_on_h(nabla.gamma[k][a][j], A, eta) for j in range(n)] for a in range(A.d)] for k in range(n)]
    # pulled-back Christoffel matrices: P[k][mu][j] = sum_a dh^a/dy^mu G^k_aj(h)
    P = [[[sx.add(*[dh[a][mu] * G[k][a][j] for a in range(A.d)]) for j in range(n)]
          for mu in range(m)] for k in range(n)]
    D = [[[sx.ZERO] * m for _ in range(m)] for _ in range(n)]
    for k in range(n):
        for mu in range(m):
            for nu in range(mu + 1, m):
                parts = [sx.differentiate(eta.eta[k][nu], ys[mu]),
                         sx.neg(sx.differentiate(eta.eta[k][mu], ys[nu]))]
                for j in range(n):
                    parts.append(P[k][mu][j] * eta.eta[j][nu])
                    parts.append(sx.neg(P[k][nu][j] * eta.eta[j][mu]))
                v = sx.add(*parts)
                D[k][mu][nu], D[k][nu][mu] = v, sx.neg(v)
    return D


def mc_residual(eta: AValuedOneForm, A: FlatAlgebroid, nabla: Connection | None = None,
                convention: str = "realization"):
    """Residual table R[k][mu][nu] of the Maurer-Cartan equation (see the module docstring)."""
    nabla = nabla or flat_connection(A)
    s = convention_sign(convention)
    D = covariant_exterior_derivative(eta, A, nabla)
    T = torsion(A, nabla, convention)
    Th = [[[_on_h(T[k][i][j], A, eta) for j in range(A.n)] for i in range(A.n)] for k in range(A.n)]
    pair = sx.const(1 if s > 0 else -1)
    m, n = eta.m, A.n
    R = [[[sx.ZERO] * m for _ in range(m)] for _ in range(n)]
    for k in range(n):
        for mu in range(m):
            for nu in range(mu + 1, m):
                quad = [Th[k][i][j] * eta.eta[i][mu] * eta.eta[j][nu]
                        for i in range(n) for j in range(n) if i != j]
                v = sx.add(D[k][mu][nu], pair * sx.add(*quad))
                R[k][mu][nu], R[k][nu][mu] = v, sx.neg(v)
    return R


def numeric_mc_residual(eta: AValuedOneForm, A: FlatAlgebroid, nabla: Connection | None,
                        pts, convention: str = "realization"):
    """Evaluate the Maurer-Cartan residual R[N, k, mu, nu] and the anchor residual R[N, a, mu].

    Uses compiled derivatives of eta and h and numeric values of C, F and
    gamma at h(y); independent of the expression tables built above.
    """
    s = convention_sign(convention)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    ys = eta.chart.coords
    n, m, d = A.n, eta.m, A.d
    flat_eta = [e for row in eta.eta for e in row]
    E = sx.lambdify(flat_eta, ys)(pts).reshape(-1, n, m)
    dE = sx.lambdify([sx.differentiate(e, y) for y in ys for e in flat_eta], ys)(pts).reshape(-1, m, n, m)
    if d:
        H = sx.lambdify(eta.h, ys)(pts)
        dH = sx.lambdify([sx.differentiate(h, y) for y in ys for h in eta.h], ys)(pts).reshape(-1, m, d)
        C = A.C_at(H)
        F = A.F_at(H)
        G = nabla.at(H) if nabla is not None else np.zeros((len(pts), n, d, n))
    else:
        dH = np.zeros((len(pts), m, 0))
        C = np.broadcast_to(A.C_at(np.zeros(0)), (len(pts), n, n, n))
        F = np.zeros((len(pts), 0, n))
        G = np.zeros((len(pts), n, 0, n))
    # dE[N, mu, k, nu] = d eta^k_nu / dy^mu
    D = np.einsum("Nmkn->Nkmn", dE)
    D = D - np.transpose(D, (0, 1, 3, 2))
    P = np.einsum("Nma,Nkaj->Nkmj", dH, G)
    conn = np.einsum("Nkmj,Njn->Nkmn", P, E)
    D = D + conn - np.transpose(conn, (0, 1, 3, 2))
    FG = np.einsum("Nai,Nkaj->Nkij", F, G)
    T = FG - np.transpose(FG, (0, 1, 3, 2)) - s * C
    quad = np.einsum("Nkij,Nim,Njn->Nkmn", T, E, E)
    R = D + (1.0 if s > 0 else -1.0) * quad
    anchor = np.einsum("Nma->Nam", dH) - np.einsum("Nai,Nim->Nam", F, E)
    return R, anchor


@dataclass
class MCReport:
    residual: ResidualReport
    anchor: ResidualReport
    convention: str

    @property
    def passed(self) -> bool:
        return self.residual.passed and self.anchor.passed

    @property
    def status(self) -> str:
        if self.passed:
            return "pass"
        if "nonzero" in (self.residual.verdict, self.anchor.verdict):
            return "fail"
        return "unknown"

    def as_dict(self) -> dict:
        return {"mc": self.residual.as_dict(), "anchor": self.anchor.as_dict(),
                "anchor_advisory": not self.anchor.passed,
                "convention": self.convention, "status": self.status}


def mc_check(eta: AValuedOneForm, A: FlatAlgebroid, nabla: Connection | None = None,
             convention: str = "realization", mode: str = "symbolic", n_samples: int = 200,
             abs_tol: float = 1e-10, seed: int = 42, symbolic="auto") -> MCReport:
    """Zero-test the Maurer-Cartan and anchor-compatibility residuals.

    The anchor residual is reported alongside; when it is nonzero the
    Maurer-Cartan verdict is advisory only.
    """
    m = eta.m
    if mode == "numeric":
        pts = eta.chart.sample(n_samples, seed)
        R, Ra = numeric_mc_residual(eta, A, nabla, pts, convention)
        iu = np.triu_indices(m, 1)
        return MCReport(_aggregate_numeric(R[:, :, iu[0], iu[1]], pts, eta.chart.coords, abs_tol),
                        _aggregate_numeric(Ra, pts, eta.chart.coords, abs_tol), convention)
    if mode != "symbolic":
        raise ValueError(f"unknown mode {mode!r}")
    R = mc_residual(eta, A, nabla, convention)
    Ra = anchor_compatibility_residual(eta, A)
    rt = {(k, mu, nu): R[k][mu][nu] for k in range(A.n) for mu in range(m) for nu in range(mu + 1, m)}
    at = {(a, mu): Ra[a][mu] for a in range(A.d) for mu in range(m)}
    exprs = list(rt.values()) + list(at.values())
    chart = eta.chart.with_guards(g for e in exprs for g in sx.denominators(e))
    return MCReport(_aggregate_symbolic(rt, chart, n_samples, abs_tol, seed, symbolic),
                    _aggregate_symbolic(at, chart, n_samples, abs_tol, seed, symbolic), convention)
