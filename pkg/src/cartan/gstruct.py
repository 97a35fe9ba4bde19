"""Realization data for G-structures whose Lie algebra has vanishing first prolongation.

The data (c, b, S, Theta, Phi) over a chart X describe structure equations
for a pair of forms (omega, phi) on a bundle, omega with values in R^n and
phi with values in g:

    d omega = c(h) omega^omega - phi ^ omega,
    d phi   = b(h) omega^omega + S(h) omega^phi - phi ^ phi,
    d h     = Theta(h) omega + Phi(h) phi.

Stacking omega and phi into one coframe turns these into the structure
equations of a flat algebroid of rank n + dim g, whose bracket on constant
sections is

    [(u, a), (v, b)] = (c(u, v) - a.v + b.u,  b(u, v) + S(u (x) b - v (x) a) - [a, b]),

with anchor #(u, a) = Theta u + Phi a.  Tables are indexed as

    c[i][a][b],  b[g][a][b],  S[g][a][beta],  Theta[x][a],  Phi[x][alpha],

with 0-based indices, Latin letters for R^n and Greek letters for g.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import symexpr as sx
from .algebroid import FlatAlgebroid, ResidualReport, certify, convention_sign, _aggregate_symbolic
from .coframe import Coframe
from .liealg import MatrixLieAlgebra, first_prolongation, reduce_structure_function
from .symexpr import Chart, Expr

__all__ = [
    "GRealizationData", "GRealizationCandidate", "GRealizationReport", "S_ORDERS",
    "build_gstructure_algebroid", "resolve_conventions", "constant_section_homomorphism_residual",
    "inner_action", "verify_g_realization", "first_structure_function_at",
]

S_ORDERS = {"omega_phi": 1, "phi_omega": -1}


def _num(x) -> Expr:
    x = float(x)
    return sx.const(int(x) if x.is_integer() else x)


def _table(v, shape, names):
    """Nested Expr table of the given shape, from nested lists, arrays or None."""
    if v is None:
        arr = np.zeros(shape)
        v = arr.tolist()
    def build(x, depth):
        if depth == len(shape):
            if isinstance(x, Expr):
                return x
            if isinstance(x, str):
                return sx.parse_expr(x, names)
            return _num(x)
        if len(x) != shape[depth]:
            raise ValueError(f"table axis {depth} has length {len(x)}, expected {shape[depth]}")
        return [build(y, depth + 1) for y in x]
    if not shape[0]:
        return []
    return build(v, 0)


class GRealizationData:
    """Structure data (c, b, S, Theta, Phi) for a Lie algebra g with g^(1) = 0.

    ``rep`` gives the action matrices of the g basis on R^n and defaults to
    ``g.basis``; pass ``n=0`` for an abstract algebra acting only on X.
    """

    def __init__(self, g: MatrixLieAlgebra, chart: Chart, c=None, b=None, S=None, Theta=None, Phi=None,
                 n: int | None = None, rep=None, check_prolongation: bool = True):
        self.g = g
        self.chart = chart
        m = g.dim
        if rep is None:
            rep = g.basis if n is None or n == g.n else np.zeros((m, n, n))
        self.rep = np.asarray(rep, dtype=float)
        self.n = self.rep.shape[1] if self.rep.ndim == 3 else 0
        n, d, names = self.n, chart.dim, chart.coords
        if check_prolongation and n:
            acting = MatrixLieAlgebra(self.rep, g.c, g.name)
            if first_prolongation(acting).dim:
                raise ValueError(f"first prolongation of {g.name or 'g'} is nonzero")
        self.c = _table(c, (n, n, n), names)
        self.b = _table(b, (m, n, n), names)
        self.S = _table(S, (m, n, m), names)
        self.Theta = _table(Theta, (d, n), names)
        self.Phi = _table(Phi, (d, m), names)
        for k in range(n):
            for i, j in itertools.combinations(range(n), 2):
                self.c[k][j][i] = sx.neg(self.c[k][i][j])
        for k in range(m):
            for i, j in itertools.combinations(range(n), 2):
                self.b[k][j][i] = sx.neg(self.b[k][i][j])

    @property
    def m(self) -> int:
        return self.g.dim


def build_gstructure_algebroid(D: GRealizationData, bracket_sign: int = 1,
                               s_order: str = "omega_phi") -> FlatAlgebroid:
    """Assemble the rank n + dim g algebroid; fiber basis is e_1..e_n then the g basis."""
    if bracket_sign not in (1, -1):
        raise ValueError("bracket_sign must be +1 or -1")
    s_sign = S_ORDERS[s_order]
    n, m, d = D.n, D.m, D.chart.dim
    N = n + m
    Z = sx.ZERO
    C = [[[Z] * N for _ in range(N)] for _ in range(N)]

    def put(k, i, j, v):
        v = v if bracket_sign > 0 else sx.neg(v)
        C[k][i][j] = v
        C[k][j][i] = sx.neg(v)

    E, cg = D.rep, D.g.c
    for a, b_ in itertools.combinations(range(n), 2):
        for i in range(n):
            put(i, a, b_, D.c[i][a][b_])
        for gm in range(m):
            put(n + gm, a, b_, D.b[gm][a][b_])
    for a in range(n):
        for be in range(m):
            for i in range(n):
                if E[be, i, a]:
                    put(i, a, n + be, _num(E[be, i, a]))
            for gm in range(m):
                v = D.S[gm][a][be]
                put(n + gm, a, n + be, v if s_sign > 0 else sx.neg(v))
    for al, be in itertools.combinations(range(m), 2):
        for gm in range(m):
            if cg[gm, al, be]:
                put(n + gm, n + al, n + be, _num(-cg[gm, al, be]))
    F = [[D.Theta[x][a] for a in range(n)] + [D.Phi[x][al] for al in range(m)] for x in range(d)]
    return FlatAlgebroid(D.chart, C, F, name="gstructure")


def resolve_conventions(D: GRealizationData, convention: str = "realization", mode: str = "numeric",
                        n_samples: int = 100, abs_tol: float = 1e-8, seed: int = 42) -> list[dict]:
    """Certify every (bracket_sign, s_order) combination and report which pass."""
    out = []
    for sign in (1, -1):
        for order in S_ORDERS:
            A = build_gstructure_algebroid(D, sign, order)
            cert = certify(A, convention, mode=mode, n_samples=n_samples, abs_tol=abs_tol, seed=seed)
            out.append({"bracket_sign": sign, "s_order": order, "status": cert.status,
                        "jacobi_max": cert.jacobi.max_abs, "anchor_max": cert.anchor.max_abs})
    return out


def constant_section_homomorphism_residual(A: FlatAlgebroid, g: MatrixLieAlgebra, n: int | None = None,
                                           convention: str = "realization", pts=None) -> dict:
    """Compare [(0, a), (0, b)]_A with (0, [a, b]_g) over basis pairs.

    The algebroid bracket is sigma * C for the chosen convention.  Returns the
    maximal deviation at the sample points along with the alternative sign.
    """
    s = convention_sign(convention)
    m = g.dim
    n = A.n - m if n is None else n
    if pts is None:
        pts = A.chart.sample(20, 0) if A.d else np.zeros((1, 0))
    C = A.C_at(pts)
    block = C[:, n:, n:, n:]                       # [N, gamma, alpha, beta]
    others = C[:, :n, n:, n:]
    res = float(np.max(np.abs(s * block - g.c[None]), initial=0.0))
    res = max(res, float(np.max(np.abs(others), initial=0.0)))
    alt = float(np.max(np.abs(-s * block - g.c[None]), initial=0.0))
    return {"residual": res, "convention": convention, "sigma": s, "residual_opposite_sign": alt}


def inner_action(A: FlatAlgebroid, g: MatrixLieAlgebra, alpha, n: int | None = None,
                 convention: str = "realization"):
    """Derivation rho(alpha)(sigma) = [(0, alpha), sigma]_A on constant sections.

    Returns ``(R, field)`` where ``R[k][p]`` is the e_k coefficient of
    rho(alpha)(e_p) and ``field[x]`` is the component of the induced vector
    field on X.
    """
    s = convention_sign(convention)
    m = g.dim
    n = A.n - m if n is None else n
    alpha = np.asarray(alpha, dtype=float)
    N = A.n
    R = [[sx.ZERO] * N for _ in range(N)]
    for k in range(N):
        for p in range(N):
            terms = [_num(s * alpha[be]) * A.C[k][n + be][p] for be in range(m) if alpha[be]]
            R[k][p] = sx.normalize(sx.add(*terms)) if terms else sx.ZERO
    field = [sx.add(*[_num(alpha[be]) * A.F[x][n + be] for be in range(m) if alpha[be]])
             for x in range(A.d)]
    return R, field


class GRealizationCandidate:
    """Forms omega[i][mu], phi[gamma][mu] and invariants h on a chart of the bundle."""

    def __init__(self, chart: Chart, omega, phi, h):
        names = chart.coords
        conv = lambda v: v if isinstance(v, Expr) else sx.parse_expr(str(v), names)
        self.chart = chart
        self.omega = [[conv(v) for v in row] for row in omega]
        self.phi = [[conv(v) for v in row] for row in phi]
        self.h = [conv(v) for v in h]

    def coframe(self) -> Coframe:
        return Coframe(self.chart, self.omega + self.phi)


@dataclass
class GRealizationReport:
    d_omega: ResidualReport
    d_phi: ResidualReport
    d_h: ResidualReport
    bracket_sign: int
    s_order: str

    @property
    def passed(self) -> bool:
        return self.d_omega.passed and self.d_phi.passed and self.d_h.passed

    @property
    def status(self) -> str:
        if self.passed:
            return "pass"
        if "nonzero" in (self.d_omega.verdict, self.d_phi.verdict, self.d_h.verdict):
            return "fail"
        return "unknown"

    def as_dict(self) -> dict:
        return {"d_omega": self.d_omega.as_dict(), "d_phi": self.d_phi.as_dict(), "d_h": self.d_h.as_dict(),
                "bracket_sign": self.bracket_sign, "s_order": self.s_order, "status": self.status}


def verify_g_realization(cand: GRealizationCandidate, D: GRealizationData, bracket_sign: int = 1,
                         s_order: str = "omega_phi", n_samples: int = 200, abs_tol: float = 1e-10,
                         seed: int = 42, symbolic="auto") -> GRealizationReport:
    """Residuals of the three structure equations for a candidate (omega, phi, h)."""
    from .coframe import coframe_derivative, structure_functions

    A = build_gstructure_algebroid(D, bracket_sign, s_order)
    theta = cand.coframe()
    n, N = D.n, A.n
    sub = dict(zip(A.chart.coords, cand.h))
    C = structure_functions(theta)
    rows = {}
    for k in range(N):
        for i, j in itertools.combinations(range(N), 2):
            rows[(k, i, j)] = C[k][i][j] - sx.substitute(A.C[k][i][j], sub)
    dh = {}
    for a, ha in enumerate(cand.h):
        der = coframe_derivative(theta, ha)
        for i in range(N):
            dh[(a, i)] = der[i] - sx.substitute(A.F[a][i], sub)
    exprs = list(rows.values()) + list(dh.values())
    chart = cand.chart.with_guards(g for e in exprs for g in sx.denominators(e))
    agg = lambda t: _aggregate_symbolic(t, chart, n_samples, abs_tol, seed, symbolic)
    return GRealizationReport(
        agg({k: v for k, v in rows.items() if k[0] < n}),
        agg({k: v for k, v in rows.items() if k[0] >= n}),
        agg(dh), bracket_sign, s_order,
    )


def first_structure_function_at(c_val, g: MatrixLieAlgebra) -> np.ndarray:
    """Orthogonal-complement representative of c_val modulo the image of antisymmetrization."""
    return reduce_structure_function(c_val, g)
