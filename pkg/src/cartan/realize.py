"""Numeric realizations: finite-difference exterior calculus and local group coframes.

A realization candidate is a coframe on a chart M (either symbolic or a
numeric evaluator returning the coefficient matrices a[k, mu]) together with
a map h: M -> X.  :func:`verify_realization_numeric` measures how far it is
from satisfying

    d theta^k = sum_{i<j} C^k_ij(h) theta^i ^ theta^j,   d h_a = sum_i F^a_i(h) theta^i

with derivatives taken by Richardson-extrapolated central differences.

For algebroids with vanishing anchor every fiber is a Lie algebra, and the
Maurer-Cartan coframe of a local group in product-of-exponentials
coordinates realizes it; :func:`realize_bundle_fiber` builds that coframe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import symexpr as sx
from .algebroid import FlatAlgebroid
from .coframe import Coframe
from .liealg import MatrixLieAlgebra, from_structure_constants
from .symexpr import Chart

__all__ = [
    "RealizationCandidate", "RealizationReport", "ChartNotInjective",
    "numeric_exterior_derivative", "numeric_gradient", "verify_realization_numeric",
    "realize_bundle_fiber", "group_coframe",
]


class ChartNotInjective(ValueError):
    pass


@dataclass
class RealizationCandidate:
    """Coframe evaluator ``a(pts) -> (N, n, m)`` and base map ``h(pts) -> (N, d)`` on a chart."""

    chart: Chart
    coframe: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]
    n: int
    d: int
    label: str = ""

    @classmethod
    def from_tables(cls, chart: Chart, a, h=(), label: str = "") -> "RealizationCandidate":
        """Candidate from expression tables a[k][mu] and h[a] on ``chart``, compiled once."""
        coords = chart.coords
        conv = lambda x: x if isinstance(x, sx.Expr) else sx.parse_expr(str(x), chart)
        rows = [[conv(x) for x in row] for row in a]
        n, m = len(rows), chart.dim
        flat = sx.lambdify([e for row in rows for e in row], coords)
        hs = [conv(x) for x in h]
        hf = sx.lambdify(hs, coords)

        def af(pts):
            return flat(np.atleast_2d(pts)).reshape(-1, n, m)

        def hh(pts):
            return hf(np.atleast_2d(pts))
        return cls(chart, af, hh, n, len(hs), label)

    @classmethod
    def from_coframe(cls, theta: Coframe, h=(), label: str = "") -> "RealizationCandidate":
        return cls.from_tables(theta.chart, theta.a, h, label)

    def mutate(self, k: int, mu: int, delta: Callable[[np.ndarray], np.ndarray] | float) -> "RealizationCandidate":
        """Candidate with one coefficient a[k, mu] shifted by a constant or a function of the point."""
        base = self.coframe

        def a(pts):
            v = base(pts).copy()
            pts2 = np.atleast_2d(pts)
            v[:, k, mu] += delta(pts2) if callable(delta) else delta
            return v
        return RealizationCandidate(self.chart, a, self.h, self.n, self.d, self.label + " (mutated)")


def _richardson(f, p: np.ndarray, step: float) -> np.ndarray:
    """Gradient of array-valued f at p; returns shape (dim, *f.shape)."""
    p = np.asarray(p, dtype=float)
    out = []
    for mu in range(len(p)):
        e = np.zeros_like(p)
        e[mu] = 1.0

        def central(hh):
            pts = np.stack([p + hh * e, p - hh * e])
            v = f(pts)
            return (v[0] - v[1]) / (2 * hh)
        out.append((4 * central(step / 2) - central(step)) / 3)
    return np.array(out)


def numeric_exterior_derivative(form: Callable[[np.ndarray], np.ndarray], point, step: float = 1e-4) -> np.ndarray:
    """D[k, mu, nu] = d_mu a^k_nu - d_nu a^k_mu for a form evaluator returning (N, n, m)."""
    G = _richardson(form, np.asarray(point, dtype=float), step)  # (mu, k, nu)
    D = np.transpose(G, (1, 0, 2))
    return D - np.transpose(D, (0, 2, 1))


def numeric_gradient(fn: Callable[[np.ndarray], np.ndarray], point, step: float = 1e-4) -> np.ndarray:
    """J[a, mu] = d fn_a / d y^mu for an evaluator returning (N, d)."""
    return _richardson(fn, np.asarray(point, dtype=float), step).T


@dataclass
class RealizationReport:
    structure_max: float
    anchor_max: float
    structure_witness: dict | None
    anchor_witness: dict | None
    samples: int
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.structure_max, self.anchor_max)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol

    def as_dict(self) -> dict:
        return {"structure_max": self.structure_max, "anchor_max": self.anchor_max,
                "structure_witness": self.structure_witness, "anchor_witness": self.anchor_witness,
                "samples": self.samples, "tol": self.tol, "status": "pass" if self.passed else "fail"}


def verify_realization_numeric(cand: RealizationCandidate, A: FlatAlgebroid, samples: int | np.ndarray = 100,
                               seed: int = 42, step: float = 1e-4, tol: float = 1e-6) -> RealizationReport:
    """Largest componentwise deviation from the structure equations over sample points.

    ``samples`` is either a count of random chart points (kept one step away
    from the boundary) or an explicit array of points.
    """
    if cand.n != A.n or cand.d != A.d:
        raise ValueError(f"candidate has (n, d) = ({cand.n}, {cand.d}), algebroid has ({A.n}, {A.d})")
    if isinstance(samples, (int, np.integer)):
        lo = np.array([b[0] for b in cand.chart.box]) + 2 * step
        hi = np.array([b[1] for b in cand.chart.box]) - 2 * step
        inner = Chart(cand.chart.coords, list(zip(lo, hi)), cand.chart.guards, cand.chart.guard_tol)
        pts = inner.sample(int(samples), seed)
    else:
        pts = np.atleast_2d(np.asarray(samples, dtype=float))
    a = cand.coframe(pts)
    H = cand.h(pts) if A.d else np.zeros((len(pts), 0))
    if A.d:
        for q, (lo, hi) in enumerate(A.chart.box):
            bad = (H[:, q] < lo - 1e-12) | (H[:, q] > hi + 1e-12)
            if bad.any():
                raise ValueError(f"sample {pts[int(np.argmax(bad))].tolist()} maps outside the algebroid chart")
        C = A.C_at(H)
        F = A.F_at(H)
    else:
        C = np.broadcast_to(A.C_at(np.zeros(0)), (len(pts),) + (A.n,) * 3)
        F = np.zeros((len(pts), 0, A.n))
    s_max, a_max, s_w, a_w = 0.0, 0.0, None, None
    coords = cand.chart.coords
    for p, ap, Cp, Fp in zip(pts, a, C, F):
        D = numeric_exterior_derivative(cand.coframe, p, step)
        R = D - np.einsum("kij,im,jn->kmn", Cp, ap, ap)
        r = float(np.max(np.abs(R), initial=0.0))
        if r >= s_max:
            s_max = r
            k, mu, nu = np.unravel_index(int(np.argmax(np.abs(R))), R.shape)
            s_w = {"point": dict(zip(coords, map(float, p))), "component": [int(k), int(mu), int(nu)],
                   "value": float(R[k, mu, nu])}
        if A.d:
            Jh = numeric_gradient(cand.h, p, step)
            Ra = Jh - Fp @ ap
            r = float(np.max(np.abs(Ra), initial=0.0))
            if r >= a_max:
                a_max = r
                q, mu = np.unravel_index(int(np.argmax(np.abs(Ra))), Ra.shape)
                a_w = {"point": dict(zip(coords, map(float, p))), "component": [int(q), int(mu)],
                       "value": float(Ra[q, mu])}
    return RealizationReport(s_max, a_max, s_w, a_w, len(pts), tol)


# ------------------------------------------------------------ group coframes

def group_coframe(g: MatrixLieAlgebra, side: str = "right") -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator of the Maurer-Cartan coframe in product-of-exponentials coordinates.

    For g(y) = exp(y^1 E_1) ... exp(y^m E_m) the right form dg g^-1 has
    components Ad(exp(y^1 E_1) ... exp(y^mu E_mu)) E_mu in direction mu and
    satisfies d theta = sum_{i<j} c^k_ij theta^i ^ theta^j.  The left form
    g^-1 dg gives the opposite sign.
    """
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    B = g.basis
    m = g.dim
    A = B.reshape(m, -1).T
    pinv = np.linalg.pinv(A)

    def one(y):
        factors = [expm(y[mu] * B[mu]) for mu in range(m)]
        cols = np.empty((m, m))
        if side == "right":
            L = np.eye(g.n)
            for mu in range(m):
                L = L @ factors[mu]
                X = L @ B[mu] @ np.linalg.inv(L)
                cols[:, mu] = pinv @ X.ravel()
        else:
            R = np.eye(g.n)
            for mu in reversed(range(m)):
                R = factors[mu] @ R
                X = np.linalg.inv(R) @ B[mu] @ R
                cols[:, mu] = pinv @ X.ravel()
        return cols

    def a(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.array([one(y) for y in pts])
    return a


def realize_bundle_fiber(g: MatrixLieAlgebra | np.ndarray, box: float = 0.5, x0=(), side: str = "right",
                         names=None, max_halvings: int = 6, det_tol: float = 1e-6,
                         seed: int = 0) -> RealizationCandidate:
    """Local group coframe realizing the fiber algebra g at a base point x0.

    ``g`` may be a matrix Lie algebra or an array of structure constants; in
    the latter case the adjoint representation is used, which requires a
    trivial center unless the algebra is abelian.  The returned candidate has
    constant base map h = x0.  The box [-box, box]^m is halved while the
    coframe degenerates on sample points.
    """
    if not isinstance(g, MatrixLieAlgebra):
        c = np.asarray(g, dtype=float)
        g = from_structure_constants(c)
    m = g.dim
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    names = list(names) if names else [f"y{mu + 1}" for mu in range(m)]
    abelian = not np.any(g.c)
    if abelian:
        def a(pts):
            return np.broadcast_to(np.eye(m), (len(np.atleast_2d(pts)), m, m)).copy()
    else:
        flat = g.basis.reshape(m, -1)
        if np.linalg.matrix_rank(flat, tol=1e-10) < m:
            raise ValueError("representation is not faithful; supply a faithful matrix algebra")
        a = group_coframe(g, side)
    rng = np.random.default_rng(seed)
    r = float(box)
    for _ in range(max_halvings + 1):
        pts = rng.uniform(-r, r, size=(64, m))
        pts = np.vstack([pts, np.full((1, m), r), np.full((1, m), -r)])
        dets = np.abs(np.linalg.det(a(pts)))
        if np.all(np.isfinite(dets)) and dets.min() > det_tol:
            chart = Chart(names, [(-r, r)] * m)

            def h(pts, x0=x0):
                return np.broadcast_to(x0, (len(np.atleast_2d(pts)), len(x0))).copy()
            return RealizationCandidate(chart, a, h, m, len(x0), f"local group, box {r:g}")
        r /= 2
    raise ChartNotInjective(f"coframe degenerates even on the box of half-width {r * 2:g}")
