"""Flat Lie algebroids X x R^n -> X given by structure functions and an anchor.

The data are two tables of scalar expressions on a chart of X:

* ``C[k][i][j]``: bracket coefficients, [e_i, e_j] = sum_k C^k_ij e_k,
* ``F[a][i]``: anchor coefficients, #(e_i) = sum_a F^a_i d/dx^a.

The same data also appear as the right hand sides of the structure equations

    d theta^k = sum_{i<j} C^k_ij(h) theta^i ^ theta^j,    d h_a = sum_i F^a_i(h) theta^i,

and here a sign has to be fixed.  The vector fields dual to such a coframe
bracket with ``-C``.  The integrability conditions d^2 = 0 are therefore the
algebroid axioms for bracket ``sigma * C`` with ``sigma = -1``; this is the
``"realization"`` convention and the default.  The ``"displayed"`` convention
(``sigma = +1``) checks the axioms for ``C`` itself.  The two agree whenever
the anchor vanishes.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import symexpr as sx
from .symexpr import Chart, Expr, Verdict

__all__ = [
    "FlatAlgebroid", "ResidualReport", "Certificate", "IsotropyAlgebra",
    "OrbitResult", "CONVENTIONS", "convention_sign",
    "jacobi_residual", "anchor_morphism_residual", "certify",
    "numeric_residuals", "isotropy_at", "orbit_rank_at", "same_orbit",
    "fiber_algebra",
]

CONVENTIONS = {"realization": -1, "displayed": 1}


def convention_sign(convention: str) -> int:
    try:
        return CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown convention {convention!r}; expected one of {sorted(CONVENTIONS)}") from None


def _as_expr(v, chart: Chart) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, str):
        return sx.parse_expr(v, chart)
    return sx.const(float(v) if not float(v).is_integer() else int(v))


class FlatAlgebroid:
    """Trivial bundle X x R^n with bracket table C and anchor table F."""

    def __init__(self, chart: Chart, C, F=None, name: str = ""):
        self.chart = chart
        self.name = name
        n = len(C)
        d = chart.dim
        C = [[[_as_expr(C[k][i][j], chart) for j in range(n)] for i in range(n)] for k in range(n)]
        if F is None:
            F = [[sx.ZERO] * n for _ in range(d)]
        if len(F) != d or any(len(row) != n for row in F):
            raise ValueError(f"anchor table must have shape ({d}, {n})")
        self.F = [[_as_expr(F[a][i], chart) for i in range(n)] for a in range(d)]
        self.C = self._antisymmetric(C)
        for e in itertools.chain(self.entries()):
            extra = sx.free_vars(e) - set(chart.coords)
            if extra:
                raise ValueError(f"undeclared variables {sorted(extra)}")
        self._compiled = None

    @staticmethod
    def _antisymmetric(C):
        n = len(C)
        fixed = False
        for k in range(n):
            for i in range(n):
                if not C[k][i][i].is_zero():
                    fixed = True
                    C[k][i][i] = sx.ZERO
                for j in range(i + 1, n):
                    a, b = C[k][i][j], C[k][j][i]
                    if b.is_zero() or sx.normalize(a + b).is_zero():
                        C[k][j][i] = sx.neg(a)
                    elif a.is_zero():
                        C[k][i][j] = sx.neg(b)
                    else:
                        fixed = True
                        half = sx.normalize((a - b) / 2)
                        C[k][i][j], C[k][j][i] = half, sx.neg(half)
        if fixed:
            warnings.warn("bracket table was not antisymmetric; replaced by its antisymmetric part",
                          stacklevel=3)
        return C

    @classmethod
    def from_arrays(cls, C, F=None, chart: Chart | None = None, name: str = ""):
        """Constant-coefficient algebroid from numeric arrays C[k, i, j] and F[a, i]."""
        C = np.asarray(C, dtype=float)
        chart = chart or Chart([], [])
        d = chart.dim
        n = C.shape[0]
        Fa = np.zeros((d, n)) if F is None else np.asarray(F, dtype=float)
        return cls(chart, C.tolist(), Fa.tolist(), name=name)

    @property
    def n(self) -> int:
        return len(self.C)

    @property
    def d(self) -> int:
        return self.chart.dim

    def entries(self):
        for k in range(self.n):
            for i in range(self.n):
                yield from self.C[k][i]
        for row in self.F:
            yield from row

    # -- numeric access
    def _compile(self):
        if self._compiled is None:
            coords = self.chart.coords
            n, d = self.n, self.d
            flatC = [self.C[k][i][j] for k in range(n) for i in range(n) for j in range(n)]
            flatF = [self.F[a][i] for a in range(d) for i in range(n)]
            dC = [sx.differentiate(e, x) for x in coords for e in flatC]
            dF = [sx.differentiate(e, x) for x in coords for e in flatF]
            self._compiled = (
                sx.lambdify(flatC, coords), sx.lambdify(flatF, coords),
                sx.lambdify(dC, coords), sx.lambdify(dF, coords),
            )
        return self._compiled

    def C_at(self, pts) -> np.ndarray:
        """C[k, i, j] at one point or an (N, d) array of points."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        v = self._compile()[0](np.atleast_2d(pts)).reshape(-1, self.n, self.n, self.n)
        return v[0] if single else v

    def F_at(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        v = self._compile()[1](np.atleast_2d(pts)).reshape(-1, self.d, self.n)
        return v[0] if single else v

    def dC_at(self, pts) -> np.ndarray:
        """dC[N, a, k, i, j] = dC^k_ij/dx^a."""
        n, d = self.n, self.d
        return self._compile()[2](np.atleast_2d(pts)).reshape(-1, d, n, n, n)

    def dF_at(self, pts) -> np.ndarray:
        """dF[N, a, b, i] = dF^b_i/dx^a."""
        n, d = self.n, self.d
        return self._compile()[3](np.atleast_2d(pts)).reshape(-1, d, d, n)

    def point(self, x) -> np.ndarray:
        if isinstance(x, dict):
            return np.array([float(x[c]) for c in self.chart.coords])
        return np.atleast_1d(np.asarray(x, dtype=float))

    def mutate(self, k: int, i: int, j: int, delta=1) -> "FlatAlgebroid":
        """Copy with C^k_ij shifted by delta (and C^k_ji by -delta)."""
        C = [[list(row) for row in plane] for plane in self.C]
        d = delta if isinstance(delta, Expr) else sx.const(delta)
        C[k][i][j] = C[k][i][j] + d
        C[k][j][i] = sx.neg(C[k][i][j])
        return FlatAlgebroid(self.chart, C, self.F, name=self.name + " (mutated)")

    def relabel(self, perm: Sequence[int]) -> "FlatAlgebroid":
        """Algebroid in the permuted fiber basis e'_p = e_{perm[p]}."""
        n = self.n
        C = [[[self.C[perm[k]][perm[i]][perm[j]] for j in range(n)] for i in range(n)] for k in range(n)]
        F = [[self.F[a][perm[i]] for i in range(n)] for a in range(self.d)]
        return FlatAlgebroid(self.chart, C, F, name=self.name)


# ----------------------------------------------------------------- residuals

def jacobi_residual(A: FlatAlgebroid, convention: str = "realization"):
    """Table J[m][i][j][k] of the Jacobi residual for the bracket sigma*C and anchor F.

    J^m_ijk = sum over cyclic (i, j, k) of
              sum_l C^l_ij C^m_lk - sigma sum_a F^a_k dC^m_ij/dx^a.
    """
    s = convention_sign(convention)
    n, coords = A.n, A.chart.coords
    C, F = A.C, A.F
    dC = {}

    def dCm(m, i, j):
        key = (m, i, j)
        if key not in dC:
            dC[key] = [sx.differentiate(C[m][i][j], x) for x in coords]
        return dC[key]

    def term(m, i, j, k):
        parts = [C[l][i][j] * C[m][l][k] for l in range(n)]
        grads = dCm(m, i, j)
        for a in range(len(coords)):
            if not grads[a].is_zero() and not F[a][k].is_zero():
                parts.append(sx.const(-s) * F[a][k] * grads[a])
        return sx.add(*parts)

    J = [[[[sx.ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for m in range(n):
        for i, j, k in itertools.combinations(range(n), 3):
            v = sx.add(term(m, i, j, k), term(m, j, k, i), term(m, k, i, j))
            for (p, q, r), sgn in _perms_with_sign(i, j, k):
                J[m][p][q][r] = v if sgn > 0 else sx.neg(v)
    return J


def _perms_with_sign(i, j, k):
    return [((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1),
            ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)]


def anchor_morphism_residual(A: FlatAlgebroid, convention: str = "realization"):
    """Table M[b][i][j]: #[e_i, e_j] compared with [#e_i, #e_j].

    M^b_ij = sum_a (F^a_i dF^b_j/dx^a - F^a_j dF^b_i/dx^a) - sigma sum_k C^k_ij F^b_k.
    """
    s = convention_sign(convention)
    n, d, coords = A.n, A.d, A.chart.coords
    C, F = A.C, A.F
    M = [[[sx.ZERO] * n for _ in range(n)] for _ in range(d)]
    for b in range(d):
        for i in range(n):
            for j in range(i + 1, n):
                parts = []
                for a, x in enumerate(coords):
                    parts.append(F[a][i] * sx.differentiate(F[b][j], x))
                    parts.append(sx.neg(F[a][j] * sx.differentiate(F[b][i], x)))
                for k in range(n):
                    parts.append(sx.const(-s) * C[k][i][j] * F[b][k])
                v = sx.add(*parts)
                M[b][i][j] = v
                M[b][j][i] = sx.neg(v)
    return M


def numeric_residuals(A: FlatAlgebroid, pts, convention: str = "realization"):
    """Evaluate J[N, m, i, j, k] and M[N, b, i, j] directly from numeric C, F and their gradients."""
    s = convention_sign(convention)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    C = A.C_at(pts)
    F = A.F_at(pts)
    dC = A.dC_at(pts)
    dF = A.dF_at(pts)
    # T[N, m, i, j, k] = sum_l C^l_ij C^m_lk - s sum_a F^a_k dC^m_ij/dx^a
    T = np.einsum("Nlij,Nmlk->Nmijk", C, C) - s * np.einsum("Nak,Namij->Nmijk", F, dC)
    J = T + np.transpose(T, (0, 1, 3, 4, 2)) + np.transpose(T, (0, 1, 4, 2, 3))
    FdF = np.einsum("Nai,Nabj->Nbij", F, dF)
    M = FdF - np.transpose(FdF, (0, 1, 3, 2)) - s * np.einsum("Nkij,Nbk->Nbij", C, F)
    return J, M


@dataclass
class ResidualReport:
    """Aggregate zero-test verdict for one residual table."""

    verdict: str                     # "zero", "numerically zero", "nonzero", "unknown"
    max_abs: float = 0.0
    witness: dict | None = None
    nonzero_components: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict in ("zero", "numerically zero")

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "max_abs": self.max_abs, "witness": self.witness,
                "nonzero_components": self.nonzero_components}


@dataclass
class Certificate:
    jacobi: ResidualReport
    anchor: ResidualReport
    convention: str = "realization"

    @property
    def passed(self) -> bool:
        return self.jacobi.passed and self.anchor.passed

    @property
    def status(self) -> str:
        if self.passed:
            return "pass"
        if "nonzero" in (self.jacobi.verdict, self.anchor.verdict):
            return "fail"
        return "unknown"

    def as_dict(self) -> dict:
        return {"jacobi": self.jacobi.as_dict(), "anchor": self.anchor.as_dict(),
                "convention": self.convention, "status": self.status}


def _aggregate_symbolic(table: dict, chart: Chart, n_samples: int, abs_tol: float, seed: int,
                        symbolic) -> ResidualReport:
    verdicts = []
    worst = ResidualReport("zero")
    bad = 0
    for idx, e in table.items():
        t = sx.is_identically_zero(e, chart, n=n_samples, abs_tol=abs_tol, seed=seed, symbolic=symbolic)
        verdicts.append(t.verdict)
        if t.verdict == Verdict.NONZERO:
            bad += 1
            if worst.witness is None or t.max_abs > worst.max_abs:
                worst = ResidualReport("nonzero", t.max_abs,
                                       {"component": list(idx), "point": t.witness, "value": t.value})
        elif worst.verdict != "nonzero":
            worst.max_abs = max(worst.max_abs, t.max_abs)
            if t.verdict == Verdict.UNKNOWN:
                worst.verdict = "numerically zero" if t.numerically_zero else "unknown"
    worst.nonzero_components = bad
    return worst


def _aggregate_numeric(values: np.ndarray, pts: np.ndarray, coords, abs_tol: float) -> ResidualReport:
    """values has shape (N, *component_shape)."""
    if values.size == 0:
        return ResidualReport("zero")
    flat = values.reshape(len(values), -1)
    finite = np.isfinite(flat)
    if not finite.any():
        return ResidualReport("unknown")
    absv = np.where(finite, np.abs(flat), -1.0)
    p, c = np.unravel_index(int(np.argmax(absv)), absv.shape)
    mx = float(absv[p, c])
    bad = int(np.sum(np.max(absv, axis=0) > abs_tol))
    if mx > abs_tol:
        comp = list(np.unravel_index(c, values.shape[1:]))
        return ResidualReport("nonzero", mx, {"component": [int(v) for v in comp],
                                              "point": dict(zip(coords, map(float, pts[p]))),
                                              "value": float(flat[p, c])}, bad)
    return ResidualReport("numerically zero", mx)


def certify(A: FlatAlgebroid, convention: str = "realization", mode: str = "symbolic",
            n_samples: int = 200, abs_tol: float = 1e-10, seed: int = 42,
            symbolic="auto") -> Certificate:
    """Check the Jacobi and anchor-morphism identities.

    ``mode="symbolic"`` zero-tests every residual expression (normal form,
    then sampling).  ``mode="numeric"`` evaluates the residuals at random
    chart points from numerically compiled data, which scales to large
    expression tables.
    """
    if mode == "numeric":
        pts = A.chart.sample(n_samples, seed) if A.d else np.zeros((1, 0))
        J, M = numeric_residuals(A, pts, convention)
        return Certificate(_aggregate_numeric(J, pts, A.chart.coords, abs_tol),
                           _aggregate_numeric(M, pts, A.chart.coords, abs_tol), convention)
    if mode != "symbolic":
        raise ValueError(f"unknown mode {mode!r}")
    n = A.n
    J = jacobi_residual(A, convention)
    M = anchor_morphism_residual(A, convention)
    jt = {(m, i, j, k): J[m][i][j][k] for m in range(n)
          for i, j, k in itertools.combinations(range(n), 3)}
    mt = {(b, i, j): M[b][i][j] for b in range(A.d) for i in range(n) for j in range(i + 1, n)}
    chart = A.chart.with_guards(g for e in A.entries() for g in sx.denominators(e))
    return Certificate(_aggregate_symbolic(jt, chart, n_samples, abs_tol, seed, symbolic),
                       _aggregate_symbolic(mt, chart, n_samples, abs_tol, seed, symbolic),
                       convention)


# ---------------------------------------------------------- pointwise structure

def fiber_algebra(A: FlatAlgebroid, x) -> np.ndarray:
    """Structure constants C[k, i, j] of the fiber bracket at x."""
    return A.C_at(A.point(x))


@dataclass
class IsotropyAlgebra:
    point: np.ndarray
    basis: np.ndarray               # (n, r), orthonormal columns spanning ker F(x)
    structure_constants: np.ndarray  # (r, r, r)
    closure_residual: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def isotropy_at(A: FlatAlgebroid, x, tol: float = 1e-9) -> IsotropyAlgebra:
    """Kernel of the anchor at x with the restricted bracket."""
    from .liealg import nullspace

    p = A.point(x)
    F = A.F_at(p) if A.d else np.zeros((0, A.n))
    K = nullspace(F, tol) if F.size else np.eye(A.n)
    C = A.C_at(p)
    r = K.shape[1]
    c = np.zeros((r, r, r))
    res = 0.0
    for a in range(r):
        for b in range(r):
            w = np.einsum("kij,i,j->k", C, K[:, a], K[:, b])
            coef = K.T @ w
            res = max(res, float(np.linalg.norm(w - K @ coef)))
            c[:, a, b] = coef
    if res > tol * max(1.0, float(np.abs(C).max(initial=0.0))):
        warnings.warn(f"isotropy bracket does not close (residual {res:.2e}); algebroid is not certified",
                      stacklevel=2)
    return IsotropyAlgebra(p, K, c, res)


def orbit_rank_at(A: FlatAlgebroid, x, tol: float = 1e-9) -> int:
    if A.d == 0:
        return 0
    F = A.F_at(A.point(x))
    s = np.linalg.svd(F, compute_uv=False)
    return int(np.sum(s > tol))


@dataclass
class OrbitResult:
    status: str                         # "yes", "no", "unknown"
    path: list = field(default_factory=list)  # [(coefficients, duration)]
    distance: float = 0.0
    steps: int = 0
    reason: str = ""

    def as_dict(self) -> dict:
        return {"status": self.status, "distance": self.distance, "steps": self.steps,
                "reason": self.reason,
                "path": [{"coefficients": list(map(float, xi)), "duration": float(t)} for xi, t in self.path]}


def _rk4(A: FlatAlgebroid, p: np.ndarray, xi: np.ndarray, h: float) -> np.ndarray:
    f = lambda q: A.F_at(q) @ xi
    k1 = f(p)
    k2 = f(p + 0.5 * h * k1)
    k3 = f(p + 0.5 * h * k2)
    k4 = f(p + h * k3)
    return p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def same_orbit(A: FlatAlgebroid, x, y, budget: int = 100_000, step: float = 1e-3,
               tol: float = 1e-6, rank_tol: float = 1e-9) -> OrbitResult:
    """Semi-decide whether y lies on the orbit of x.

    Repeatedly picks constant coefficients xi by least squares so that the
    anchor field F(p) xi points from the current point p towards y, and flows
    it with RK4 for unit time.  A rank-zero anchor at either endpoint makes
    that point its own orbit, which is the only certified negative answer.
    """
    p = A.point(x).astype(float)
    q = A.point(y).astype(float)
    dist = float(np.linalg.norm(q - p))
    if dist <= tol:
        return OrbitResult("yes", [], dist, 0, "points coincide")
    rx, ry = orbit_rank_at(A, p, rank_tol), orbit_rank_at(A, q, rank_tol)
    if rx == 0 or ry == 0:
        return OrbitResult("no", [], dist, 0, "anchor vanishes at an endpoint, whose orbit is a single point")
    path = []
    steps = 0
    per_segment = max(1, int(round(1.0 / step)))
    with np.errstate(over="ignore", invalid="ignore"):
        return _orbit_search(A, p, q, path, steps, per_segment, budget, step, tol)


def _orbit_search(A, p, q, path, steps, per_segment, budget, step, tol) -> OrbitResult:
    while steps < budget:
        F = A.F_at(p)
        xi, *_ = np.linalg.lstsq(F, q - p, rcond=None)
        if not np.all(np.isfinite(xi)) or np.linalg.norm(F @ xi) < 1e-14:
            break
        start = p.copy()
        best, best_t, t = p, 0.0, 0.0
        for _ in range(min(per_segment, budget - steps)):
            p = _rk4(A, p, xi, step)
            t += step
            steps += 1
            if not np.all(np.isfinite(p)):
                break
            dnew = float(np.linalg.norm(q - p))
            if dnew < float(np.linalg.norm(q - best)):
                best, best_t = p.copy(), t
            if dnew <= tol:
                break
        if best_t == 0.0:
            p = start
            break
        p = best
        path.append((xi, best_t))
        dist = float(np.linalg.norm(q - p))
        if dist <= tol:
            return OrbitResult("yes", path, dist, steps, "reached target along anchor flows")
    return OrbitResult("unknown", path, float(np.linalg.norm(q - p)), steps, "budget exhausted or flow stalled")
