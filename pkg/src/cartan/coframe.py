"""Coframes on coordinate charts: structure functions, coframe derivatives and invariants.

A coframe theta^i = sum_j a^i_j dx^j is stored through its coefficient table
``a``.  Its structure functions are the coefficients of

    d theta^k = sum_{i<j} C^k_ij theta^i ^ theta^j,

and the coframe derivatives of a function f are the components of df in the
theta basis.  Iterating coframe derivatives on the structure functions
produces the invariant tower whose rank stabilizes at the dimension of the
classifying space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import symexpr as sx
from .algebroid import Certificate, FlatAlgebroid, ResidualReport, certify, _aggregate_symbolic
from .symexpr import Chart, Expr

__all__ = [
    "Coframe", "InvariantTower", "SingularCoframe", "NotFullyRegular",
    "ExpressionNotFunctionOfInvariants", "ClosedFormUnavailable", "ClassifyingCheck",
    "structure_functions", "coframe_derivative", "invariant_tower",
    "derive_classifying_algebroid", "verify_classifying_data", "pullback",
]


class SingularCoframe(ValueError):
    pass


class NotFullyRegular(ValueError):
    def __init__(self, tower: "InvariantTower"):
        self.tower = tower
        super().__init__(f"invariant ranks vary over the grid; witnesses {tower.witnesses}")


class ExpressionNotFunctionOfInvariants(ValueError):
    def __init__(self, label: str, p: np.ndarray, q: np.ndarray, fp: float, fq: float):
        self.label, self.points, self.values = label, (p, q), (fp, fq)
        super().__init__(f"{label} takes values {fp:.6g} and {fq:.6g} at points {p.tolist()} and {q.tolist()} "
                         "with equal invariants")


class ClosedFormUnavailable(ValueError):
    pass


class Coframe:
    """theta^i = sum_j a[i][j] dx^j on a chart."""

    def __init__(self, chart: Chart, a, check: bool = True, det_tol: float = 1e-9):
        self.chart = chart
        n = chart.dim
        if len(a) != n or any(len(row) != n for row in a):
            raise ValueError(f"coefficient table must be {n} x {n}")
        self.a = [[x if isinstance(x, Expr) else sx.parse_expr(str(x), chart) for x in row] for row in a]
        self._b = None
        self._C = None
        if check:
            pts = chart.grid(5) if n <= 4 else chart.sample(200, 0)
            vals = self.a_at(pts)
            dets = np.abs(np.linalg.det(vals))
            if not np.all(np.isfinite(dets)) or dets.min() <= det_tol:
                j = int(np.argmin(np.where(np.isfinite(dets), dets, -1)))
                raise SingularCoframe(f"coefficient matrix is singular near {pts[j].tolist()}")

    @property
    def n(self) -> int:
        return self.chart.dim

    def a_at(self, pts) -> np.ndarray:
        f = sx.lambdify([e for row in self.a for e in row], self.chart.coords)
        pts = np.asarray(pts, dtype=float)
        return f(np.atleast_2d(pts)).reshape(-1, self.n, self.n)

    @property
    def inverse(self):
        """b with dx^j = sum_i b[j][i] theta^i, as expressions."""
        if self._b is None:
            import sympy

            A = sympy.Matrix([[sx.to_sympy(e) for e in row] for row in self.a])
            # simplify is slow; reserve it for trigonometric entries
            trans = A.has(sympy.sin, sympy.cos, sympy.sinh, sympy.cosh)
            tidy = (lambda e: sympy.cancel(sympy.simplify(e))) if trans else sympy.cancel
            det = tidy(A.det(method="berkowitz"))
            if det == 0:
                raise SingularCoframe("coefficient matrix is identically singular")
            adj = A.adjugate(method="berkowitz")
            self._b = [[sx.from_sympy(tidy(adj[j, i] / det)) for i in range(self.n)] for j in range(self.n)]
        return self._b

    def derivative(self, f: Expr) -> list[Expr]:
        return coframe_derivative(self, f)


def structure_functions(theta: Coframe):
    """C[k][p][q] with d theta^k = sum_{p<q} C^k_pq theta^p ^ theta^q."""
    if theta._C is not None:
        return theta._C
    n, xs = theta.n, theta.chart.coords
    a, b = theta.a, theta.inverse
    C = [[[sx.ZERO] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        # da[l][j] = d a^k_j / d x^l - d a^k_l / d x^j
        curl = [[sx.add(sx.differentiate(a[k][j], xs[l]), sx.neg(sx.differentiate(a[k][l], xs[j])))
                 for j in range(n)] for l in range(n)]
        for p in range(n):
            for q in range(p + 1, n):
                terms = [curl[l][j] * b[l][p] * b[j][q]
                         for l in range(n) for j in range(n) if l != j and not curl[l][j].is_zero()]
                v = sx.normalize(sx.add(*terms)) if terms else sx.ZERO
                C[k][p][q] = v
                C[k][q][p] = sx.neg(v)
    theta._C = C
    return C


def coframe_derivative(theta: Coframe, f: Expr) -> list[Expr]:
    """Components of df in the theta basis."""
    xs, b = theta.chart.coords, theta.inverse
    grad = [sx.differentiate(f, x) for x in xs]
    out = []
    for k in range(theta.n):
        terms = [grad[j] * b[j][k] for j in range(theta.n) if not grad[j].is_zero()]
        out.append(sx.normalize(sx.add(*terms)) if terms else sx.ZERO)
    return out


def pullback(theta: Coframe, phi: Mapping[str, Expr], chart: Chart) -> Coframe:
    """Pull theta back along the map y -> x = phi(y); ``chart`` carries the y coordinates."""
    ys = chart.coords
    xs = theta.chart.coords
    sub = {x: phi[x] for x in xs}
    a = []
    for row in theta.a:
        new = []
        for m in range(len(ys)):
            terms = [sx.substitute(row[j], sub) * sx.differentiate(phi[xs[j]], ys[m]) for j in range(len(xs))]
            new.append(sx.normalize(sx.add(*terms)))
        a.append(new)
    return Coframe(chart, a)


# -------------------------------------------------------------- invariant tower

def _jacobian_fn(exprs: Sequence[Expr], coords):
    grads = [sx.differentiate(e, x) for e in exprs for x in coords]
    f = sx.lambdify(grads, coords)
    m, d = len(exprs), len(coords)

    def jac(pts):
        return f(np.atleast_2d(pts)).reshape(-1, m, d)
    return jac


def _rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


@dataclass
class InvariantTower:
    orders: list                 # per order: list of (label, Expr) added at that order
    ranks: list                  # per order: rank on the grid (max over points)
    rank_ranges: list            # per order: (min, max) rank over the grid
    fully_regular: bool
    stabilized: bool
    d: int
    generators: list             # Expr list
    generator_labels: list
    witnesses: list = field(default_factory=list)
    grid: np.ndarray | None = None

    def invariants(self, upto: int | None = None):
        out = []
        for s, layer in enumerate(self.orders):
            if upto is not None and s > upto:
                break
            out.extend(layer)
        return out

    def as_dict(self) -> dict:
        return {
            "ranks": self.ranks, "rank_ranges": [list(r) for r in self.rank_ranges],
            "fully_regular": self.fully_regular, "fully_regular_scope": "sampled grid",
            "stabilized": self.stabilized, "d": self.d,
            "generators": [str(g) for g in self.generators], "generator_labels": self.generator_labels,
            "invariant_counts": [len(layer) for layer in self.orders],
            "witnesses": self.witnesses,
        }


def invariant_tower(theta: Coframe, s_max: int = 2, grid: np.ndarray | None = None,
                    generators: Sequence[int] | None = None, rank_tol: float = 1e-8,
                    strict: bool = True, max_size: int = 4000) -> InvariantTower:
    """Build F_0 ⊂ F_1 ⊂ ... ⊂ F_{s_max} and the Jacobian rank at each order.

    Generators are chosen greedily in tower order at the first grid point,
    keeping an invariant when it raises the Jacobian rank; ``generators`` may
    instead give explicit indices into the flattened invariant list.
    """
    if s_max < 0:
        raise ValueError("s_max must be nonnegative")
    chart = theta.chart
    xs = chart.coords
    if grid is None:
        grid = chart.grid(5)
    grid = np.atleast_2d(grid)
    C = structure_functions(theta)
    n = theta.n

    seen: set[Expr] = set()
    layer = []
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                e = C[k][i][j]
                if not e.is_const and e not in seen and sx.neg(e) not in seen:
                    seen.add(e)
                    layer.append((f"C{k + 1}_{i + 1}{j + 1}", e))
    orders = [layer]
    for s in range(1, s_max + 1):
        new = []
        for label, e in orders[-1]:
            if e.size() > max_size:
                continue
            for k, de in enumerate(coframe_derivative(theta, e)):
                if not de.is_const and de not in seen and sx.neg(de) not in seen:
                    seen.add(de)
                    new.append((f"D{k + 1}({label})", de))
        orders.append(new)

    ranks, ranges, witnesses = [], [], []
    all_inv: list = []
    regular = True
    for s, layer in enumerate(orders):
        all_inv.extend(layer)
        if not all_inv:
            ranks.append(0)
            ranges.append((0, 0))
            continue
        J = _jacobian_fn([e for _, e in all_inv], xs)(grid)
        rs = np.array([_rank(Jp, rank_tol) if np.all(np.isfinite(Jp)) else -1 for Jp in J])
        ok = rs >= 0
        lo, hi = int(rs[ok].min()), int(rs[ok].max())
        ranks.append(hi)
        ranges.append((lo, hi))
        if lo != hi:
            regular = False
            witnesses.append({"order": s, "low": grid[int(np.argmin(np.where(ok, rs, n + 1)))].tolist(),
                              "high": grid[int(np.argmax(rs))].tolist()})
    stabilized = any(ranks[s] == ranks[s + 1] for s in range(len(ranks) - 1))
    d = ranks[-1]
    for s in range(len(ranks) - 1):
        if ranks[s] == ranks[s + 1]:
            d = ranks[s]
            break

    flat = all_inv
    if generators is not None:
        chosen = list(generators)
    else:
        chosen = []
        base = grid[0]
        if flat and d:
            Jb = _jacobian_fn([e for _, e in flat], xs)(base)[0]
            rows = []
            for idx in range(len(flat)):
                trial = rows + [Jb[idx]]
                if _rank(np.array(trial), rank_tol) > len(rows):
                    rows.append(Jb[idx])
                    chosen.append(idx)
                if len(chosen) == d:
                    break
    tower = InvariantTower(
        orders=orders, ranks=ranks, rank_ranges=ranges, fully_regular=regular, stabilized=stabilized,
        d=d, generators=[flat[i][1] for i in chosen], generator_labels=[flat[i][0] for i in chosen],
        witnesses=witnesses, grid=grid,
    )
    if strict and not regular:
        raise NotFullyRegular(tower)
    return tower


# ---------------------------------------------------------- classifying data

def _level_set_witness(hs: Sequence[Expr], f: Expr, coords, grid, tol=1e-8):
    """Search for two points with equal h values but different f values."""
    m = len(hs)
    Jh = _jacobian_fn(hs, coords) if m else None
    hval = sx.lambdify(list(hs), coords) if m else None
    fval = sx.lambdify([f], coords)
    gf = _jacobian_fn([f], coords)
    for p in grid:
        g = gf(p)[0, 0]
        if m:
            Jp = Jh(p)[0]
            _, s, vt = np.linalg.svd(Jp)
            r = int(np.sum(s > 1e-10 * max(1.0, s[0] if len(s) else 1.0)))
            K = vt[r:]
        else:
            K = np.eye(len(coords))
        if not len(K):
            continue
        v = K.T @ (K @ g)
        if np.linalg.norm(v) < 1e-6:
            continue
        v = v / np.linalg.norm(v)
        target = hval(p) if m else None
        for t in (1e-1, 3e-2, 1e-2):
            q = p + t * v
            for _ in range(20):
                if not m:
                    break
                r_ = hval(q) - target
                if np.linalg.norm(r_) < 1e-13:
                    break
                step, *_ = np.linalg.lstsq(Jh(q)[0], r_, rcond=None)
                q = q - step
            if m and np.linalg.norm(hval(q) - target) > 1e-10:
                continue
            fp, fq = float(fval(p)[0]), float(fval(q)[0])
            if abs(fp - fq) > tol:
                return p, q, fp, fq
    return None


def _check_functions_of(hs, exprs: dict, chart: Chart, grid):
    coords = chart.coords
    for label, e in exprs.items():
        if e.is_const:
            continue
        Jf = _jacobian_fn(list(hs) + [e], coords)(grid)
        base = len(hs)
        for p, Jp in zip(grid, Jf):
            if np.all(np.isfinite(Jp)) and _rank(Jp, 1e-8) > _rank(Jp[:base], 1e-8):
                w = _level_set_witness(hs, e, coords, grid)
                if w is not None:
                    raise ExpressionNotFunctionOfInvariants(label, *w)
                break


def _auto_inverse(hs: Sequence[Expr], h_names: Sequence[str], chart: Chart, base: np.ndarray):
    """Solve h(x) = h for some coordinates with sympy, choosing the branch through the base point."""
    import sympy

    coords = chart.coords
    J = _jacobian_fn(hs, coords)(base)[0]
    pick = []
    for j in range(len(coords)):
        if _rank(J[:, pick + [j]], 1e-8) > len(pick):
            pick.append(j)
        if len(pick) == len(hs):
            break
    xsyms = [sx._sym(coords[j]) for j in pick]
    eqs = [sx.to_sympy(h) - sx._sym(name) for h, name in zip(hs, h_names)]
    try:
        sols = sympy.solve(eqs, xsyms, dict=True)
    except (NotImplementedError, ValueError) as exc:
        raise ClosedFormUnavailable(str(exc)) from exc
    hb = sx.lambdify(list(hs), coords)(base)
    for sol in sols:
        if set(sol) != set(xsyms):
            continue
        try:
            inv = {coords[j]: sx.from_sympy(sol[xsyms[q]]) for q, j in enumerate(pick)}
        except ValueError:
            continue
        subs = dict(zip(h_names, map(float, hb)))
        subs.update({c: float(v) for c, v in zip(coords, base) if c not in inv})
        ok = True
        for q, j in enumerate(pick):
            val = sx.evaluate(sx.substitute(inv[coords[j]], {k: sx.const(v) for k, v in subs.items()}), {})
            if not np.isfinite(val) or abs(val - base[j]) > 1e-8 * max(1.0, abs(base[j])):
                ok = False
        if ok:
            return inv
    raise ClosedFormUnavailable("no solution branch passes through the base point")


def derive_classifying_algebroid(theta: Coframe, tower: InvariantTower,
                                 inverse: Mapping[str, Expr | str] | None = None,
                                 h_names: Sequence[str] | None = None,
                                 box=None, auto_inverse: bool = True,
                                 convention: str = "realization") -> tuple[FlatAlgebroid, Certificate]:
    """Express C and the coframe derivatives of the generators through the generators.

    ``inverse`` maps some of the chart coordinates to expressions in the
    generator names; when absent, a closed-form inverse is sought with sympy.
    Functional dependence is always verified on the grid first.
    """
    if not tower.fully_regular:
        raise NotFullyRegular(tower)
    n = theta.n
    hs = list(tower.generators)
    d = len(hs)
    h_names = list(h_names) if h_names else (["h"] if d == 1 else [f"h{a + 1}" for a in range(d)])
    grid = tower.grid if tower.grid is not None else theta.chart.grid(5)
    C = structure_functions(theta)
    dh = [coframe_derivative(theta, h) for h in hs]

    targets = {f"C{k + 1}_{i + 1}{j + 1}": C[k][i][j]
               for k in range(n) for i in range(n) for j in range(i + 1, n)}
    targets.update({f"d{h_names[a]}/dtheta{i + 1}": dh[a][i] for a in range(d) for i in range(n)})
    _check_functions_of(hs, targets, theta.chart, grid)

    if box is None:
        if d:
            hv = sx.lambdify(hs, theta.chart.coords)(grid)
            box = list(zip(hv.min(axis=0).tolist(), hv.max(axis=0).tolist()))
        else:
            box = []
    X = Chart(h_names, box)

    if d == 0:
        Cc = [[[sx.const(float(sx.lambdify([C[k][i][j]], theta.chart.coords)(grid[0])[0]))
                if not C[k][i][j].is_const else C[k][i][j]
                for j in range(n)] for i in range(n)] for k in range(n)]
        A = FlatAlgebroid(X, Cc, [], name="classifying")
        return A, certify(A, convention)

    if inverse is None:
        if not auto_inverse:
            raise ClosedFormUnavailable("no inverse supplied for the generator map")
        inv = _auto_inverse(hs, h_names, theta.chart, grid[0])
    else:
        inv = {k: (v if isinstance(v, Expr) else sx.parse_expr(str(v), h_names + list(theta.chart.coords)))
               for k, v in inverse.items()}

    def through_h(e: Expr, label: str) -> Expr:
        r = sx.normalize(sx.substitute(e, inv))
        left = sx.free_vars(r) - set(h_names)
        if left:
            raise ClosedFormUnavailable(f"{label} still depends on {sorted(left)} after substitution")
        return r

    Ch = [[[sx.ZERO] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                v = through_h(C[k][i][j], f"C{k + 1}_{i + 1}{j + 1}")
                Ch[k][i][j], Ch[k][j][i] = v, sx.neg(v)
    Fh = [[through_h(dh[a][i], f"d{h_names[a]}/dtheta{i + 1}") for i in range(n)] for a in range(d)]
    A = FlatAlgebroid(X, Ch, Fh, name="classifying")
    return A, certify(A, convention)


@dataclass
class ClassifyingCheck:
    structure: ResidualReport
    anchor: ResidualReport

    @property
    def passed(self) -> bool:
        return self.structure.passed and self.anchor.passed

    def as_dict(self) -> dict:
        return {"structure": self.structure.as_dict(), "anchor": self.anchor.as_dict(),
                "status": "pass" if self.passed else
                ("fail" if "nonzero" in (self.structure.verdict, self.anchor.verdict) else "unknown")}


def verify_classifying_data(theta: Coframe, h: Sequence[Expr], A: FlatAlgebroid,
                            n_samples: int = 200, abs_tol: float = 1e-10, seed: int = 42,
                            symbolic="auto") -> ClassifyingCheck:
    """Check C(x) = C(h(x)) and dh_a/dtheta^i = F^a_i(h(x)) on the coframe chart."""
    n = theta.n
    if A.n != n:
        raise ValueError(f"fiber rank {A.n} differs from coframe rank {n}")
    if len(h) != A.d:
        raise ValueError(f"{len(h)} invariant functions for a {A.d}-dimensional base")
    h = [x if isinstance(x, Expr) else sx.parse_expr(str(x), theta.chart) for x in h]
    sub = dict(zip(A.chart.coords, h))
    C = structure_functions(theta)
    sres = {}
    for k in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                sres[(k, i, j)] = C[k][i][j] - sx.substitute(A.C[k][i][j], sub)
    ares = {}
    for a, ha in enumerate(h):
        dh = coframe_derivative(theta, ha)
        for i in range(n):
            ares[(a, i)] = dh[i] - sx.substitute(A.F[a][i], sub)
    guards = [g for e in itertools.chain(sres.values(), ares.values()) for g in sx.denominators(e)]
    chart = theta.chart.with_guards(guards)
    return ClassifyingCheck(
        _aggregate_symbolic(sres, chart, n_samples, abs_tol, seed, symbolic),
        _aggregate_symbolic(ares, chart, n_samples, abs_tol, seed, symbolic),
    )
