"""Matrix Lie algebras, prolongations and structure-function reduction.

A :class:`MatrixLieAlgebra` is a subalgebra of gl(n) given by ``m`` basis
matrices stacked into an array of shape ``(m, n, n)``.  Structure constants
are stored as ``c[gamma, alpha, beta]`` so that

    [E_alpha, E_beta] = sum_gamma c[gamma, alpha, beta] E_gamma.

Prolongations are computed in the symmetric multilinear model: the k-th
prolongation is the space of fully symmetric (k+1)-linear maps
V x ... x V -> V such that freezing all but one argument gives an element of
the algebra.  Elements are stored as arrays ``S[i, j0, ..., jk]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MatrixLieAlgebra", "ProlongationSpace", "NotClosed", "DependentBasis",
    "FiniteType", "Undetermined", "make_algebra", "from_structure_constants",
    "preset", "o", "gl", "sl", "u", "co",
    "antisymmetrize", "first_prolongation", "prolongation_space",
    "prolongation_tower", "killing_form", "signature", "classify_3d",
    "antisymmetrization_image", "reduce_structure_function", "nullspace",
]

ABS_TOL = 1e-10


class NotClosed(ValueError):
    def __init__(self, pair, residual):
        self.pair = pair
        self.residual = float(residual)
        super().__init__(f"commutator of basis elements {pair} leaves the span (residual {residual:.3e})")


class DependentBasis(ValueError):
    pass


def nullspace(M: np.ndarray, tol: float = ABS_TOL) -> np.ndarray:
    """Orthonormal basis of ker M as columns; singular values below tol count as zero."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.shape[0] == 0 or ncols == 0:
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(M)
    scale = max(1.0, s[0]) if len(s) else 1.0
    rank = int(np.sum(s > tol * scale))
    return vt[rank:].T.copy()


def _rank(M: np.ndarray, tol: float = ABS_TOL) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


@dataclass
class MatrixLieAlgebra:
    basis: np.ndarray                     # (m, n, n)
    structure_constants: np.ndarray       # (m, m, m), c[gamma, alpha, beta]
    name: str = ""

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def c(self) -> np.ndarray:
        return self.structure_constants

    def coordinates(self, X: np.ndarray) -> tuple[np.ndarray, float]:
        """Least-squares coordinates of matrix X and the residual norm."""
        X = np.asarray(X, dtype=float)
        if self.dim == 0:
            return np.zeros(0), float(np.linalg.norm(X))
        A = self.basis.reshape(self.dim, -1).T
        coef, *_ = np.linalg.lstsq(A, X.ravel(), rcond=None)
        return coef, float(np.linalg.norm(A @ coef - X.ravel()))

    def contains(self, X: np.ndarray, tol: float = ABS_TOL) -> bool:
        return self.coordinates(X)[1] <= tol * max(1.0, float(np.linalg.norm(X)))

    def bracket(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Bracket of coordinate vectors."""
        return np.einsum("gab,a,b->g", self.c, x, y)

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return np.tensordot(x, self.basis, axes=1)

    def projector_perp(self) -> np.ndarray:
        """Orthogonal projector of gl(n) (flattened) onto the complement of span(basis)."""
        N = self.n * self.n
        if self.dim == 0:
            return np.eye(N)
        q, _ = np.linalg.qr(self.basis.reshape(self.dim, -1).T)
        return np.eye(N) - q @ q.T

    def change_basis(self, P: np.ndarray) -> "MatrixLieAlgebra":
        """New algebra with basis F_a = sum_b P[a, b] E_b."""
        return make_algebra(np.tensordot(P, self.basis, axes=1), name=self.name)


def make_algebra(basis, name: str = "", tol: float = ABS_TOL) -> MatrixLieAlgebra:
    B = np.asarray(basis, dtype=float)
    if B.ndim == 2 and B.shape[0] == 0:
        B = B.reshape(0, 0, 0)
    if B.ndim != 3 or B.shape[1] != B.shape[2]:
        raise ValueError("basis must be a list of square matrices of one size")
    m, n, _ = B.shape
    A = B.reshape(m, -1).T
    if m and _rank(A, tol) < m:
        raise DependentBasis(f"basis of {m} matrices spans only {_rank(A, tol)} dimensions")
    c = np.zeros((m, m, m))
    for a in range(m):
        for b in range(a + 1, m):
            comm = B[a] @ B[b] - B[b] @ B[a]
            coef, *_ = np.linalg.lstsq(A, comm.ravel(), rcond=None)
            res = np.linalg.norm(A @ coef - comm.ravel())
            if res > tol * max(1.0, np.linalg.norm(comm)):
                raise NotClosed((a, b), res)
            coef[np.abs(coef) < tol] = 0.0
            c[:, a, b] = coef
            c[:, b, a] = -coef
    return MatrixLieAlgebra(B, c, name)


def from_structure_constants(c, name: str = "") -> MatrixLieAlgebra:
    """Abstract algebra from c[gamma, alpha, beta], realized by its adjoint matrices.

    The adjoint image is faithful only for centerless algebras, so the
    returned object keeps the given constants rather than recomputing them.
    """
    c = np.asarray(c, dtype=float)
    ad = np.transpose(c, (1, 0, 2))  # (ad e_a)[g, b] = c[g, a, b]
    return MatrixLieAlgebra(ad.copy(), c.copy(), name)


# -------------------------------------------------------------------- presets

def _E(n, i, j):
    M = np.zeros((n, n))
    M[i, j] = 1.0
    return M


def o(n: int) -> MatrixLieAlgebra:
    B = [_E(n, i, j) - _E(n, j, i) for i in range(n) for j in range(i + 1, n)]
    return make_algebra(np.array(B).reshape(len(B), n, n), name=f"o({n})")


def gl(n: int) -> MatrixLieAlgebra:
    return make_algebra([_E(n, i, j) for i in range(n) for j in range(n)], name=f"gl({n})")


def sl(n: int) -> MatrixLieAlgebra:
    B = [_E(n, i, j) for i in range(n) for j in range(n) if i != j]
    B += [_E(n, i, i) - _E(n, n - 1, n - 1) for i in range(n - 1)]
    return make_algebra(B, name=f"sl({n})")


def co(n: int) -> MatrixLieAlgebra:
    B = [np.eye(n)] + list(o(n).basis)
    return make_algebra(B, name=f"co({n})")


def u(n: int) -> MatrixLieAlgebra:
    """Skew-Hermitian n x n matrices A + iB acting on R^2n as [[A, -B], [B, A]]."""
    def real(A, Bm):
        return np.block([[A, -Bm], [Bm, A]])

    Z = np.zeros((n, n))
    basis = [real(Z, _E(n, k, k)) for k in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            basis.append(real(_E(n, i, j) - _E(n, j, i), Z))
            basis.append(real(Z, _E(n, i, j) + _E(n, j, i)))
    return make_algebra(basis, name=f"u({n})")


_PRESETS = {"o": o, "so": o, "gl": gl, "sl": sl, "u": u, "co": co}


def preset(text: str) -> MatrixLieAlgebra:
    """Look up a named algebra such as ``"o(3)"`` or ``"gl(2)"``."""
    s = text.replace(" ", "")
    head, _, rest = s.partition("(")
    if head not in _PRESETS or not rest.endswith(")"):
        raise ValueError(f"unknown algebra preset {text!r}")
    try:
        n = int(rest[:-1])
    except ValueError:
        raise ValueError(f"bad dimension in preset {text!r}") from None
    if n < 1:
        raise ValueError(f"bad dimension in preset {text!r}")
    return _PRESETS[head](n)


# ------------------------------------------------------------- antisymmetrize

def antisymmetrize(T) -> np.ndarray:
    """A(T)[i, a, b] = (T(e_a) e_b - T(e_b) e_a)^i for T given as (n, n, n) with T[a] = T(e_a)."""
    T = np.asarray(T, dtype=float)
    # T[a, i, b] is the (i, b) entry of T(e_a)
    S = np.transpose(T, (1, 0, 2))  # S[i, a, b] = T(e_a)[i, b]
    return S - np.transpose(S, (0, 2, 1))


def _alt_pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def antisymmetrization_matrix(g: MatrixLieAlgebra) -> np.ndarray:
    """Matrix of A restricted to hom(R^n, g).

    Columns are indexed by (a, alpha) for T = e_a^* (x) E_alpha, rows by
    (i, a<b) components of the alternating output.
    """
    n, m = g.n, g.dim
    pairs = _alt_pairs(n)
    M = np.zeros((n * len(pairs), n * m))
    for a in range(n):
        for al in range(m):
            T = np.zeros((n, n, n))
            T[a] = g.basis[al]
            AT = antisymmetrize(T)
            M[:, a * m + al] = np.array([AT[i, p, q] for i in range(n) for p, q in pairs])
    return M


# --------------------------------------------------------------- prolongation

@dataclass
class ProlongationSpace:
    order: int
    n: int
    basis: np.ndarray  # (dim, n, n, ..., n) with order + 2 trailing axes

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def check(self, g: MatrixLieAlgebra, tol: float = 1e-9) -> bool:
        """Symmetry in the inputs and membership of partial evaluations in g."""
        k = self.order
        for S in self.basis:
            for perm in itertools.permutations(range(1, k + 2)):
                if np.max(np.abs(S - np.transpose(S, (0,) + perm)), initial=0) > tol:
                    return False
            for idx in itertools.product(range(self.n), repeat=k):
                if not g.contains(S[(slice(None), slice(None)) + idx], tol):
                    return False
        return True


def first_prolongation(g: MatrixLieAlgebra) -> ProlongationSpace:
    """Kernel of the antisymmetrization map on hom(R^n, g)."""
    n, m = g.n, g.dim
    if m == 0:
        return ProlongationSpace(1, n, np.zeros((0, n, n, n)))
    K = nullspace(antisymmetrization_matrix(g))
    out = []
    for v in K.T:
        coef = v.reshape(n, m)
        T = np.einsum("am,mij->aij", coef, g.basis)  # T[a] = T(e_a)
        out.append(np.transpose(T, (1, 0, 2)))     # S[i, a, b] = T(e_a) e_b
    basis = np.array(out).reshape(len(out), n, n, n)
    basis[np.abs(basis) < ABS_TOL] = 0.0
    return ProlongationSpace(1, n, basis)


def _sym_basis(n: int, p: int) -> np.ndarray:
    """Basis of symmetric p-tensors on R^n as arrays (count, n, ..., n)."""
    combos = list(itertools.combinations_with_replacement(range(n), p))
    out = np.zeros((len(combos),) + (n,) * p)
    for c_idx, combo in enumerate(combos):
        for perm in set(itertools.permutations(combo)):
            out[(c_idx,) + perm] = 1.0
    return out


def prolongation_space(g: MatrixLieAlgebra, k: int) -> ProlongationSpace:
    """k-th prolongation as symmetric (k+1)-linear maps with values in R^n."""
    if k < 1:
        raise ValueError("order must be at least 1")
    n = g.n
    sym = _sym_basis(n, k + 1)             # (s, n^{k+1})
    nsym = sym.shape[0]
    # unknown S = sum_{i, s} x[i, s] e_i (x) sym_s ; coordinates ordered (i, s)
    P = g.projector_perp()                 # acts on flattened (i, j0)
    rows = []
    for idx in itertools.combinations_with_replacement(range(n), k):
        # slice over (j0) at fixed trailing indices idx
        sl_ = sym[(slice(None), slice(None)) + idx]   # (s, j0)
        # matrix M[i, j0] = sum_s x[i, s] sl_[s, j0]; vec index i*n + j0
        block = np.zeros((n * n, n * nsym))
        for i in range(n):
            block[i * n:(i + 1) * n, i * nsym:(i + 1) * nsym] = sl_.T
        rows.append(P @ block)
    K = nullspace(np.vstack(rows)) if rows else np.eye(n * nsym)
    out = np.einsum("isv,s...->vi...", K.reshape(n, nsym, -1), sym)
    out[np.abs(out) < ABS_TOL] = 0.0
    return ProlongationSpace(k, n, out)


@dataclass(frozen=True)
class FiniteType:
    k: int

    def __str__(self):
        return f"FiniteType({self.k})"


@dataclass(frozen=True)
class Undetermined:
    max_k: int

    def __str__(self):
        return f"Undetermined({self.max_k})"


def prolongation_tower(g: MatrixLieAlgebra, max_k: int = 3):
    """Dimensions of successive prolongations and a finite-type verdict.

    The tower stops at the first vanishing prolongation since every later one
    vanishes as well.
    """
    if max_k < 1:
        raise ValueError("max_k must be at least 1")
    dims = []
    for k in range(1, max_k + 1):
        d = first_prolongation(g).dim if k == 1 else prolongation_space(g, k).dim
        dims.append(d)
        if d == 0:
            return dims, FiniteType(k)
    return dims, Undetermined(max_k)


# --------------------------------------------------------------- Killing form

def killing_form(g: MatrixLieAlgebra) -> np.ndarray:
    """K[a, b] = trace(ad E_a ad E_b)."""
    c = g.c
    K = np.einsum("gad,dbg->ab", c, c)
    return 0.5 * (K + K.T)


def signature(K: np.ndarray, tol: float = 1e-9) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of a symmetric matrix."""
    w = np.linalg.eigvalsh(np.asarray(K, dtype=float))
    scale = max(1.0, float(np.max(np.abs(w)))) if len(w) else 1.0
    pos = int(np.sum(w > tol * scale))
    negc = int(np.sum(w < -tol * scale))
    return pos, negc, len(w) - pos - negc


def classify_3d(c, tol: float = 1e-9) -> str:
    """Name of a real 3-dimensional Lie algebra given by its structure constants.

    Returns one of ``so3``, ``sl2``, ``se2``, ``e11``, ``heisenberg``,
    ``abelian`` or ``solvable``.
    """
    c = np.asarray(c, dtype=float)
    if c.shape != (3, 3, 3):
        raise ValueError("expected structure constants of a 3-dimensional algebra")
    g = from_structure_constants(c)
    pos, negc, zero = signature(killing_form(g), tol)
    if zero == 0:
        return "so3" if pos == 0 else "sl2"
    derived = _rank(np.array([c[:, a, b] for a in range(3) for b in range(a + 1, 3)]), tol)
    if derived == 0:
        return "abelian"
    if derived == 1 and pos == 0 and negc == 0:
        return "heisenberg"
    if derived == 2 and zero == 2:
        return "se2" if negc == 1 else "e11"
    return "solvable"


# ---------------------------------------------------------- structure functions

def antisymmetrization_image(g: MatrixLieAlgebra) -> np.ndarray:
    """Orthonormal basis (columns) of A(hom(R^n, g)) in (i, a<b) coordinates."""
    M = antisymmetrization_matrix(g)
    if M.size == 0:
        return np.zeros((M.shape[0], 0))
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > ABS_TOL * max(1.0, s[0] if len(s) else 1.0)))
    return U[:, :r]


def reduce_structure_function(c_val, g: MatrixLieAlgebra) -> np.ndarray:
    """Project an alternating map onto the orthogonal complement of A(hom(R^n, g)).

    ``c_val`` is an array ``c[i, a, b]`` antisymmetric in (a, b); the result
    has the same layout.
    """
    c_val = np.asarray(c_val, dtype=float)
    n = g.n
    pairs = _alt_pairs(n)
    vec = np.array([c_val[i, a, b] for i in range(n) for a, b in pairs])
    Q = antisymmetrization_image(g)
    vec = vec - Q @ (Q.T @ vec)
    out = np.zeros((n, n, n))
    for i in range(n):
        for p, (a, b) in enumerate(pairs):
            out[i, a, b] = vec[i * len(pairs) + p]
            out[i, b, a] = -out[i, a, b]
    return out
