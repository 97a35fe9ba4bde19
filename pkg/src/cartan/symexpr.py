"""Small symbolic engine for scalar expressions over named real coordinates.

Expressions are immutable trees built through smart constructors that do a
light amount of canonicalisation (flattening, constant folding, unit and zero
elimination).  Heavier simplification is delegated to :func:`normalize`, which
brings the rational part of an expression into a canonical numerator /
denominator form with transcendental nodes treated as opaque atoms.

Grammar accepted by :func:`parse_expr`::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' ['-'] integer)?
    base   := number | ident | ident '(' expr ')' | '(' expr ')'

Unary minus binds looser than ``^``, so ``-x^2`` means ``-(x^2)``.

The printer emits strings in the same grammar, so ``parse_expr(str(e))``
rebuilds ``e`` node for node.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Expr", "Chart", "ParseError", "DomainError", "Verdict", "ZeroTest",
    "const", "var", "add", "mul", "div", "power", "neg", "func",
    "parse_expr", "differentiate", "normalize", "is_identically_zero",
    "substitute", "lambdify", "evaluate", "free_vars", "denominators",
    "to_sympy", "from_sympy", "ZERO", "ONE", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "log", "sqrt")

CONST, VAR, ADD, MUL, DIV, POW, NEG, FUNC = range(8)


class ParseError(ValueError):
    """Syntax error or undeclared identifier; ``pos`` is a 0-based offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}" + (f" in {text!r}" if text else ""))


class DomainError(ValueError):
    """Raised when a chart has no admissible sample points."""


class Expr:
    __slots__ = ("kind", "args", "value", "_hash")

    def __init__(self, kind: int, args: tuple = (), value=None):
        self.kind = kind
        self.args = args
        self.value = value
        self._hash = hash((kind, args, value))

    # -- structural identity
    def __eq__(self, other):
        if not isinstance(other, Expr):
            return NotImplemented
        if self is other:
            return True
        return (self._hash == other._hash and self.kind == other.kind
                and self.value == other.value and self.args == other.args)

    def __hash__(self):
        return self._hash

    # -- arithmetic sugar
    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    def __neg__(self):
        return neg(self)

    # -- queries
    @property
    def is_const(self) -> bool:
        return self.kind == CONST

    def is_zero(self) -> bool:
        return self.kind == CONST and self.value == 0

    def __float__(self):
        if self.kind != CONST:
            raise TypeError(f"{self} is not a constant")
        return float(self.value)

    def __str__(self):
        return _print(self)

    def __repr__(self):
        return f"Expr({_print(self)!r})"

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def subs(self, mapping: Mapping[str, "Expr | float"]) -> "Expr":
        return substitute(self, mapping)

    def size(self) -> int:
        return 1 + sum(a.size() for a in self.args)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool):
        return const(x)
    if isinstance(x, Fraction):
        return div(const(x.numerator), const(x.denominator))
    raise TypeError(f"cannot use {type(x).__name__} as an expression")


# ---------------------------------------------------------------- constructors

def const(v) -> Expr:
    if isinstance(v, (np.integer,)):
        v = int(v)
    elif isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("non-finite constant")
        if v == 0.0:
            v = 0.0  # drop the sign of -0.0
    return Expr(CONST, (), v)


ZERO = const(0)
ONE = const(1)


def var(name: str) -> Expr:
    return Expr(VAR, (), name)


def add(*terms) -> Expr:
    flat = []
    total = 0
    for t in terms:
        t = _coerce(t)
        if t.kind == MUL and len(t.args) == 2 and t.args[1].kind == ADD and t.args[0] == const(-1):
            t = neg(t.args[1])
        if t.kind == ADD:
            for s in t.args:
                if s.kind == CONST:
                    total += s.value
                else:
                    flat.append(s)
        elif t.kind == CONST:
            total += t.value
        else:
            flat.append(t)
    if total != 0:
        flat.append(const(total))
    if not flat:
        return const(total) if isinstance(total, float) else ZERO
    if len(flat) == 1:
        return flat[0]
    return Expr(ADD, tuple(flat))


def mul(*factors) -> Expr:
    coeff = 1
    flat = []
    stack = [_coerce(f) for f in factors]
    while stack:
        f = stack.pop(0)
        if f.kind == MUL:
            stack[0:0] = list(f.args)
        elif f.kind == NEG:
            coeff = -coeff
            stack.insert(0, f.args[0])
        elif f.kind == CONST:
            coeff = coeff * f.value
        else:
            flat.append(f)
    if coeff == 0:
        return ZERO
    if not flat:
        return const(coeff)
    if coeff == 1:
        return flat[0] if len(flat) == 1 else Expr(MUL, tuple(flat))
    if coeff == -1 and len(flat) == 1:
        # keep -1*(a + b) as a product so that folding order does not matter
        return Expr(MUL, (const(-1), flat[0])) if flat[0].kind == ADD else Expr(NEG, (flat[0],))
    return Expr(MUL, (const(coeff),) + tuple(flat))


def neg(a) -> Expr:
    a = _coerce(a)
    if a.kind == CONST:
        return const(-a.value)
    if a.kind == NEG:
        return a.args[0]
    if a.kind == MUL:
        return mul(const(-1), *a.args)
    if a.kind == ADD:
        return add(*[neg(t) for t in a.args])
    return Expr(NEG, (a,))


def div(a, b) -> Expr:
    a, b = _coerce(a), _coerce(b)
    if b.kind == CONST:
        if b.value == 0:
            raise ZeroDivisionError("division by the zero constant")
        if b.value == 1:
            return a
        if a.kind == CONST:
            if isinstance(a.value, int) and isinstance(b.value, int):
                if a.value % b.value == 0:
                    return const(a.value // b.value)
            elif isinstance(a.value, float) or isinstance(b.value, float):
                return const(a.value / b.value)
    if a.is_zero():
        return ZERO
    return Expr(DIV, (a, b))


def power(b, n: int) -> Expr:
    b = _coerce(b)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return b
    if b.kind == CONST and n > 0:
        return const(b.value ** n)
    if b.kind == CONST and b.value in (0, 1):
        if b.value == 0:
            raise ZeroDivisionError("zero to a negative power")
        return ONE
    if b.kind == POW:
        return power(b.args[0], b.value * n)
    return Expr(POW, (b,), n)


_EXACT = {
    ("sin", 0): 0, ("cos", 0): 1, ("sinh", 0): 0, ("cosh", 0): 1,
    ("exp", 0): 1, ("log", 1): 0, ("sqrt", 0): 0, ("sqrt", 1): 1,
}


def func(name: str, a) -> Expr:
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    a = _coerce(a)
    if a.kind == CONST and (name, a.value) in _EXACT:
        return const(_EXACT[(name, a.value)])
    return Expr(FUNC, (a,), name)


def sin(a): return func("sin", a)
def cos(a): return func("cos", a)
def exp(a): return func("exp", a)
def log(a): return func("log", a)
def sqrt(a): return func("sqrt", a)
def sinh(a): return func("sinh", a)
def cosh(a): return func("cosh", a)


# --------------------------------------------------------------------- printer

def _fmt_const(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _is_neg_const(e: Expr) -> bool:
    return e.kind == CONST and e.value < 0


def _print_base(e: Expr) -> str:
    """Print ``e`` so that it parses as a ``base`` without a leading sign."""
    if e.kind == VAR or e.kind == FUNC or (e.kind == CONST and not _is_neg_const(e)):
        return _print(e)
    return f"({_print(e)})"


def _print_factor(e: Expr) -> str:
    if e.kind == POW:
        return _print(e)
    return _print_base(e)


def _print_term(e: Expr) -> str:
    """Print at term precedence (products and quotients need no parens)."""
    if e.kind == ADD:
        return f"({_print(e)})"
    return _print(e)


def _print(e: Expr) -> str:
    k = e.kind
    if k == CONST:
        return _fmt_const(e.value)
    if k == VAR:
        return e.value
    if k == FUNC:
        return f"{e.value}({_print(e.args[0])})"
    if k == NEG:
        a = e.args[0]
        if a.kind in (VAR, FUNC):
            return "-" + _print(a)
        return f"-({_print(a)})"
    if k == POW:
        return f"{_print_base(e.args[0])}^{e.value}"
    if k == MUL:
        args = list(e.args)
        prefix = ""
        if args[0].kind == CONST:
            c = args[0].value
            # a bare minus before a sum would be distributed by the parser
            if c == -1 and args[1].kind != ADD:
                prefix = "-"
                args = args[1:]
        parts = []
        for i, a in enumerate(args):
            if i == 0 and a.kind == CONST:
                parts.append(_fmt_const(a.value))
            else:
                parts.append(_print_factor(a))
        return prefix + "*".join(parts)
    if k == DIV:
        num, den = e.args
        left = _print_term(num)
        return f"{left}/{_print_factor(den)}"
    if k == ADD:
        out = [_print(e.args[0])]
        for t in e.args[1:]:
            if t.kind == NEG:
                out.append(" - " + _print_term(t.args[0]))
            elif t.kind == CONST and t.value < 0:
                out.append(" - " + _fmt_const(-t.value))
            elif t.kind == MUL and t.args[0].kind == CONST and t.args[0].value < 0:
                out.append(" - " + _print_term(mul(const(-t.args[0].value), *t.args[1:])))
            else:
                out.append(" + " + _print(t))
        return "".join(out)
    raise AssertionError(k)


# ---------------------------------------------------------------------- parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, names: set[str] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        t = self.take()
        if t[1] != value:
            raise ParseError(f"expected {value!r}, found {t[1] or 'end of input'!r}", t[2], self.text)
        return t

    def parse(self) -> Expr:
        e = self.expr()
        t = self.peek()
        if t[0] != "end":
            raise ParseError(f"unexpected {t[1]!r}", t[2], self.text)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms) if len(terms) > 1 else terms[0]

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            f = self.factor()
            if op == "*":
                e = mul(e, f)
            else:
                if f.is_zero():
                    raise ParseError("division by literal zero", self.toks[self.i - 1][2], self.text)
                e = div(e, f)
        return e

    def factor(self) -> Expr:
        if self.peek()[1] == "-":
            self.take()
            return neg(self.factor())
        b = self.base()
        if self.peek()[1] == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            t = self.take()
            if t[0] != "num" or not t[1].isdigit():
                raise ParseError("exponent must be an integer", t[2], self.text)
            b = power(b, sign * int(t[1]))
        return b

    def base(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            if re.fullmatch(r"\d+", value):
                return const(int(value))
            return const(float(value))
        if kind == "ident":
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", pos, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(value, arg)
            if value in FUNCTIONS:
                raise ParseError(f"function {value!r} used without argument", pos, self.text)
            if self.names is not None and value not in self.names:
                raise ParseError(f"undeclared variable {value!r}", pos, self.text)
            return var(value)
        if value == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos, self.text)


def parse_expr(text: str, chart: "Chart | Sequence[str] | None" = None) -> Expr:
    """Parse ``text``; identifiers must be coordinates of ``chart`` when given."""
    if isinstance(chart, Chart):
        names = set(chart.coords)
    elif chart is None:
        names = None
    else:
        names = set(chart)
    return _Parser(str(text), names).parse()


# ------------------------------------------------------------- tree utilities

def free_vars(e: Expr) -> set[str]:
    if e.kind == VAR:
        return {e.value}
    out: set[str] = set()
    for a in e.args:
        out |= free_vars(a)
    return out


def _rebuild(e: Expr, args: list[Expr]) -> Expr:
    k = e.kind
    if k == ADD:
        return add(*args)
    if k == MUL:
        return mul(*args)
    if k == DIV:
        return div(*args)
    if k == POW:
        return power(args[0], e.value)
    if k == NEG:
        return neg(args[0])
    if k == FUNC:
        return func(e.value, args[0])
    return e


def substitute(e: Expr, mapping: Mapping[str, "Expr | float"]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    m = {k: _coerce(v) for k, v in mapping.items()}
    memo: dict[Expr, Expr] = {}

    def go(x: Expr) -> Expr:
        if x in memo:
            return memo[x]
        if x.kind == VAR:
            r = m.get(x.value, x)
        elif x.kind == CONST:
            r = x
        else:
            r = _rebuild(x, [go(a) for a in x.args])
        memo[x] = r
        return r

    return go(e)


def denominators(e: Expr) -> list[Expr]:
    """Non-constant subexpressions that must not vanish for ``e`` to be defined."""
    found: list[Expr] = []

    def go(x: Expr):
        if x.kind == DIV and not x.args[1].is_const:
            found.append(x.args[1])
        if x.kind == POW and x.value < 0 and not x.args[0].is_const:
            found.append(x.args[0])
        for a in x.args:
            go(a)

    go(e)
    out: list[Expr] = []
    for d in found:
        if d not in out:
            out.append(d)
    return out


# ------------------------------------------------------------ differentiation

def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``name``."""
    memo: dict[Expr, Expr] = {}

    def d(x: Expr) -> Expr:
        if x in memo:
            return memo[x]
        k = x.kind
        if k == CONST:
            r = ZERO
        elif k == VAR:
            r = ONE if x.value == name else ZERO
        elif name not in free_vars(x):
            r = ZERO
        elif k == ADD:
            r = add(*[d(a) for a in x.args])
        elif k == NEG:
            r = neg(d(x.args[0]))
        elif k == MUL:
            terms = []
            for i, a in enumerate(x.args):
                da = d(a)
                if not da.is_zero():
                    terms.append(mul(*x.args[:i], da, *x.args[i + 1:]))
            r = add(*terms)
        elif k == DIV:
            u, v = x.args
            du, dv = d(u), d(v)
            if dv.is_zero():
                r = div(du, v)
            else:
                r = div(add(mul(du, v), neg(mul(u, dv))), power(v, 2))
        elif k == POW:
            u, n = x.args[0], x.value
            r = mul(const(n), power(u, n - 1), d(u))
        elif k == FUNC:
            u = x.args[0]
            du = d(u)
            f = x.value
            if f == "sin":
                r = mul(func("cos", u), du)
            elif f == "cos":
                r = neg(mul(func("sin", u), du))
            elif f == "sinh":
                r = mul(func("cosh", u), du)
            elif f == "cosh":
                r = mul(func("sinh", u), du)
            elif f == "exp":
                r = mul(x, du)
            elif f == "log":
                r = div(du, u)
            elif f == "sqrt":
                r = div(du, mul(const(2), x))
            else:  # pragma: no cover
                raise AssertionError(f)
        else:  # pragma: no cover
            raise AssertionError(k)
        memo[x] = r
        return r

    return d(e)


# ----------------------------------------------------------------- evaluation

_NP = {"sin": "np.sin", "cos": "np.cos", "sinh": "np.sinh", "cosh": "np.cosh",
       "exp": "np.exp", "log": "np.log", "sqrt": "np.sqrt"}


def _code(e: Expr, names: Mapping[str, str]) -> str:
    k = e.kind
    if k == CONST:
        return f"({float(e.value)!r})"
    if k == VAR:
        return names[e.value]
    if k == ADD:
        return "(" + " + ".join(_code(a, names) for a in e.args) + ")"
    if k == MUL:
        return "(" + " * ".join(_code(a, names) for a in e.args) + ")"
    if k == DIV:
        return f"({_code(e.args[0], names)} / {_code(e.args[1], names)})"
    if k == POW:
        return f"({_code(e.args[0], names)} ** {float(e.value)!r})"
    if k == NEG:
        return f"(-{_code(e.args[0], names)})"
    if k == FUNC:
        return f"{_NP[e.value]}({_code(e.args[0], names)})"
    raise AssertionError(k)


def lambdify(exprs: Sequence[Expr], coords: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile expressions into a vectorised evaluator.

    The returned function maps an array of points with shape ``(N, d)`` (or a
    single point of shape ``(d,)``) to values of shape ``(N, len(exprs))``
    (respectively ``(len(exprs),)``).
    """
    exprs = list(exprs)
    names = {c: f"_x[:, {i}]" for i, c in enumerate(coords)}
    missing = set().union(*[free_vars(e) for e in exprs]) - set(coords) if exprs else set()
    if missing:
        raise ValueError(f"undeclared variables {sorted(missing)}")
    body = ", ".join(_code(e, names) for e in exprs)
    src = f"def _f(_x):\n    return ({body}{',' if len(exprs) == 1 else ''})\n"
    scope = {"np": np}
    exec(compile(src, "<symexpr>", "exec"), scope)
    raw = scope["_f"]
    m = len(exprs)

    def f(points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        if single:
            pts = pts[None, :]
        out = np.empty((pts.shape[0], m))
        if m:
            with np.errstate(all="ignore"):
                vals = raw(pts)
            for j, v in enumerate(vals):
                out[:, j] = v
        return out[0] if single else out

    return f


def evaluate(e: Expr, point: Mapping[str, float]) -> float:
    names = sorted(point)
    return float(lambdify([e], names)(np.array([point[n] for n in names]))[0])


# --------------------------------------------------------------------- charts

@dataclass(frozen=True)
class Chart:
    """Coordinate names, a rectangular box and hypersurfaces to stay away from."""

    coords: tuple[str, ...]
    box: tuple[tuple[float, float], ...]
    guards: tuple[Expr, ...] = ()
    guard_tol: float = 1e-3

    def __init__(self, coords: Sequence[str], box=None, guards: Iterable[Expr] = (), guard_tol: float = 1e-3):
        coords = tuple(coords)
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        if box is None:
            box = [(-1.0, 1.0)] * len(coords)
        elif isinstance(box, Mapping):
            box = [box.get(c, (-1.0, 1.0)) for c in coords]
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != len(coords):
            raise ValueError("box and coordinates differ in length")
        for (lo, hi), c in zip(box, coords):
            if not lo <= hi:
                raise ValueError(f"empty interval for {c}: [{lo}, {hi}]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "guards", tuple(guards))
        object.__setattr__(self, "guard_tol", float(guard_tol))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def with_guards(self, extra: Iterable[Expr]) -> "Chart":
        gs = list(self.guards)
        for g in extra:
            if g not in gs and free_vars(g) <= set(self.coords):
                gs.append(g)
        return Chart(self.coords, self.box, gs, self.guard_tol)

    def admissible(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        ok = np.ones(len(pts), dtype=bool)
        if self.guards:
            vals = lambdify(self.guards, self.coords)(pts)
            ok &= np.all(np.isfinite(vals) & (np.abs(vals) > self.guard_tol), axis=1)
        return ok

    def sample(self, n: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
        rng = np.random.default_rng(rng)
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        out = np.empty((0, self.dim))
        for _ in range(50):
            pts = lo + (hi - lo) * rng.random((max(2 * n, 16), self.dim))
            pts = pts[self.admissible(pts)]
            out = np.vstack([out, pts])
            if len(out) >= n:
                return out[:n]
        raise DomainError("chart has no admissible points after guards")

    def grid(self, per_axis: int = 5) -> np.ndarray:
        """Tensor grid of Chebyshev nodes in the box interior, guards removed."""
        k = np.arange(per_axis)
        nodes = np.cos((2 * k + 1) * np.pi / (2 * per_axis))[::-1]
        axes = [0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes for lo, hi in self.box]
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts = pts[self.admissible(pts)]
        if not len(pts):
            raise DomainError("grid has no admissible points after guards")
        return pts

    def center(self) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.box])


# ---------------------------------------------------------------- zero tests

class Verdict(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    UNKNOWN = "unknown"


@dataclass
class ZeroTest:
    verdict: Verdict
    witness: dict | None = None
    value: float = 0.0
    max_abs: float = 0.0
    samples: int = 0
    numerically_zero: bool = False

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.ZERO or self.numerically_zero

    def label(self) -> str:
        if self.verdict == Verdict.UNKNOWN and self.numerically_zero:
            return "numerically zero"
        return self.verdict.value


def is_identically_zero(e: Expr, chart: Chart, n: int = 200, abs_tol: float = 1e-10,
                        seed: int = 42, symbolic: bool | str = "auto",
                        max_symbolic_size: int = 4000) -> ZeroTest:
    """Three-valued zero test.

    ``ZERO`` when the rational normal form is the zero constant, ``NONZERO``
    with a witness point when a sample exceeds ``abs_tol`` in magnitude, and
    ``UNKNOWN`` otherwise (``numerically_zero`` is set when every sample was
    below the tolerance).
    """
    if e.is_zero():
        return ZeroTest(Verdict.ZERO)
    if e.is_const:
        return ZeroTest(Verdict.NONZERO, witness={}, value=float(e.value),
                        max_abs=abs(float(e.value)), samples=0)
    if symbolic is True or (symbolic == "auto" and e.size() <= max_symbolic_size):
        if normalize(e).is_zero():
            return ZeroTest(Verdict.ZERO)
    pts = chart.sample(n, seed)
    vals = lambdify([e], chart.coords)(pts)[:, 0]
    finite = np.isfinite(vals)
    if not finite.any():
        return ZeroTest(Verdict.UNKNOWN, samples=0)
    absv = np.where(finite, np.abs(vals), -1.0)
    j = int(np.argmax(absv))
    if absv[j] > abs_tol:
        return ZeroTest(Verdict.NONZERO, witness=dict(zip(chart.coords, map(float, pts[j]))),
                        value=float(vals[j]), max_abs=float(absv[j]), samples=int(finite.sum()))
    return ZeroTest(Verdict.UNKNOWN, max_abs=float(absv[j]), samples=int(finite.sum()),
                    numerically_zero=True)


# ------------------------------------------------------------ sympy bridge

@lru_cache(maxsize=None)
def _sym(name: str):
    import sympy
    return sympy.Symbol(name, real=True)


def to_sympy(e: Expr):
    import sympy
    memo: dict[Expr, object] = {}

    def go(x: Expr):
        if x in memo:
            return memo[x]
        k = x.kind
        if k == CONST:
            v = x.value
            r = sympy.Integer(v) if isinstance(v, int) else sympy.Float(v)
        elif k == VAR:
            r = _sym(x.value)
        elif k == ADD:
            r = sympy.Add(*[go(a) for a in x.args])
        elif k == MUL:
            r = sympy.Mul(*[go(a) for a in x.args])
        elif k == DIV:
            r = go(x.args[0]) / go(x.args[1])
        elif k == POW:
            r = go(x.args[0]) ** x.value
        elif k == NEG:
            r = -go(x.args[0])
        else:
            r = getattr(sympy, x.value)(go(x.args[0]))
        memo[x] = r
        return r

    return go(e)


_RATIOS = {"tan": ("sin", "cos"), "cot": ("cos", "sin"), "sec": (None, "cos"), "csc": (None, "sin"),
           "tanh": ("sinh", "cosh"), "coth": ("cosh", "sinh"), "sech": (None, "cosh"),
           "csch": (None, "sinh")}


def from_sympy(s) -> Expr:
    """Convert a sympy expression built from the supported node types."""
    import sympy

    if s.is_Integer:
        return const(int(s))
    if s.is_Rational:
        return div(const(int(s.p)), const(int(s.q)))
    if s.is_Float:
        return const(float(s))
    if s.is_Symbol:
        return var(s.name)
    if s.is_Add:
        terms = sorted(s.args, key=sympy.default_sort_key)
        return add(*[from_sympy(a) for a in terms])
    if s.is_Mul:
        num, den = [], []
        for a in s.args:
            if a.is_Pow and a.exp.is_Rational and a.exp < 0:
                den.append(from_sympy(a.base ** (-a.exp)))
            elif a.is_Rational and not a.is_Integer:
                if a.p != 1:
                    num.append(const(int(a.p)))
                den.append(const(int(a.q)))
            else:
                num.append(from_sympy(a))
        top = mul(*num) if num else ONE
        if not den:
            return top
        return div(top, mul(*den))
    if s.is_Pow:
        b, ex = s.args
        if ex.is_Integer:
            return power(from_sympy(b), int(ex))
        if ex.is_Rational and ex.q == 2:
            root = func("sqrt", from_sympy(b))
            return power(root, int(ex.p))
        if b == sympy.E:
            return func("exp", from_sympy(ex))
        raise ValueError(f"unsupported power {s}")
    if isinstance(s, sympy.exp):
        return func("exp", from_sympy(s.args[0]))
    for name in ("sin", "cos", "sinh", "cosh", "log"):
        if isinstance(s, getattr(sympy, name)):
            return func(name, from_sympy(s.args[0]))
    for name, (top, bottom) in _RATIOS.items():
        if isinstance(s, getattr(sympy, name)):
            u = from_sympy(s.args[0])
            return div(func(top, u) if top else ONE, func(bottom, u))
    if s is sympy.S.Exp1:
        return func("exp", ONE)
    raise ValueError(f"unsupported sympy node {type(s).__name__}: {s}")


def normalize(e: Expr, guards: list | None = None, trig_ops: int = 60) -> Expr:
    """Canonical multivariate-rational form; transcendental nodes are atoms.

    When ``guards`` is a list, the non-constant denominators of the input are
    appended to it (a cancelled factor such as ``x - 1`` still excludes the
    hypersurface where it vanishes).  Small expressions containing
    trigonometric or hyperbolic nodes are additionally passed through
    ``trigsimp`` when their operation count is at most ``trig_ops``.
    """
    import sympy

    if guards is not None:
        for d in denominators(e):
            if d not in guards:
                guards.append(d)
    if e.kind in (CONST, VAR):
        return e
    s = sympy.cancel(to_sympy(e))
    if s.has(sympy.sin, sympy.cos, sympy.sinh, sympy.cosh) and sympy.count_ops(s) <= trig_ops:
        s = sympy.cancel(sympy.trigsimp(s))
    return from_sympy(s)
