import numpy as np
import pytest
from hypothesis import settings, strategies as st

from cartan import symexpr as sx

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")

NAMES = ("x", "y", "z")


def _safe_div(a, b):
    return sx.div(a, sx.ONE if b.is_zero() else b)


def _safe_pow(b, n):
    return sx.power(sx.ONE if (b.is_zero() and n < 0) else b, n)


def _safe_func(name, a):
    if name in ("log", "sqrt") and a.is_const and float(a) <= 0:
        a = sx.add(sx.const(1), sx.power(a, 2))
    return sx.func(name, a)


def expressions(names=NAMES, smooth=False, max_leaves=12):
    """Random expression trees built from the public constructors.

    With ``smooth`` every subexpression is analytic on the whole real space,
    so derivatives can be compared against finite differences anywhere.
    """
    ints = st.integers(-5, 5).map(sx.const)
    floats = st.integers(-300, 300).map(lambda k: sx.const(k / 100))
    leaves = st.one_of(ints, floats, st.sampled_from(names).map(sx.var))

    def extend(children):
        pair = st.tuples(children, children)
        fns = ("sin", "cos", "exp") if smooth else sx.FUNCTIONS
        steps = [
            pair.map(lambda t: sx.add(*t)),
            pair.map(lambda t: sx.mul(*t)),
            children.map(sx.neg),
            st.tuples(children, st.integers(0, 3) if smooth else st.integers(-3, 3)).map(
                lambda t: _safe_pow(*t)),
            st.tuples(st.sampled_from(fns), children).map(lambda t: _safe_func(*t)),
        ]
        if smooth:
            # denominators bounded away from zero
            steps.append(pair.map(lambda t: sx.div(t[0], sx.add(sx.const(2), sx.power(t[1], 2)))))
        else:
            steps.append(pair.map(lambda t: _safe_div(*t)))
        return st.one_of(*steps)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def fd_derivative(f, p, mu, step=1e-3):
    """Richardson-extrapolated central difference of a scalar function."""
    def central(h):
        e = np.zeros_like(p)
        e[mu] = h
        return (f(p + e) - f(p - e)) / (2 * h)
    return (4 * central(step / 2) - central(step)) / 3


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_expression(rng, depth=4, names=NAMES, smooth=True):
    """Seeded random expression tree, used for fixed corpora."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.45:
            return sx.var(str(rng.choice(names)))
        if r < 0.75:
            return sx.const(int(rng.integers(-5, 6)))
        return sx.const(round(float(rng.uniform(-3, 3)), 2))
    kind = int(rng.integers(0, 6))
    a = random_expression(rng, depth - 1, names, smooth)
    if kind == 0:
        return sx.add(a, random_expression(rng, depth - 1, names, smooth))
    if kind == 1:
        return sx.mul(a, random_expression(rng, depth - 1, names, smooth))
    if kind == 2:
        b = random_expression(rng, depth - 1, names, smooth)
        return _safe_div(a, sx.add(sx.const(2), sx.power(b, 2)) if smooth else b)
    if kind == 3:
        return _safe_pow(a, int(rng.integers(0, 4)) if smooth else int(rng.integers(-3, 4)))
    if kind == 4:
        return sx.neg(a)
    fns = ("sin", "cos", "exp") if smooth else sx.FUNCTIONS
    return _safe_func(str(rng.choice(fns)), a)


# ------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        outcome, dur = _ACCEPTANCE[name]
        num = name.split("_")[2]
        label = " ".join(name.split("_")[3:])
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num}: {status}  {label} ({dur:.2f} s)")
