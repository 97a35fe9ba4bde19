"""TOML job configuration: loading, validation and construction of model objects.

A configuration file holds one or more blocks; which ones are required
depends on the job.  Expressions are strings in the grammar of
:mod:`cartan.symexpr` and indices in table keys are 1-based, e.g.
``C."3.1.2" = "k"`` sets C^3_12.

Recognized blocks: ``[algebroid]``, ``[coframe]``, ``[realization]``,
``[mcform]``, ``[gstructure]`` (with optional ``[gstructure.candidate]``),
``[prolong]``, ``[realize]``, ``[orbit]`` and ``[isotropy]``.
"""

from __future__ import annotations

import os
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import symexpr as sx
from .algebroid import CONVENTIONS, FlatAlgebroid
from .coframe import Coframe
from .liealg import make_algebra, preset
from .symexpr import Chart, ParseError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "JobConfig", "JOBS", "load_config", "resolve_config_path", "default_tol"]

JOBS = ("check-algebroid", "prolong", "coframe", "mc-check", "gstructure", "verify-realization",
        "realize", "orbit", "isotropy")

REQUIRED = {
    "check-algebroid": ("algebroid",),
    "prolong": ("prolong",),
    "coframe": ("coframe",),
    "mc-check": ("algebroid", "mcform"),
    "gstructure": ("gstructure",),
    "verify-realization": ("algebroid", "coframe", "realization"),
    "realize": (),
    "orbit": ("algebroid", "orbit"),
    "isotropy": ("algebroid",),
}

KNOWN_BLOCKS = {"algebroid", "coframe", "realization", "mcform", "gstructure", "prolong", "realize",
                "orbit", "isotropy"}
TOP_KEYS = {"job", "seed", "tol", "title"}


class ConfigError(ValueError):
    """Schema violation, TOML syntax error or expression error in a config file."""


def default_tol() -> float:
    v = os.environ.get("CARTAN_TOL")
    if v is None:
        return 1e-10
    try:
        t = float(v)
    except ValueError:
        raise ConfigError(f"CARTAN_TOL={v!r} is not a number") from None
    if not t > 0:
        raise ConfigError("CARTAN_TOL must be positive")
    return t


@dataclass
class JobConfig:
    kind: str | None
    path: str
    seed: int = 42
    tol: float = 1e-10
    title: str = ""
    raw: dict = field(default_factory=dict)
    algebroid: FlatAlgebroid | None = None
    algebroid_opts: dict = field(default_factory=dict)
    coframe: Coframe | None = None
    coframe_opts: dict = field(default_factory=dict)
    realization_h: list | None = None
    realization_opts: dict = field(default_factory=dict)
    mcform: object = None
    connection: object = None
    mc_opts: dict = field(default_factory=dict)
    gdata: object = None
    g_opts: dict = field(default_factory=dict)
    g_candidate: object = None
    prolong: object = None
    prolong_opts: dict = field(default_factory=dict)
    realize_opts: dict = field(default_factory=dict)
    orbit_opts: dict = field(default_factory=dict)
    isotropy_points: list | None = None
    warnings: list = field(default_factory=list)


def resolve_config_path(name: str) -> Path:
    """A path on disk, or the stem of a bundled config such as ``constant_curvature``."""
    p = Path(name)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".toml") else p.name
    res = resources.files("cartan") / "data" / f"{stem}.toml"
    if res.is_file():
        with resources.as_file(res) as f:
            return Path(f)
    raise ConfigError(f"config file {name!r} not found")


# ------------------------------------------------------------------ helpers

def _index(key: str, arity: int, bounds, block: str, table: str) -> tuple[int, ...]:
    parts = str(key).split(".")
    if len(parts) != arity:
        raise ConfigError(f"[{block}] {table}: key {key!r} needs {arity} dot-separated indices")
    try:
        idx = tuple(int(p) - 1 for p in parts)
    except ValueError:
        raise ConfigError(f"[{block}] {table}: key {key!r} is not made of integers") from None
    for v, hi in zip(idx, bounds):
        if not 0 <= v < hi:
            raise ConfigError(f"[{block}] {table}: index in {key!r} out of range 1..{hi}")
    return idx


def _expr(v, names, block: str, where: str) -> sx.Expr:
    if isinstance(v, bool):
        raise ConfigError(f"[{block}] {where}: boolean is not an expression")
    if isinstance(v, (int, float)):
        return sx.const(v)
    if not isinstance(v, str):
        raise ConfigError(f"[{block}] {where}: expected an expression string, got {type(v).__name__}")
    try:
        return sx.parse_expr(v, names)
    except ParseError as exc:
        raise ConfigError(f"[{block}] {where}: {exc}") from None


def _chart(blk: dict, block: str, key_coords="coords", key_box="box", guards_key="guards",
           default_box=(-1.0, 1.0), cfg: JobConfig | None = None) -> Chart:
    coords = blk.get(key_coords, [])
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise ConfigError(f"[{block}] {key_coords} must be a list of names")
    for c in coords:
        if not c.isidentifier() or c in sx.FUNCTIONS:
            raise ConfigError(f"[{block}] invalid coordinate name {c!r}")
    box = blk.get(key_box)
    if box is None:
        pairs = [default_box] * len(coords)
    elif isinstance(box, dict):
        unknown = set(box) - set(coords)
        if unknown:
            raise ConfigError(f"[{block}] box names undeclared coordinates {sorted(unknown)}")
        pairs = [tuple(box.get(c, default_box)) for c in coords]
    elif isinstance(box, (int, float)):
        pairs = [(-float(box), float(box))] * len(coords)
    else:
        pairs = [tuple(b) for b in box]
    if len(pairs) != len(coords) or any(len(p) != 2 for p in pairs):
        raise ConfigError(f"[{block}] box must give one [lo, hi] pair per coordinate")
    try:
        chart = Chart(coords, pairs)
    except ValueError as exc:
        raise ConfigError(f"[{block}] {exc}") from None
    guards = [_expr(g, coords, block, guards_key) for g in blk.get(guards_key, [])]
    return chart.with_guards(guards)


def _infer_guards(chart: Chart, exprs, block: str, cfg: JobConfig) -> Chart:
    extra = []
    for e in exprs:
        for d in sx.denominators(e):
            if d not in chart.guards and d not in extra:
                extra.append(d)
    if extra:
        msg = f"[{block}] added guards for denominators: {', '.join(map(str, extra))}"
        cfg.warnings.append(msg)
        warnings.warn(msg, stacklevel=3)
        chart = chart.with_guards(extra)
    return chart


def _check_keys(blk: dict, allowed: set, block: str):
    unknown = set(blk) - allowed
    if unknown:
        raise ConfigError(f"[{block}] unknown keys {sorted(unknown)}")


# --------------------------------------------------------------- block parsers

def _parse_algebroid(blk: dict, cfg: JobConfig) -> FlatAlgebroid:
    _check_keys(blk, {"coords", "box", "guards", "fiber_rank", "C", "F", "convention", "name", "points"},
                "algebroid")
    chart = _chart(blk, "algebroid")
    n = blk.get("fiber_rank")
    if not isinstance(n, int) or n < 1:
        raise ConfigError("[algebroid] fiber_rank must be a positive integer")
    d = chart.dim
    names = chart.coords
    C = [[[sx.ZERO] * n for _ in range(n)] for _ in range(n)]
    given = set()
    for key, v in (blk.get("C") or {}).items():
        k, i, j = _index(key, 3, (n, n, n), "algebroid", "C")
        C[k][i][j] = _expr(v, names, "algebroid", f'C."{key}"')
        given.add((k, i, j))
    for k, i, j in list(given):
        if (k, j, i) not in given:
            C[k][j][i] = sx.neg(C[k][i][j])
    F = [[sx.ZERO] * n for _ in range(d)]
    for key, v in (blk.get("F") or {}).items():
        a, i = _index(key, 2, (d, n), "algebroid", "F")
        F[a][i] = _expr(v, names, "algebroid", f'F."{key}"')
    conv = blk.get("convention", "realization")
    if conv not in CONVENTIONS:
        raise ConfigError(f"[algebroid] convention must be one of {sorted(CONVENTIONS)}")
    cfg.algebroid_opts = {"convention": conv, "points": blk.get("points")}
    all_exprs = [e for plane in C for row in plane for e in row] + [e for row in F for e in row]
    chart = _infer_guards(chart, all_exprs, "algebroid", cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        A = FlatAlgebroid(chart, C, F, name=blk.get("name", ""))
    for w in caught:
        cfg.warnings.append(f"[algebroid] {w.message}")
    return A


def _parse_coframe(blk: dict, cfg: JobConfig) -> Coframe:
    _check_keys(blk, {"coords", "box", "guards", "theta", "order", "grid", "inverse", "h_names", "generators",
                      "h_box"}, "coframe")
    chart = _chart(blk, "coframe")
    n = chart.dim
    if n == 0:
        raise ConfigError("[coframe] coords must not be empty")
    a = [[sx.ZERO] * n for _ in range(n)]
    for key, v in (blk.get("theta") or {}).items():
        i, j = _index(key, 2, (n, n), "coframe", "theta")
        a[i][j] = _expr(v, chart.coords, "coframe", f'theta."{key}"')
    chart = _infer_guards(chart, [e for row in a for e in row], "coframe", cfg)
    cfg.coframe_opts = {k: blk[k] for k in ("order", "grid", "inverse", "h_names", "generators", "h_box")
                        if k in blk}
    try:
        return Coframe(chart, a)
    except ValueError as exc:
        raise ConfigError(f"[coframe] {exc}") from None


def _parse_mcform(blk: dict, cfg: JobConfig):
    from .mcform import AValuedOneForm, Connection

    _check_keys(blk, {"coords", "box", "guards", "h", "eta", "gamma", "connections"}, "mcform")
    A = cfg.algebroid
    chart = _chart(blk, "mcform")
    m, n, d = chart.dim, A.n, A.d
    hblk = blk.get("h") or {}
    h = [sx.ZERO] * d
    for key, v in hblk.items():
        (a,) = _index(key, 1, (d,), "mcform", "h")
        h[a] = _expr(v, chart.coords, "mcform", f'h."{key}"')
    eta = [[sx.ZERO] * m for _ in range(n)]
    for key, v in (blk.get("eta") or {}).items():
        i, mu = _index(key, 2, (n, m), "mcform", "eta")
        eta[i][mu] = _expr(v, chart.coords, "mcform", f'eta."{key}"')
    chart = _infer_guards(chart, h + [e for row in eta for e in row], "mcform", cfg)
    nabla = None
    if blk.get("gamma"):
        G = [[[sx.ZERO] * n for _ in range(d)] for _ in range(n)]
        for key, v in blk["gamma"].items():
            k, a, j = _index(key, 3, (n, d, n), "mcform", "gamma")
            G[k][a][j] = _expr(v, A.chart.coords, "mcform", f'gamma."{key}"')
        nabla = Connection(A, G)
    cfg.mc_opts = {"connections": int(blk.get("connections", 0))}
    return AValuedOneForm(chart, h, eta), nabla


def _parse_gstructure(blk: dict, cfg: JobConfig):
    from .catalog import bochner_kahler_data, constant_curvature_candidate, constant_curvature_data
    from .gstruct import GRealizationCandidate, GRealizationData, S_ORDERS

    allowed = {"preset", "group", "coords", "box", "guards", "c", "b", "S", "Theta", "Phi", "bracket_sign",
               "s_order", "candidate", "candidate_k", "samples"}
    _check_keys(blk, allowed, "gstructure")
    sign = blk.get("bracket_sign", "auto")
    if sign not in ("auto", 1, -1):
        raise ConfigError("[gstructure] bracket_sign must be 1, -1 or \"auto\"")
    order = blk.get("s_order", "auto")
    if order != "auto" and order not in S_ORDERS:
        raise ConfigError(f"[gstructure] s_order must be one of {sorted(S_ORDERS)} or \"auto\"")
    cfg.g_opts = {"bracket_sign": sign, "s_order": order, "preset": blk.get("preset"),
                  "samples": int(blk.get("samples", 100))}
    pre = blk.get("preset")
    if pre is not None:
        p = str(pre).replace(" ", "")
        if p == "constant-curvature":
            D = constant_curvature_data(tuple(blk.get("box", {}).get("k", (-2.0, 2.0)))
                                        if isinstance(blk.get("box"), dict) else (-2.0, 2.0))
            if "candidate_k" in blk:
                cfg.g_candidate = constant_curvature_candidate(int(blk["candidate_k"]))
            return D
        if p.startswith("bochner-kahler(") and p.endswith(")"):
            try:
                n = int(p[len("bochner-kahler("):-1])
            except ValueError:
                raise ConfigError(f"[gstructure] bad preset {pre!r}") from None
            if n < 1:
                raise ConfigError("[gstructure] bochner-kahler needs n >= 1")
            return bochner_kahler_data(n)
        raise ConfigError(f"[gstructure] unknown preset {pre!r}")
    group = blk.get("group")
    if group is None:
        raise ConfigError("[gstructure] needs preset or group")
    try:
        if isinstance(group, str):
            g = preset(group)
        else:
            g = make_algebra(group)
    except ValueError as exc:
        raise ConfigError(f"[gstructure] group: {exc}") from None
    chart = _chart(blk, "gstructure")
    n, m, d, names = g.n, g.dim, chart.dim, chart.coords

    def table(name, shape):
        out = np.zeros(shape, dtype=object)
        out[...] = sx.ZERO
        for key, v in (blk.get(name) or {}).items():
            idx = _index(key, len(shape), shape, "gstructure", name)
            out[idx] = _expr(v, names, "gstructure", f'{name}."{key}"')
        return out.tolist()

    try:
        D = GRealizationData(g, chart, c=table("c", (n, n, n)), b=table("b", (m, n, n)),
                             S=table("S", (m, n, m)), Theta=table("Theta", (d, n)), Phi=table("Phi", (d, m)))
    except ValueError as exc:
        raise ConfigError(f"[gstructure] {exc}") from None
    cand = blk.get("candidate")
    if cand:
        cchart = _chart(cand, "gstructure.candidate")
        M = cchart.dim
        if M != n + m:
            raise ConfigError(f"[gstructure.candidate] needs {n + m} coordinates")
        om = [[sx.ZERO] * M for _ in range(n)]
        ph = [[sx.ZERO] * M for _ in range(m)]
        for key, v in (cand.get("omega") or {}).items():
            i, mu = _index(key, 2, (n, M), "gstructure.candidate", "omega")
            om[i][mu] = _expr(v, cchart.coords, "gstructure.candidate", f'omega."{key}"')
        for key, v in (cand.get("phi") or {}).items():
            i, mu = _index(key, 2, (m, M), "gstructure.candidate", "phi")
            ph[i][mu] = _expr(v, cchart.coords, "gstructure.candidate", f'phi."{key}"')
        h = [_expr(v, cchart.coords, "gstructure.candidate", "h") for v in cand.get("h", [])]
        if len(h) != d:
            raise ConfigError(f"[gstructure.candidate] h needs {d} entries")
        cfg.g_candidate = GRealizationCandidate(cchart, om, ph, h)
    return D


def _parse_prolong(blk: dict, cfg: JobConfig):
    _check_keys(blk, {"algebra", "basis", "max_k"}, "prolong")
    try:
        if "algebra" in blk:
            g = preset(str(blk["algebra"]))
        elif "basis" in blk:
            g = make_algebra(blk["basis"])
        else:
            raise ConfigError("[prolong] needs algebra or basis")
    except ValueError as exc:
        raise ConfigError(f"[prolong] {exc}") from None
    max_k = blk.get("max_k", 3)
    if not isinstance(max_k, int) or max_k < 1:
        raise ConfigError("[prolong] max_k must be a positive integer")
    cfg.prolong_opts = {"max_k": max_k}
    return g


# ---------------------------------------------------------------------- load

def load_config(path, kind: str | None = None) -> JobConfig:
    """Parse and validate a TOML job file; ``kind`` selects the job when the file does not."""
    p = resolve_config_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    if not raw:
        raise ConfigError(f"{p}: empty configuration")
    unknown = set(raw) - KNOWN_BLOCKS - TOP_KEYS
    if unknown:
        raise ConfigError(f"{p}: unknown top-level keys {sorted(unknown)}")
    file_kind = raw.get("job")
    if file_kind is not None and file_kind not in JOBS:
        raise ConfigError(f"{p}: unknown job {file_kind!r}")
    kind = kind or file_kind
    seed = raw.get("seed", 42)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    tol = raw.get("tol", default_tol())
    if "CARTAN_TOL" in os.environ:
        tol = default_tol()
    cfg = JobConfig(kind, str(p), seed=seed, tol=float(tol), title=str(raw.get("title", "")), raw=raw)
    if kind is not None:
        missing = [b for b in REQUIRED[kind] if b not in raw]
        if missing:
            raise ConfigError(f"{p}: job {kind!r} needs blocks {missing}")
    if not (set(raw) & KNOWN_BLOCKS) and kind != "realize":
        raise ConfigError(f"{p}: no job block present")
    try:
        if "algebroid" in raw:
            cfg.algebroid = _parse_algebroid(raw["algebroid"], cfg)
        if "coframe" in raw:
            cfg.coframe = _parse_coframe(raw["coframe"], cfg)
        if "realization" in raw:
            blk = raw["realization"]
            _check_keys(blk, {"h", "samples", "tol"}, "realization")
            if cfg.coframe is None:
                raise ConfigError("[realization] requires a [coframe] block")
            cfg.realization_h = [_expr(v, cfg.coframe.chart.coords, "realization", "h") for v in blk.get("h", [])]
            cfg.realization_opts = {k: blk[k] for k in ("samples", "tol") if k in blk}
        if "mcform" in raw:
            if cfg.algebroid is None:
                raise ConfigError("[mcform] requires an [algebroid] block")
            cfg.mcform, cfg.connection = _parse_mcform(raw["mcform"], cfg)
        if "gstructure" in raw:
            cfg.gdata = _parse_gstructure(raw["gstructure"], cfg)
        if "prolong" in raw:
            cfg.prolong = _parse_prolong(raw["prolong"], cfg)
        if "realize" in raw:
            blk = raw["realize"]
            _check_keys(blk, {"fiber", "box", "grid", "side", "structure_constants", "algebra"}, "realize")
            cfg.realize_opts = dict(blk)
        if "orbit" in raw:
            blk = raw["orbit"]
            _check_keys(blk, {"from", "to", "budget", "step", "tol"}, "orbit")
            for key in ("from", "to"):
                if key not in blk or len(blk[key]) != cfg.algebroid.d:
                    raise ConfigError(f"[orbit] {key} must list {cfg.algebroid.d} coordinates")
            cfg.orbit_opts = dict(blk)
        if "isotropy" in raw:
            blk = raw["isotropy"]
            _check_keys(blk, {"points"}, "isotropy")
            cfg.isotropy_points = blk.get("points")
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return cfg
