"""Command line front end: ``cartan <job> --config FILE [--seed N] [--json OUT]``.

Exit codes: 0 pass, 1 fail with a witness, 2 unknown or undetermined,
3 configuration error.  JSON reports are written with sorted keys and carry
the seed, tolerances and any warnings raised while loading the config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import warnings

import numpy as np

from . import symexpr as sx
from .config import JOBS, ConfigError, JobConfig, load_config

__all__ = ["main", "run_job", "emit_report", "EXIT_CODES"]

EXIT_CODES = {"pass": 0, "fail": 1, "unknown": 2, "config-error": 3}
log = logging.getLogger("cartan")


def _worst(*statuses: str) -> str:
    if "fail" in statuses:
        return "fail"
    if "unknown" in statuses:
        return "unknown"
    return "pass"


def _clean(obj):
    """Make a report JSON-safe: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, sx.Expr):
        return str(obj)
    return obj


# ------------------------------------------------------------------- jobs

def _isotropy_table(A, points) -> list[dict]:
    from .algebroid import isotropy_at, orbit_rank_at
    from .catalog import GEOMETRY_NAMES
    from .liealg import classify_3d, from_structure_constants, killing_form, signature

    rows = []
    for x in points:
        iso = isotropy_at(A, x)
        row = {"point": dict(zip(A.chart.coords, map(float, x))), "isotropy_dim": int(iso.dim),
               "orbit_rank": int(orbit_rank_at(A, x)), "closure_residual": float(iso.closure_residual)}
        c = np.asarray(iso.structure_constants)
        if c.size:
            K = killing_form(from_structure_constants(c)) if np.any(c) else np.zeros((c.shape[0],) * 2)
            row["killing_signature"] = list(signature(K))
            if c.shape[0] == 3:
                name = classify_3d(c)
                row["algebra"] = name
                row["geometry"] = GEOMETRY_NAMES.get(name, "")
        rows.append(row)
    return rows


def _default_points(A) -> list[list[float]]:
    if A.d == 0:
        return [[]]
    lo = [b[0] for b in A.chart.box]
    hi = [b[1] for b in A.chart.box]
    mid = np.asarray(A.chart.center()).tolist()
    return [lo, mid, hi]


def _job_check_algebroid(cfg: JobConfig, args) -> dict:
    from .algebroid import certify
    from .coframe import verify_classifying_data

    A = cfg.algebroid
    conv = cfg.algebroid_opts["convention"]
    cert = certify(A, conv, mode=args.mode, n_samples=args.samples, abs_tol=cfg.tol, seed=cfg.seed)
    points = cfg.isotropy_points or cfg.algebroid_opts.get("points") or _default_points(A)
    rep = {"certificate": cert.as_dict(), "isotropy": _isotropy_table(A, points), "status": cert.status}
    if cfg.coframe is not None and cfg.realization_h is not None:
        chk = verify_classifying_data(cfg.coframe, cfg.realization_h, A, n_samples=args.samples,
                                      abs_tol=cfg.tol, seed=cfg.seed)
        d = chk.as_dict()
        rep["realization"] = d
        rep["status"] = _worst(cert.status, d["status"])
    return rep


def _job_isotropy(cfg: JobConfig, args) -> dict:
    A = cfg.algebroid
    points = cfg.isotropy_points or cfg.algebroid_opts.get("points") or _default_points(A)
    rows = _isotropy_table(A, points)
    bad = [r for r in rows if r["closure_residual"] > 1e-8]
    return {"isotropy": rows, "status": "unknown" if bad else "pass"}


def _job_prolong(cfg: JobConfig, args) -> dict:
    from .liealg import FiniteType, prolongation_tower

    g = cfg.prolong
    max_k = args.order or cfg.prolong_opts["max_k"]
    dims, verdict = prolongation_tower(g, max_k)
    return {"algebra": g.name, "dim": g.dim, "n": g.n, "tower": dims, "verdict": str(verdict),
            "status": "pass" if isinstance(verdict, FiniteType) else "unknown"}


def _job_coframe(cfg: JobConfig, args) -> dict:
    from .coframe import (ClosedFormUnavailable, ExpressionNotFunctionOfInvariants, NotFullyRegular,
                          invariant_tower, structure_functions)

    theta = cfg.coframe
    opts = cfg.coframe_opts
    s_max = args.order if args.order is not None else opts.get("order", 2)
    per_axis = args.grid or opts.get("grid", 5)
    grid = theta.chart.grid(per_axis)
    C = structure_functions(theta)
    n = theta.n
    rep = {"structure_functions": {f"C{k + 1}_{i + 1}{j + 1}": str(C[k][i][j])
                                   for k in range(n) for i in range(n) for j in range(i + 1, n)
                                   if not C[k][i][j].is_zero()}}
    tower = invariant_tower(theta, s_max=s_max, grid=grid, generators=opts.get("generators"))
    rep["tower"] = tower.as_dict()
    try:
        from .coframe import derive_classifying_algebroid

        box = None
        if "h_box" in opts:
            box = [tuple(b) for b in opts["h_box"]]
        A, cert = derive_classifying_algebroid(theta, tower, inverse=opts.get("inverse"),
                                               h_names=opts.get("h_names"), box=box)
    except NotFullyRegular:
        rep["status"] = "unknown"
        rep["reason"] = "coframe is not fully regular on the sampled grid"
        return rep
    except ExpressionNotFunctionOfInvariants as exc:
        rep["status"] = "fail"
        rep["reason"] = str(exc)
        rep["witness"] = {"label": exc.label, "p": list(map(float, exc.p)), "q": list(map(float, exc.q)),
                          "values": [float(exc.fp), float(exc.fq)]}
        return rep
    except ClosedFormUnavailable as exc:
        rep["status"] = "unknown"
        rep["reason"] = str(exc)
        return rep
    rep["algebroid"] = _algebroid_dict(A)
    rep["certificate"] = cert.as_dict()
    status = cert.status
    if not tower.stabilized:
        status = _worst(status, "unknown")
        rep["reason"] = "invariant ranks did not stabilize within the requested order"
    rep["status"] = status
    return rep


def _algebroid_dict(A) -> dict:
    n, d = A.n, A.d
    return {"coords": list(A.chart.coords), "box": [list(b) for b in A.chart.box], "fiber_rank": n,
            "C": {f"{k + 1}.{i + 1}.{j + 1}": str(A.C[k][i][j])
                  for k in range(n) for i in range(n) for j in range(i + 1, n) if not A.C[k][i][j].is_zero()},
            "F": {f"{a + 1}.{i + 1}": str(A.F[a][i]) for a in range(d) for i in range(n) if not A.F[a][i].is_zero()}}


def _job_mc_check(cfg: JobConfig, args) -> dict:
    from .mcform import mc_check, random_connection

    A, eta = cfg.algebroid, cfg.mcform
    conv = cfg.algebroid_opts["convention"]
    rep = mc_check(eta, A, cfg.connection, conv, mode=args.mode, n_samples=args.samples, abs_tol=cfg.tol,
                   seed=cfg.seed)
    out = {"mc": rep.as_dict(), "connection": "given" if cfg.connection is not None else "flat"}
    status = rep.status
    k = cfg.mc_opts.get("connections", 0)
    if k:
        rng = np.random.default_rng(cfg.seed)
        verdicts = []
        for _ in range(k):
            r = mc_check(eta, A, random_connection(A, rng), conv, mode="numeric", n_samples=args.samples,
                         abs_tol=max(cfg.tol, 1e-8), seed=cfg.seed)
            verdicts.append(r.status)
        out["random_connections"] = verdicts
        out["connection_invariant"] = len(set(verdicts + [status])) == 1
        if not out["connection_invariant"]:
            status = _worst(status, "unknown")
    out["status"] = status
    return out


def _job_gstructure(cfg: JobConfig, args) -> dict:
    from .algebroid import certify
    from .gstruct import (S_ORDERS, build_gstructure_algebroid, constant_section_homomorphism_residual,
                          verify_g_realization)

    D = cfg.gdata
    opts = cfg.g_opts
    samples = args.samples if args.samples_given else opts["samples"]
    tol = max(cfg.tol, 1e-9) if args.mode == "numeric" else cfg.tol
    signs = (1, -1) if opts["bracket_sign"] == "auto" else (opts["bracket_sign"],)
    orders = tuple(S_ORDERS) if opts["s_order"] == "auto" else (opts["s_order"],)
    tried = []
    chosen = None
    for sign in signs:
        for order in orders:
            A = build_gstructure_algebroid(D, sign, order)
            cert = certify(A, "realization", mode=args.mode, n_samples=samples, abs_tol=tol, seed=cfg.seed)
            tried.append({"bracket_sign": sign, "s_order": order, **cert.as_dict()})
            if chosen is None and cert.status == "pass":
                chosen = (sign, order, A)
    rep = {"group": D.g.name, "n": D.n, "dim_g": D.m, "fiber_rank": D.n + D.m, "conventions_tried": tried}
    if chosen is None:
        rep["status"] = "fail" if any(t["status"] == "fail" for t in tried) else "unknown"
        return rep
    sign, order, A = chosen
    pts = A.chart.sample(20, cfg.seed) if A.d else None
    rep["convention"] = {"bracket_sign": sign, "s_order": order, "algebroid_convention": "realization"}
    rep["homomorphism"] = constant_section_homomorphism_residual(A, D.g, D.n, "realization", pts)
    status = "pass"
    if cfg.g_candidate is not None:
        gr = verify_g_realization(cfg.g_candidate, D, sign, order, n_samples=args.samples, abs_tol=cfg.tol,
                                  seed=cfg.seed)
        rep["candidate"] = gr.as_dict()
        status = _worst(status, gr.status)
    if D.chart.dim == 1 and D.n + D.m == 3:
        pts = cfg.isotropy_points or [[-1.0], [0.0], [1.0]]
        rep["isotropy"] = _isotropy_table(A, pts)
    rep["status"] = status
    return rep


def _job_verify_realization(cfg: JobConfig, args) -> dict:
    from .coframe import verify_classifying_data
    from .realize import RealizationCandidate, verify_realization_numeric

    theta, A, h = cfg.coframe, cfg.algebroid, cfg.realization_h
    chk = verify_classifying_data(theta, h, A, n_samples=args.samples, abs_tol=cfg.tol, seed=cfg.seed)
    tol = float(cfg.realization_opts.get("tol", 1e-6))
    cand = RealizationCandidate.from_coframe(theta, h)
    num = verify_realization_numeric(cand, A, samples=int(cfg.realization_opts.get("samples", args.samples)),
                                     seed=cfg.seed, tol=tol)
    sym = chk.as_dict()
    return {"symbolic": sym, "numeric": num.as_dict(),
            "status": _worst(sym["status"], "pass" if num.passed else "fail")}


def _parse_fiber(text: str, coords) -> list[float]:
    vals = {}
    for part in str(text).split(","):
        if not part.strip():
            continue
        key, sep, v = part.partition("=")
        if not sep:
            raise ConfigError(f"fiber {text!r}: expected name=value pairs")
        vals[key.strip()] = float(v)
    unknown = set(vals) - set(coords)
    if unknown:
        raise ConfigError(f"fiber {text!r}: unknown coordinates {sorted(unknown)}")
    missing = [c for c in coords if c not in vals]
    if missing:
        raise ConfigError(f"fiber {text!r}: missing values for {missing}")
    return [vals[c] for c in coords]


def _job_realize(cfg: JobConfig, args) -> dict:
    from .algebroid import fiber_algebra, orbit_rank_at
    from .catalog import constant_curvature_algebroid
    from .liealg import preset
    from .realize import ChartNotInjective, realize_bundle_fiber, verify_realization_numeric

    opts = cfg.realize_opts
    A = cfg.algebroid
    side = opts.get("side", "right")
    box = args.box if args.box is not None else float(opts.get("box", 0.5))
    per_axis = args.grid or int(opts.get("grid", 5))
    if "algebra" in opts or "structure_constants" in opts:
        try:
            g = preset(opts["algebra"]) if "algebra" in opts else np.asarray(opts["structure_constants"], float)
        except ValueError as exc:
            raise ConfigError(f"[realize] {exc}") from None
        x0, A = [], None
    else:
        if A is None:
            A = constant_curvature_algebroid()
        text = args.fiber or opts.get("fiber")
        if text is None:
            raise ConfigError("realize needs a fiber, e.g. --fiber k=1")
        x0 = _parse_fiber(text, A.chart.coords)
        if not A.chart.admissible(np.array([x0]))[0]:
            raise ConfigError(f"fiber point {x0} lies outside the algebroid chart")
        if orbit_rank_at(A, x0) != 0:
            raise ConfigError("realize builds local groups and needs a fiber where the anchor vanishes")
        g = fiber_algebra(A, x0)
    try:
        cand = realize_bundle_fiber(g, box=box, x0=x0, side=side)
    except ChartNotInjective as exc:
        return {"status": "unknown", "reason": str(exc)}
    rep = {"fiber": x0, "side": side, "box": float(cand.chart.box[0][1]) if cand.chart.dim else 0.0,
           "label": cand.label}
    if A is not None:
        r = cand.chart.box[0][1] * 0.9 if cand.chart.dim else 0.0
        axis = np.linspace(-r, r, per_axis)
        pts = np.array(np.meshgrid(*[axis] * cand.n, indexing="ij")).reshape(cand.n, -1).T
        num = verify_realization_numeric(cand, A, samples=pts, tol=1e-6)
        rep["verification"] = num.as_dict()
        rep["grid"] = f"{per_axis}^{cand.n}"
        rep["status"] = "pass" if num.passed else "fail"
    else:
        from .algebroid import FlatAlgebroid
        from .symexpr import Chart

        c = g.c if hasattr(g, "c") else g
        B = FlatAlgebroid(Chart([], []), np.asarray(c).tolist(), [])
        r = cand.chart.box[0][1] * 0.9
        axis = np.linspace(-r, r, per_axis)
        pts = np.array(np.meshgrid(*[axis] * cand.n, indexing="ij")).reshape(cand.n, -1).T
        num = verify_realization_numeric(cand, B, samples=pts, tol=1e-6)
        rep["verification"] = num.as_dict()
        rep["status"] = "pass" if num.passed else "fail"
    return rep


def _job_orbit(cfg: JobConfig, args) -> dict:
    from .algebroid import same_orbit

    o = cfg.orbit_opts
    res = same_orbit(cfg.algebroid, o["from"], o["to"], budget=int(o.get("budget", 100_000)),
                     step=float(o.get("step", 1e-3)), tol=float(o.get("tol", 1e-6)))
    d = res.as_dict()
    d["status"] = {"yes": "pass", "no": "fail"}.get(res.status, "unknown")
    d["answer"] = res.status
    return d


RUNNERS = {
    "check-algebroid": _job_check_algebroid,
    "prolong": _job_prolong,
    "coframe": _job_coframe,
    "mc-check": _job_mc_check,
    "gstructure": _job_gstructure,
    "verify-realization": _job_verify_realization,
    "realize": _job_realize,
    "orbit": _job_orbit,
    "isotropy": _job_isotropy,
}


def _namespace(**kw) -> argparse.Namespace:
    base = dict(mode="symbolic", samples=200, samples_given=False, order=None, grid=None, fiber=None, box=None)
    base.update(kw)
    return argparse.Namespace(**base)


def run_job(cfg: JobConfig, args: argparse.Namespace | None = None) -> dict:
    """Run the job described by ``cfg`` and return a JSON-ready report."""
    args = args or _namespace()
    if cfg.kind not in RUNNERS:
        raise ConfigError(f"unknown job {cfg.kind!r}")
    t0 = time.perf_counter()
    rep = RUNNERS[cfg.kind](cfg, args)
    log.info("%s finished in %.2f s", cfg.kind, time.perf_counter() - t0)
    rep.update({"job": cfg.kind, "config": cfg.path, "seed": cfg.seed, "tol": cfg.tol,
                "mode": args.mode, "warnings": list(cfg.warnings)})
    if cfg.title:
        rep["title"] = cfg.title
    rep["exit_code"] = EXIT_CODES[rep["status"]]
    return _clean(rep)


# ----------------------------------------------------------------- output

def _md_table(rows: list[dict], cols: list[str]) -> str:
    head = "| " + " | ".join(cols) + " |"
    sep = "|" + "|".join("---" for _ in cols) + "|"
    body = ["| " + " | ".join(str(r.get(c, "")) for c in cols) + " |" for r in rows]
    return "\n".join([head, sep] + body)


def emit_report(rep: dict, fmt: str = "markdown") -> str:
    """Render a report as sorted JSON or as a short markdown summary."""
    if fmt == "json":
        return json.dumps(rep, sort_keys=True, indent=2)
    lines = [f"# cartan {rep.get('job', '')}: {rep['status'].upper()}", ""]
    if rep.get("title"):
        lines += [rep["title"], ""]
    lines.append(f"- config: `{rep.get('config', '')}`")
    lines.append(f"- seed: {rep.get('seed')}, tol: {rep.get('tol')}, mode: {rep.get('mode')}")
    for w in rep.get("warnings", []):
        lines.append(f"- warning: {w}")
    if "certificate" in rep:
        c = rep["certificate"]
        lines.append(f"- jacobi: {c['jacobi']['verdict']} (max {c['jacobi']['max_abs']:.3g})")
        lines.append(f"- anchor morphism: {c['anchor']['verdict']} (max {c['anchor']['max_abs']:.3g})")
    if "tower" in rep:
        lines.append(f"- tower: {rep['tower']}")
    if "verdict" in rep:
        lines.append(f"- verdict: {rep['verdict']}")
    if "convention" in rep:
        cv = rep["convention"]
        lines.append(f"- convention: bracket_sign={cv['bracket_sign']}, s_order={cv['s_order']}")
    if "conventions_tried" in rep:
        lines += ["", _md_table([{"bracket_sign": t["bracket_sign"], "s_order": t["s_order"],
                                  "status": t["status"], "jacobi_max": f"{t['jacobi']['max_abs']:.3g}",
                                  "anchor_max": f"{t['anchor']['max_abs']:.3g}"}
                                 for t in rep["conventions_tried"]],
                                ["bracket_sign", "s_order", "status", "jacobi_max", "anchor_max"])]
    if "isotropy" in rep:
        rows = [{**r, "point": ", ".join(f"{k}={v:g}" for k, v in r["point"].items())} for r in rep["isotropy"]]
        lines += ["", _md_table(rows, ["point", "isotropy_dim", "orbit_rank", "killing_signature", "algebra",
                                       "geometry"])]
    for key in ("mc", "realization", "symbolic", "numeric", "verification", "candidate"):
        if key in rep:
            lines.append(f"- {key}: {rep[key].get('status', '')}")
    if "answer" in rep:
        lines.append(f"- same orbit: {rep['answer']} (distance {rep['distance']})")
    if "reason" in rep:
        lines.append(f"- reason: {rep['reason']}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cartan", description="Coframe invariants and Lie algebroid checks.")
    sub = p.add_subparsers(dest="job", required=True)
    for job in JOBS:
        s = sub.add_parser(job)
        s.add_argument("--config", required=(job != "realize"),
                       help="TOML file, or the name of a bundled config")
        s.add_argument("--seed", type=int, help="random seed (default 42 or the config value)")
        s.add_argument("--json", metavar="OUT", help="write the JSON report to OUT")
        s.add_argument("--format", choices=("markdown", "json"), default="markdown", help="stdout format")
        s.add_argument("--mode", choices=("symbolic", "numeric"), default=None)
        s.add_argument("--samples", type=int, default=None)
        s.add_argument("--order", type=int, default=None, help="invariant order or prolongation depth")
        s.add_argument("--grid", type=int, default=None, help="grid points per axis")
        s.add_argument("--fiber", help="fiber point such as k=1 (realize)")
        s.add_argument("--box", type=float, default=None, help="half-width of the group chart (realize)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    default_mode = "numeric" if args.job == "gstructure" else "symbolic"
    ns = _namespace(mode=args.mode or default_mode, samples=args.samples or (100 if args.job == "gstructure" else 200),
                    samples_given=args.samples is not None, order=args.order, grid=args.grid,
                    fiber=args.fiber, box=args.box)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = load_config(args.config or "constant_curvature", kind=args.job)
        if args.seed is not None:
            cfg.seed = args.seed
        rep = run_job(cfg, ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CODES["config-error"]
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(emit_report(rep, "json") + "\n")
    sys.stdout.write(emit_report(rep, args.format))
    return rep["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
