"""Command-line interface: ``confgeo {integrate,oracle,check,vary,bvp,figure1}``.

Exit codes: 0 success, 1 numerical failure (including failed checks), 2 input error.
Data files carry no timestamps; JSON reports carry the SHA-256 of the
effective configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import checks
from .dynamics import (
    ConformalGeodesicFlow,
    CurveState,
    FlatMercatorFlow,
    GeodesicFlow,
    MercatorFlow,
    integrate,
    mercator_C,
)
from .errors import ConfigError, InputError, NumericalError
from .geometry import geometry_jet, inner, metric_from_config, named_metric
from .hamiltonian import ArclengthFlow
from .oracles import (
    CircleParams,
    SpiralParams,
    circle_curve,
    circle_fit,
    curve_trajectory,
    loxodrome_curve,
    planarity,
    serret_frenet_torsion,
    special_conformal,
    spiral_curve,
)
from .trajectory import Trajectory
from .variational import BvpProblem, bvp_shoot, bump_field, polynomial_field, first_variation_check, trace_csv, trig_field

EQUATIONS = ("cg3", "mercator4", "geodesic", "arclength")
METHODS = ("rkf45", "rk4")
FALLBACK_TOL = 1e-10
FIGURE1 = {"x": [0.0, 0.0, 0.0], "U": [1.0, 0.0, 0.0], "A": [0.1, 1.0, 0.0]}

_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_metric = {"oneOf": [{"type": "string"}, {"type": "object"}]}

RUN_SCHEMA = {
    "type": "object",
    "properties": {
        "metric": _metric,
        "dim": {"type": "integer", "minimum": 2},
        "equation": {"enum": list(EQUATIONS)},
        "ic": {
            "type": "object",
            "properties": {"x": _vec, "U": _vec, "A": _vec, "J": _vec},
            "required": ["x", "U"],
            "additionalProperties": False,
        },
        "c_vector": _vec,
        "t0": {"type": "number"},
        "t1": {"type": "number"},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "method": {"enum": list(METHODS)},
        "samples": {"type": "integer", "minimum": 2},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "output": {
            "type": "object",
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

BVP_SCHEMA = {
    "type": "object",
    "properties": {
        "metric": _metric,
        "dim": {"type": "integer", "minimum": 2},
        "x0": _vec,
        "U0": _vec,
        "x1": _vec,
        "U1": _vec,
        "t0": {"type": "number"},
        "t1": {"type": "number"},
        "guess": {
            "type": "object",
            "properties": {"A0": _vec, "J0": _vec},
            "required": ["A0", "J0"],
            "additionalProperties": False,
        },
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 2},
    },
    "required": ["x0", "U0", "x1", "U1"],
    "additionalProperties": False,
}


# ---------------------------------------------------------------------------
# helpers


def default_tol():
    raw = os.environ.get("CONFGEO_DEFAULT_TOL")
    if raw is None or raw == "":
        return FALLBACK_TOL
    try:
        tol = float(raw)
    except ValueError as exc:
        raise ConfigError(f"CONFGEO_DEFAULT_TOL is not a number: {raw!r}") from exc
    if not tol > 0:
        raise ConfigError("CONFGEO_DEFAULT_TOL must be positive")
    return tol


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def validate(cfg, schema, what="config"):
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"{what} invalid at {where}: {exc.message}") from exc


def parse_vector(text, name="vector"):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name} {text!r}: expected comma-separated numbers") from exc


def parse_ic(text):
    """``x;U;A[;J]`` (comma-separated vectors) or a JSON object with those keys."""
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--ic is not valid JSON: {exc}") from exc
    parts = [p for p in text.split(";") if p.strip()]
    if not 2 <= len(parts) <= 4:
        raise ConfigError("--ic needs 2 to 4 ';'-separated vectors: x;U[;A[;J]]")
    return dict(zip(("x", "U", "A", "J"), (parse_vector(p, "--ic vector") for p in parts)))


def parse_json_arg(text, name):
    if text is None:
        return {}
    try:
        out = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name} is not valid JSON: {exc}") from exc
    if not isinstance(out, dict):
        raise ConfigError(f"{name} must be a JSON object")
    return out


def build_metric(spec, dim):
    if isinstance(spec, str):
        return named_metric(spec, dim)
    spec = dict(spec)
    spec.setdefault("dim", dim)
    return metric_from_config(spec)


def write_text(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def write_trajectory(tr: Trajectory, path, fmt):
    write_text(tr.to_json() if fmt == "json" else tr.to_csv(), path)


def write_report(report, path):
    write_text(json.dumps(report, indent=1, sort_keys=True) + "\n", path)


# ---------------------------------------------------------------------------
# integrate


def run_config(args):
    """Effective run configuration: config file overlaid with command-line flags."""
    cfg = load_json(args.config) if getattr(args, "config", None) else {}
    validate(cfg, RUN_SCHEMA)
    overrides = {
        "metric": args.metric,
        "dim": args.dim,
        "equation": args.equation,
        "t0": args.t0,
        "t1": args.t1,
        "tol": args.tol,
        "method": args.method,
        "samples": args.samples,
        "h": args.step,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    if args.ic is not None:
        cfg["ic"] = parse_ic(args.ic)
    if args.c_vector is not None:
        cfg["c_vector"] = parse_vector(args.c_vector, "--c-vector")
    cfg.setdefault("metric", "flat-euclidean")
    cfg.setdefault("equation", "cg3")
    cfg.setdefault("t0", 0.0)
    cfg.setdefault("t1", 1.0)
    cfg.setdefault("method", "rkf45")
    cfg.setdefault("samples", 101)
    if "tol" not in cfg:
        cfg["tol"] = default_tol()
    if "dim" not in cfg:
        cfg["dim"] = len(cfg["ic"]["x"]) if "ic" in cfg else 3
    validate(cfg, RUN_SCHEMA)
    if "ic" not in cfg:
        raise ConfigError("initial data missing: give --ic or an 'ic' entry in the config")
    return cfg


def flow_and_state(cfg):
    """Select the flow and initial state, checking the initial-data form against the equation."""
    metric = build_metric(cfg["metric"], cfg["dim"])
    ic = cfg["ic"]
    n = metric.dim
    for key, v in ic.items():
        if len(v) != n:
            raise ConfigError(f"initial {key} has {len(v)} components, metric dimension is {n}")
    x, U = np.array(ic["x"], float), np.array(ic["U"], float)
    A = np.array(ic["A"], float) if "A" in ic else None
    J = np.array(ic["J"], float) if "J" in ic else None
    eq = cfg["equation"]
    C = cfg.get("c_vector")
    if C is not None and (eq != "mercator4" or metric.kind != "flat"):
        raise ConfigError("a C-vector is only meaningful for mercator4 on a flat metric")
    if C is not None and len(C) != n:
        raise ConfigError(f"C-vector has {len(C)} components, metric dimension is {n}")
    if eq == "geodesic":
        if A is not None or J is not None:
            raise ConfigError("geodesic takes a 1-jet (x, U)")
        return GeodesicFlow(metric), CurveState(x, U, np.zeros(n))
    if A is None:
        raise ConfigError(f"{eq} needs the acceleration A in the initial data")
    if eq == "cg3":
        if J is not None:
            raise ConfigError("cg3 takes a 2-jet (x, U, A); the jerk is determined by the equation")
        return ConformalGeodesicFlow(metric), CurveState(x, U, A)
    if eq == "arclength":
        if J is not None:
            raise ConfigError("arclength takes a 2-jet (x, U, A)")
        jet = geometry_jet(metric, x)
        if abs(inner(jet.g, U, U) - 1) > 1e-10 or abs(inner(jet.g, U, A)) > 1e-10:
            raise ConfigError("arclength initial data needs |U| = 1 and <U, A> = 0")
        return ArclengthFlow(metric), CurveState(x, U, A)
    # mercator4
    if metric.kind == "flat":
        if C is not None and J is not None:
            raise ConfigError("give either the jerk J or the C-vector, not both")
        if C is None:
            if J is None:
                raise ConfigError("mercator4 needs the jerk J or a C-vector")
            C = mercator_C(CurveState(x, U, A, J), np.diag(metric.signature).astype(float))
        return FlatMercatorFlow(metric, C), CurveState(x, U, A)
    if J is None:
        raise ConfigError("mercator4 on a curved metric needs the jerk J (3-jet initial data)")
    return MercatorFlow(metric), CurveState(x, U, A, J)


def run_integration(cfg) -> Trajectory:
    flow, state0 = flow_and_state(cfg)
    method = cfg["method"]
    h = cfg.get("h")
    if method == "rk4" and h is None:
        h = abs(cfg["t1"] - cfg["t0"]) / 1000
    tr = integrate(flow, state0, cfg["t0"], cfg["t1"], method=method, tol=cfg["tol"], samples=cfg["samples"], h=h)
    tr.meta["config_hash"] = config_hash(cfg)
    return tr


def cmd_integrate(args):
    cfg = run_config(args)
    tr = run_integration(cfg)
    out = args.out if args.out is not None else cfg.get("output", {}).get("path")
    fmt = args.format or cfg.get("output", {}).get("format", "csv")
    write_trajectory(tr, out, fmt)
    return 0


# ---------------------------------------------------------------------------
# oracle


def _arr(params, key, default):
    return np.asarray(params.get(key, default), dtype=float)


def oracle_curve(family, params, dim=3):
    e = np.eye(dim)
    if family == "circle":
        return circle_curve(CircleParams(_arr(params, "X0", np.zeros(dim)), _arr(params, "U0", e[0]), _arr(params, "A0", e[1])))
    sp = SpiralParams(_arr(params, "P0", e[0]), _arr(params, "Q0", e[1]), _arr(params, "R0", np.zeros(dim)),
                      float(params.get("c", 2.0)))
    if family == "spiral":
        return spiral_curve(sp)
    if family == "loxodrome":
        if np.any(sp.R0 != 0):
            raise ConfigError("loxodromes come from spirals centered at the origin (R0 = 0)")
        R = params.get("R")
        return loxodrome_curve(sp, None if R is None else np.asarray(R, dtype=float))
    if family == "special-conformal":
        B = _arr(params, "B", 0.1 * e[-1])
        return spiral_curve(sp).then(lambda X: special_conformal(X, B), name="special-conformal-spiral")
    raise ConfigError(f"unknown oracle family {family!r}")


def cmd_oracle(args):
    params = parse_json_arg(args.params, "--params")
    cfg = {"family": args.family, "params": params, "dim": args.dim or 3, "t0": args.t0 or 0.0,
           "t1": 1.0 if args.t1 is None else args.t1, "samples": args.samples or 101}
    curve = oracle_curve(args.family, params, cfg["dim"])
    t = np.linspace(cfg["t0"], cfg["t1"], cfg["samples"])
    metric = "round-sphere-stereographic" if args.family == "loxodrome" else "flat-euclidean"
    # the coordinate jet is reported; for loxodromes that is the chart jet, A and J as coordinate derivatives
    tr = curve_trajectory(curve, t, metric=metric, equation="oracle")
    if args.family == "loxodrome":
        xjet = curve.jet(t, 3)
        tr = Trajectory(t, xjet[:, 0], xjet[:, 1], xjet[:, 2], xjet[:, 3], metric, "oracle", tr.meta)
    tr.meta["config_hash"] = config_hash(cfg)
    write_trajectory(tr, args.out, args.format or "csv")
    return 0


# ---------------------------------------------------------------------------
# check


def cmd_check(args):
    suite = args.suite
    cfg = {"suite": suite, "seed": args.seed}
    if suite == "first-integrals":
        if args.trajectory:
            tr = Trajectory.from_csv(args.trajectory, metric=args.metric or "flat-euclidean")
            cfg["trajectory"] = Path(args.trajectory).name
        else:
            run = run_config(args)
            tr = run_integration(run)
            cfg["run"] = run
        report = checks.first_integrals_suite(tr, tol=args.check_tol or 1e-6)
    elif suite == "invariance":
        report = checks.invariance_suite(states=args.states or 100, seed=args.seed)
    elif suite == "tractor":
        report = checks.tractor_suite(seed=args.seed)
    elif suite == "theorem1":
        if args.curve:
            metric = build_metric(args.metric or "flat-euclidean", args.dim or 3)
            rng = np.random.default_rng(args.seed)
            curve = oracle_curve(args.curve, parse_json_arg(args.params, "--params"), metric.dim)
            rows = []
            for _ in range(args.pairs or 4):
                V = trig_field(rng.normal(size=metric.dim) * 0.3, rng.uniform(1, 3, metric.dim), rng.uniform(0, 2 * np.pi, metric.dim))
                rows.append({"metric": metric.name, "curve": curve.name, **first_variation_check(metric, curve, V, 0.0, 1.0)})
            worst = max(r["rel_error"] for r in rows)
            report = {"suite": "theorem1", "pass": worst <= 1e-5, "pairs": rows,
                      "checks": [{"name": "max_rel_error", "value": worst, "tolerance": 1e-5, "comparison": "<=",
                                  "pass": worst <= 1e-5}]}
            cfg.update(curve=args.curve, metric=metric.name, params=args.params)
        else:
            report = checks.first_variation_suite(pairs=args.pairs or 20, seed=args.seed)
    elif suite == "hamiltonian":
        report = checks.hamiltonian_suite(seed=args.seed)
    else:  # argparse restricts the choices; kept for library callers
        raise ConfigError(f"unknown suite {suite!r}")
    report["config_hash"] = config_hash(cfg)
    write_report(report, args.out)
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------------------
# vary


def variation_field(kind, params, dim, t0, t1):
    if kind == "trig":
        return trig_field(_arr(params, "amplitudes", np.full(dim, 0.3)), _arr(params, "frequencies", np.ones(dim)),
                          _arr(params, "phases", np.zeros(dim)))
    if kind == "bump":
        return bump_field(float(params.get("a", t0)), float(params.get("b", t1)), _arr(params, "direction", np.eye(dim)[-1]),
                          int(params.get("power", 4)))
    if kind == "polynomial":
        return polynomial_field(_arr(params, "coeffs", np.eye(dim)[:1]))
    raise ConfigError(f"unknown variation field {kind!r}")


def cmd_vary(args):
    params = parse_json_arg(args.params, "--params")
    fparams = parse_json_arg(args.field_params, "--field-params")
    t0 = 0.0 if args.t0 is None else args.t0
    t1 = 1.0 if args.t1 is None else args.t1
    metric = build_metric(args.metric or "flat-euclidean", args.dim or 3)
    curve = oracle_curve(args.curve, params, metric.dim)
    V = variation_field(args.field, fparams, metric.dim, t0, t1)
    r = first_variation_check(metric, curve, V, t0, t1, samples=args.samples or 2001)
    cfg = {"metric": metric.name, "curve": args.curve, "params": params, "field": args.field,
           "field_params": fparams, "t0": t0, "t1": t1, "samples": args.samples or 2001}
    report = {"suite": "vary", "pass": r["rel_error"] <= 1e-5, **r, "config_hash": config_hash(cfg)}
    write_report(report, args.out)
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------------------
# bvp


def cmd_bvp(args):
    cfg = load_json(args.problem)
    validate(cfg, BVP_SCHEMA, "BVP problem")
    metric = build_metric(cfg.get("metric", "flat-euclidean"), cfg.get("dim", len(cfg["x0"])))
    for key in ("x0", "U0", "x1", "U1"):
        if len(cfg[key]) != metric.dim:
            raise ConfigError(f"{key} has {len(cfg[key])} components, metric dimension is {metric.dim}")
    problem = BvpProblem(metric, cfg["x0"], cfg["U0"], cfg["x1"], cfg["U1"], cfg.get("t0", 0.0), cfg.get("t1", 1.0))
    guess = None
    if "guess" in cfg:
        guess = np.concatenate([cfg["guess"]["A0"], cfg["guess"]["J0"]])
    result = bvp_shoot(problem, guess=guess, tol=cfg.get("tol", 1e-12), max_iter=cfg.get("max_iter", 100),
                       samples=cfg.get("samples", 101))
    tr = result.trajectory
    tr.meta["config_hash"] = config_hash(cfg)
    write_trajectory(tr, args.out, args.format or "csv")
    if args.trace:
        write_text(trace_csv(result.trace), args.trace)
    summary = {"A0": result.A0.tolist(), "J0": result.J0.tolist(), "residual": result.residual,
               "iterations": result.iterations, "config_hash": config_hash(cfg)}
    if args.report:
        write_report(summary, args.report)
    elif args.out not in (None, "-"):
        write_report(summary, None)
    return 0


# ---------------------------------------------------------------------------
# three-run comparison (figure1 subcommand)


def figure1_runs(t1=10.0, samples=1001, tol=1e-10):
    """Three runs from one initial 2-jet: conformal geodesic, C = 0, C = (0, 0, 1)."""
    metric = named_metric("flat-euclidean", 3)
    x, U, A = (np.array(FIGURE1[k]) for k in ("x", "U", "A"))
    state = CurveState(x, U, A)
    runs = {
        "red": integrate(ConformalGeodesicFlow(metric), state, 0.0, t1, tol=tol, samples=samples),
        "blue": integrate(FlatMercatorFlow(metric, np.zeros(3)), state, 0.0, t1, tol=tol, samples=samples),
        "green": integrate(FlatMercatorFlow(metric, np.array([0.0, 0.0, 1.0])), state, 0.0, t1, tol=tol, samples=samples),
    }
    return runs


def figure1_report(runs):
    out = {}
    for name, tr in runs.items():
        C = mercator_C(tr.states(), np.eye(3))
        xjet = np.stack([tr.x, tr.U, tr.A, tr.J], axis=1)
        torsion = serret_frenet_torsion(xjet)
        entry = {
            "C0": C[0].tolist(),
            "C_drift": float(np.max(np.ptp(C, axis=0))),
            "planarity": float(planarity(tr.x)),
            "max_abs_torsion": float(np.max(np.abs(torsion))),
        }
        if name == "red":
            entry["circle_fit_deviation"] = circle_fit(tr.x)[2]
        out[name] = entry
    out["pass"] = bool(
        all(out[k]["C_drift"] <= 1e-6 for k in runs)
        and out["red"]["planarity"] <= 1e-8
        and out["red"]["circle_fit_deviation"] <= 1e-8
        and out["blue"]["planarity"] <= 1e-8
        and out["green"]["max_abs_torsion"] > 1e-3
    )
    return out


def cmd_figure1(args):
    tol = args.tol if args.tol is not None else default_tol()
    t1 = 10.0 if args.t1 is None else args.t1
    samples = args.samples or 1001
    runs = figure1_runs(t1, samples, tol)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = {"figure1": FIGURE1, "t1": t1, "samples": samples, "tol": tol}
    for name, tr in runs.items():
        tr.meta["config_hash"] = config_hash({**cfg, "run": name})
        write_trajectory(tr, out_dir / f"figure1_{name}.{args.format or 'csv'}", args.format or "csv")
    report = figure1_report(runs)
    report["config_hash"] = config_hash(cfg)
    write_report(report, out_dir / "figure1_report.json")
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------------------
# parser


def _run_flags(p):
    p.add_argument("--config", help="JSON run configuration (flags override its entries)")
    p.add_argument("--metric", help="built-in metric name, e.g. flat-euclidean, round-sphere-stereographic, "
                                    "'conformally-flat(exp(x0))'")
    p.add_argument("--dim", type=int)
    p.add_argument("--equation", choices=EQUATIONS)
    p.add_argument("--ic", help="initial data 'x;U;A[;J]' (comma-separated vectors) or a JSON object")
    p.add_argument("--c-vector", dest="c_vector", help="first integral C for flat mercator4, comma-separated")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--samples", type=int)
    p.add_argument("--step", type=float, help="fixed step for rk4")


def build_parser():
    parser = argparse.ArgumentParser(prog="confgeo", description="Conformal geodesics and the fourth-order conformal flow.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="integrate an equation and write a trajectory")
    _run_flags(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("oracle", help="sample a closed-form solution")
    p.add_argument("family", choices=("circle", "spiral", "loxodrome", "special-conformal"))
    p.add_argument("--params", help="JSON object of family parameters")
    p.add_argument("--dim", type=int)
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check", help="run a verification suite and write a JSON report")
    p.add_argument("--suite", required=True, choices=checks.SUITES)
    _run_flags(p)
    p.add_argument("--trajectory", help="trajectory CSV for the first-integrals suite")
    p.add_argument("--curve", choices=("circle", "spiral"), help="first-variation check on one oracle curve")
    p.add_argument("--params", help="JSON parameters of --curve")
    p.add_argument("--pairs", type=int)
    p.add_argument("--states", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check-tol", dest="check_tol", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("vary", help="first variation: formula against finite differences")
    p.add_argument("--metric")
    p.add_argument("--dim", type=int)
    p.add_argument("--curve", choices=("circle", "spiral", "loxodrome", "special-conformal"), default="spiral")
    p.add_argument("--params")
    p.add_argument("--field", choices=("trig", "bump", "polynomial"), default="trig")
    p.add_argument("--field-params", dest="field_params")
    p.add_argument("--t0", type=float)
    p.add_argument("--t1", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_vary)

    p = sub.add_parser("bvp", help="two-point shooting for the fourth-order equation")
    p.add_argument("problem", help="JSON problem file")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--trace", help="write the solver trace CSV here")
    p.add_argument("--report", help="write the solution summary JSON here")
    p.set_defaults(func=cmd_bvp)

    p = sub.add_parser("figure1", help="circle, spiral and twisted runs from one initial state, as CSV plus a report")
    p.add_argument("--out-dir", dest="out_dir", default=".")
    p.add_argument("--t1", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_figure1)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, jsonschema.ValidationError) as exc:
        print(f"confgeo: input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"confgeo: input error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"confgeo: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
