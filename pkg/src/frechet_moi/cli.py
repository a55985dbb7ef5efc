"""Command-line driver.

    frechet-moi run --config cfg.json [--seed N] [--out DIR] [--diagnostics-mode]
    frechet-moi list-experiments

Exit status: 0 when every verdict passes (informational counts as passing),
2 on a failed verdict, 1 on invalid input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import jsonschema
import numpy as np

from .errors import FrechetMoiError, InvalidPError, SchemaViolationError
from .experiments import (
    CATALOG,
    DiagonalModel,
    ExperimentReport,
    commutative_counterexample,
    list_experiments,
    mollifier_convergence,
    necessity_probe,
    norm_bound_probe,
    rank_one_check,
    write_report,
)
from .frechet import differentiability_report, frechet_derivative, gateaux_fd, sample_directions, taylor_expand
from .scalar_fn import builtin
from .spectral import SchattenIndex, apply_function, matrix_to_json, random_hermitian

SCHEMA_VERSION = 1

_P = {"oneOf": [{"type": "number"}, {"enum": ["inf", "infinity"]}]}
_RANGE = {
    "type": "object",
    "required": ["start", "stop", "step"],
    "additionalProperties": False,
    "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "step": {"type": "number", "exclusiveMinimum": 0}},
}
_NUMS = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "command"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["derive", "taylor", "verify", "experiment"]},
        "function": {
            "type": "object",
            "required": ["id"],
            "additionalProperties": False,
            "properties": {"id": {"type": "string"}, "params": {"type": "object"}},
        },
        "experiment": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "p": _P,
        "d": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "trials": {"type": "integer", "minimum": 1},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "scale": {"type": "number", "exclusiveMinimum": 0},
        "t_grid": _NUMS,
        "diagnostics_mode": {"type": "boolean"},
        "params": {"type": "object"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "csv": {"type": "boolean"}},
        },
    },
}

EXPERIMENT_PARAMS = {
    "rank_one_check": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "m": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
            "interval": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
    },
    "necessity_probe": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"lambdas": _RANGE, "eps": {"type": "number"}, "reference_bound": {"type": "number"}},
    },
    "mollifier_convergence": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"eps_list": _NUMS, "grid": _RANGE, "quadrature_nodes": {"type": "integer"}},
    },
    "norm_bound_probe": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"eps_list": _NUMS, "grid": _RANGE},
    },
    "commutative_counterexample": {
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "N": {"type": "integer", "minimum": 1},
            "k_list": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            "t_list": _NUMS,
        },
    },
}


def _locator(err: jsonschema.ValidationError, prefix=()):
    path = "/".join(str(x) for x in (*prefix, *err.absolute_path))
    return f"schema-violation at '{path or '<root>'}': {err.message}"


def _validate(instance, schema, prefix=()):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        raise SchemaViolationError(_locator(errors[0], prefix))


def _parse_p(value, diagnostics):
    if isinstance(value, str):
        value = math.inf
    p = SchattenIndex(value) if value >= 1 else None
    if p is None:
        raise InvalidPError(f"invalid-p: p = {value} (field 'p')")
    if not p.in_theorem_scope and not diagnostics:
        raise InvalidPError(f"invalid-p: p = {value} needs 1 < p < inf unless diagnostics_mode is set (field 'p')")
    return p


def _range(spec):
    start, stop, step = spec["start"], spec["stop"], spec["step"]
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def load_config(path_or_text, *, from_text=False):
    """Parse and schema-check a config; JSON syntax errors report line and column."""
    try:
        if from_text:
            cfg = json.loads(path_or_text)
        else:
            with open(path_or_text, encoding="utf-8") as fh:
                cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"schema-violation at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    _validate(cfg, CONFIG_SCHEMA)
    return cfg


def _function(cfg, default="sin"):
    spec = cfg.get("function", {"id": default})
    return builtin(spec["id"], **spec.get("params", {}))


def _run_derive(cfg):
    f = _function(cfg)
    n, d, seed = cfg.get("n", 1), cfg.get("d", 4), cfg.get("seed", 0)
    trials = cfg.get("trials", 3)
    tol = cfg.get("tolerance", 1e-4)
    A = random_hermitian(seed, d)
    dirs = sample_directions(seed + 1, d, trials, 2.0)
    gaps = []
    first = None
    for X in dirs:
        D = frechet_derivative(f, n, A, [X] * n)
        fd = gateaux_fd(f, n, A, X)
        gaps.append(float(np.linalg.norm(D - fd) / max(np.linalg.norm(D), 1e-300)))
        if first is None:
            first = D
    rep = ExperimentReport("derive", config={**cfg, "seed": seed})
    anchor = "Eq. perturbation_formula"
    rep.measure("fd_relative_gaps", gaps, anchor)
    rep.measure("max_fd_relative_gap", max(gaps), anchor)
    rep.measure("derivative_trial0", matrix_to_json(first), anchor)
    rep.verdict = "pass" if max(gaps) <= tol else "fail"
    return rep


def _run_taylor(cfg):
    f = _function(cfg)
    n, d, seed = cfg.get("n", 2), cfg.get("d", 4), cfg.get("seed", 0)
    trials = cfg.get("trials", 3)
    tol = cfg.get("tolerance", 1e-8)
    scale = cfg.get("scale", 1.0)
    gaps = []
    for i in range(trials):
        A = random_hermitian(seed * 1000 + 2 * i, d)
        X = scale * random_hermitian(seed * 1000 + 2 * i + 1, d)
        approx, rem = taylor_expand(f, n, A, X)
        exact = apply_function(f, A + X)
        gaps.append(float(np.linalg.norm(approx + rem - exact) / max(np.linalg.norm(exact), 1e-300)))
    rep = ExperimentReport("taylor", config={**cfg, "seed": seed})
    rep.measure("identity_gaps", gaps, "Eq. taylor_expansion")
    rep.measure("max_identity_gap", max(gaps), "Eq. taylor_expansion")
    rep.verdict = "pass" if max(gaps) < tol else "fail"
    return rep


def _run_verify(cfg, p):
    f = _function(cfg)
    n, d, seed = cfg.get("n", 1), cfg.get("d", 6), cfg.get("seed", 0)
    trials = cfg.get("trials", 8)
    t_grid = cfg.get("t_grid", [1e-1, 1e-2, 1e-3, 1e-4])
    A = random_hermitian(seed, d)
    dirs = sample_directions(seed + 1, d, trials, p)
    report = differentiability_report(f, n, A, p, dirs, t_grid, seed=seed + 2)
    rep = ExperimentReport("differentiability_report", config={**cfg, "seed": seed})
    anchor = "Definition (1), o(|X|_p) remainder"
    rep.measure("slope_estimate", report.slope_estimate, anchor)
    rep.measure("sup_ratios", report.sup_ratios, anchor)
    rep.measure("monotone", report.monotone, anchor)
    rep.measure("uniformity", report.uniformity, anchor)
    rep.series["remainder_ratio"] = {
        "columns": ["t", "direction", "remainder_ratio"],
        "rows": [[t, k, r] for t, k, r in report.samples],
    }
    rep.verdict = report.verdict
    return rep


def _run_experiment(cfg, p):
    exp = cfg.get("experiment")
    if exp not in CATALOG:
        raise SchemaViolationError(f"schema-violation at 'experiment': unknown experiment {exp!r}")
    params = cfg.get("params", {})
    _validate(params, EXPERIMENT_PARAMS[exp], prefix=("params",))
    seed = cfg.get("seed", 0)
    if exp == "commutative_counterexample":
        if not p.in_theorem_scope:
            raise InvalidPError(f"invalid-p: commutative_counterexample needs 1 < p < inf, got {p.p}")
        kw = {k: params[k] for k in ("t_list",) if k in params}
        rep = commutative_counterexample(p, params.get("N", 1000), params.get("k_list", [1, 10, 100]), **kw)
    else:
        f = _function(cfg)
        n = cfg.get("n", 1)
        if exp == "rank_one_check":
            d = cfg.get("d", 32)
            lo, hi = params.get("interval", [-10.0, 10.0])
            model = DiagonalModel.dense(d, lo, hi)
            rng = np.random.default_rng(seed)
            pairs = params.get("pairs") or [[int(k), float(t)] for k, t in zip(rng.integers(0, d, 4), rng.uniform(-1, 1, 4))]
            subs = [rank_one_check(f, m, model, int(k), float(t)) for m in params.get("m", [0, 1, 2]) for k, t in pairs]
            rep = ExperimentReport("rank_one_check", config={"checks": len(subs), "scope": subs[0].config["scope"]})
            rep.measure("frobenius_gaps", [r.get("frobenius_gap") for r in subs])
            rep.measure("checks", [r.config for r in subs])
            rep.verdict = "pass" if all(r.verdict == "pass" for r in subs) else "fail"
        elif exp == "necessity_probe":
            lam = _range(params.get("lambdas", {"start": 0.0, "stop": 100.0, "step": 0.1}))
            t_grid = cfg.get("t_grid", [1e-1, 1e-2, 1e-3])
            kw = {k: params[k] for k in ("eps", "reference_bound") if k in params}
            rep = necessity_probe(f, n, lam, t_grid, **kw)
        elif exp == "mollifier_convergence":
            grid = _range(params.get("grid", {"start": -10.0, "stop": 10.0, "step": 0.01}))
            kw = {k: params[k] for k in ("quadrature_nodes",) if k in params}
            rep = mollifier_convergence(f, n, params.get("eps_list", [0.5, 0.1, 0.02]), grid, **kw)
        else:
            A = random_hermitian(seed, cfg.get("d", 6))
            kw = {k: params[k] for k in ("eps_list",) if k in params}
            if "grid" in params:
                kw["grid"] = _range(params["grid"])
            rep = norm_bound_probe(f, n, p, A, cfg.get("trials", 8), seed, **kw)
    rep.config = {**cfg, "seed": seed, "probe": rep.config}
    return rep


def run(cfg: dict, *, out_dir=None, seed=None, diagnostics_mode=False):
    """Execute one validated config; returns ``(exit_status, report, paths)``."""
    cfg = dict(cfg)
    if seed is not None:
        cfg["seed"] = seed
    if diagnostics_mode:
        cfg["diagnostics_mode"] = True
    p = _parse_p(cfg.get("p", 2.0), cfg.get("diagnostics_mode", False))
    command = cfg["command"]
    if command == "derive":
        rep = _run_derive(cfg)
    elif command == "taylor":
        rep = _run_taylor(cfg)
    elif command == "verify":
        rep = _run_verify(cfg, p)
    else:
        rep = _run_experiment(cfg, p)
    out_dir = out_dir or cfg.get("output", {}).get("dir")
    paths = []
    if out_dir:
        paths = write_report(rep, out_dir, seed=cfg.get("seed", 0), csv_series=cfg.get("output", {}).get("csv", True))
    return (0 if rep.passed else 2), rep, paths


def main(argv=None):
    parser = argparse.ArgumentParser(prog="frechet-moi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    run_p = sub.add_parser("run", help="run a JSON config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out")
    run_p.add_argument("--diagnostics-mode", action="store_true")
    sub.add_parser("list-experiments", help="print the experiment catalog")
    args = parser.parse_args(argv)

    if args.cmd == "list-experiments":
        for line in list_experiments():
            print(line)
        return 0
    try:
        cfg = load_config(args.config)
        status, rep, paths = run(cfg, out_dir=args.out, seed=args.seed, diagnostics_mode=args.diagnostics_mode)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FrechetMoiError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{rep.experiment_id}: {rep.verdict}" + (f" ({rep.conclusion})" if rep.conclusion else ""))
    for path in paths:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
