"""Command-line entry point.

Usage::

    pdcontract certify --config run.json --out out/
    pdcontract bounds --config run.json --out out/ --seed 0
    pdcontract agc-demo --out out/ --metric euclidean
    pdcontract hierarchy-demo --out out/ --sweep hierarchy.rho_fast=0.1:0.9:5

Every run reads a single JSON document with a ``version`` field (see
``CONFIG_SCHEMA``). Top-level sections missing from the file are taken from
the shipped default config. Exit status is 0 on success, 2 when a bound's
standing condition fails (the condition is named on stderr) and 1 on
validation or IO errors.
"""
import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

import jsonschema
import numpy as np

from . import agc as agc_mod
from . import hierarchy
from .contraction import certify, weighted_norms
from .dynamics import ObserverConfig, Trajectory, integrate, pd_vector_field, state_names
from .errors import ConditionError, PDContractError, SchemaError
from .jsonutil import write_json
from .problem import make_quadratic_problem, optimum_path, sup_optimum_rate
from .robustness import (
    LipschitzEstimates,
    bound_tracking,
    default_cutoff,
    estimate_lipschitz,
    run_observer_experiment,
    validate_bound,
)
from .signals import signal_from_dict

CONFIG_VERSION = 1
COMMANDS = ("certify", "simulate", "bounds", "agc-demo", "hierarchy-demo")

_number = {"type": "number"}
_vector = {"type": "array", "items": _number, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_signal = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["constant", "ramp", "sinusoid", "tabulated"]}},
}
_integration = {
    "type": "object",
    "required": ["t0", "t1", "step"],
    "properties": {"t0": _number, "t1": _number, "step": {"type": "number", "exclusiveMinimum": 0}},
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": CONFIG_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "transient_cutoff": _number,
        "problem": {
            "type": "object",
            "required": ["P", "r", "E", "q"],
            "additionalProperties": False,
            "properties": {"P": _matrix, "r": _vector, "E": _matrix, "q": _signal, "forcing": _signal},
        },
        "initial_state": _vector,
        "integration": _integration,
        "observer": {
            "type": "object",
            "required": ["kind", "unobserved", "T"],
            "additionalProperties": False,
            "properties": {
                "kind": {"const": "first_order_lag"},
                "unobserved": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "T": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "lipschitz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": ["analytic_linear", "sampled"]},
                "samples": {"type": "integer", "minimum": 1},
                "domain": {"type": "array", "items": _vector, "minItems": 2, "maxItems": 2},
                "t_range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
            },
        },
        "overrides": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta_hat": _number, "xi": _number, "eta": _number},
        },
        "agc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_gen": {"type": "integer", "minimum": 1},
                "D": _matrix, "B": _matrix, "E": _matrix, "k": _vector,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "amplitude": _number, "omega": _number, "initial_frequency": _number,
                "integration": _integration,
            },
        },
        "hierarchy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta_fast": _number, "beta_slow": _number, "xi_slow": _number,
                "eta_slow": _number, "rho_fast": _number,
                "exogenous": _signal,
                "initial_states": {"type": "array", "items": _vector},
                "integration": _integration,
            },
        },
    },
}


def default_config():
    text = resources.files("pdcontract").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def _format_path(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate_config(cfg):
    """Raise :class:`SchemaError` naming the first offending path."""
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        path = _format_path(err.absolute_path)
        raise SchemaError(f"config {path}: {err.message}", path)
    _integration_window(cfg.get("integration"), "integration")
    return cfg


def _integration_window(block, path):
    if block is None:
        return None
    if not block["t1"] > block["t0"]:
        raise SchemaError(f"config {path}: t1 must exceed t0", f"{path}.t1")
    return float(block["t0"]), float(block["t1"]), float(block["step"])


def load_config(path=None):
    """Read, merge with the shipped defaults, and validate a run config."""
    base = default_config()
    if path is None:
        return validate_config(base)
    try:
        with open(path) as fh:
            user = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})", "<root>") from None
    if not isinstance(user, dict):
        raise SchemaError("config <root>: expected a JSON object", "<root>")
    validate_config(user)
    merged = dict(base)
    merged.update(user)
    return validate_config(merged)


def _window(cfg, section=None):
    block = (cfg.get(section) or {}).get("integration") if section else None
    return _integration_window(block or cfg["integration"], f"{section}.integration" if block else "integration")


def build_problem(cfg):
    section = cfg["problem"]
    q = signal_from_dict(section["q"], "problem.q")
    forcing = signal_from_dict(section["forcing"], "problem.forcing") if "forcing" in section else None
    return make_quadratic_problem(section["P"], section["r"], section["E"], q, forcing=forcing)


def _initial_state(cfg, prob):
    z0 = np.asarray(cfg.get("initial_state", [0.0] * (prob.n + prob.m)), dtype=np.float64)
    if z0.shape != (prob.n + prob.m,):
        raise SchemaError(
            f"config initial_state: has {z0.size} entries, problem needs {prob.n + prob.m}", "initial_state"
        )
    return z0


def _error_csv(path, times, errors, extra=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "error"] + ([extra[0]] if extra else []))
        for t, e in zip(times, errors):
            row = [f"{t:.17g}", f"{e:.17g}"]
            if extra:
                row.append(f"{extra[1]:.17g}")
            writer.writerow(row)


def _metric_theta(cert, metric):
    return cert.theta if metric == "theta" else None


def cmd_certify(cfg, out, seed, metric):
    prob = build_problem(cfg)
    cert = certify(prob, alpha=cfg.get("alpha"))
    write_json({"version": CONFIG_VERSION, "certificate": cert.to_dict()}, os.path.join(out, "certificate.json"))
    return {"beta": cert.beta, "alpha": cert.alpha, "satisfied": True}


def cmd_simulate(cfg, out, seed, metric):
    prob = build_problem(cfg)
    cert = certify(prob, alpha=cfg.get("alpha"))
    t0, t1, step = _window(cfg)
    traj = integrate(pd_vector_field(prob), _initial_state(cfg, prob), t0, t1, step)
    traj = Trajectory(traj.times, traj.states, traj.field_label, state_names(prob))
    z_star = optimum_path(prob, traj.times)
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    Trajectory(traj.times, z_star, "optimum", traj.names).to_csv(os.path.join(out, "optimum.csv"))
    err = weighted_norms(_metric_theta(cert, metric), traj.states - z_star)
    _error_csv(os.path.join(out, "error.csv"), traj.times, err)

    cutoff = cfg.get("transient_cutoff", default_cutoff(cert.beta, t0))
    report = None
    if cutoff < t1:
        sup_rate = sup_optimum_rate(prob, t0, t1, cert.theta)
        report = validate_bound(
            "cor1_tracking", traj, z_star, cert.theta, bound_tracking(cert.beta, sup_rate), cutoff,
            {"beta": cert.beta, "sup_rate": sup_rate},
        )
    write_json({
        "version": CONFIG_VERSION,
        "certificate": cert.to_dict(),
        "final_state": traj.final,
        "report": None if report is None else report.to_dict(),
    }, os.path.join(out, "simulate_report.json"))
    return {"beta": cert.beta, "satisfied": True if report is None else report.satisfied}


def _lipschitz(cfg, prob, cert, obs, seed):
    section = cfg.get("lipschitz", {})
    over = cfg.get("overrides", {})
    if "xi" in over and "eta" in over:
        return LipschitzEstimates(float(over["xi"]), float(over["eta"]), "declared")
    domain = section.get("domain")
    lip = estimate_lipschitz(
        prob, cert, obs, domain=None if domain is None else tuple(domain),
        samples=section.get("samples", 1000), seed=seed, method=section.get("method"),
        t_range=tuple(section.get("t_range", (0.0, 0.0))),
    )
    if "xi" in over or "eta" in over:
        lip = LipschitzEstimates(
            float(over.get("xi", lip.xi)), float(over.get("eta", lip.eta)), lip.method + "+declared",
            lip.samples,
        )
    return lip


def cmd_bounds(cfg, out, seed, metric):
    prob = build_problem(cfg)
    cert = certify(prob, alpha=cfg.get("alpha"))
    N = prob.n + prob.m
    ospec = cfg["observer"]
    bad = [i for i in ospec["unobserved"] if i >= N]
    if bad:
        raise SchemaError(f"config observer.unobserved: index {bad[0]} out of range for {N} states",
                          "observer.unobserved")
    obs = ObserverConfig.first_order_lag(ospec["unobserved"], N, ospec["T"])
    lip = _lipschitz(cfg, prob, cert, obs, seed)
    t0, t1, step = _window(cfg)
    run = run_observer_experiment(
        prob, obs, _initial_state(cfg, prob), t0, t1, step, cert=cert, lipschitz=lip,
        transient_cutoff=cfg.get("transient_cutoff"), beta_hat=cfg.get("overrides", {}).get("beta_hat"),
    )
    names = state_names(prob)
    true = run.true_trajectory
    Trajectory(true.times, true.states, true.field_label, names).to_csv(os.path.join(out, "true_trajectory.csv"))
    obs_names = state_names(prob, obs)
    Trajectory(run.observer_trajectory.times, run.observer_trajectory.states,
               run.observer_trajectory.field_label, obs_names).to_csv(os.path.join(out, "observer_trajectory.csv"))
    thm1 = run.reports["thm1_tracking_observer"]
    err = weighted_norms(_metric_theta(cert, metric), run.observer_trajectory.states[:, :N] - run.optimum)
    _error_csv(os.path.join(out, "error.csv"), run.true_trajectory.times, err, ("bound", thm1.predicted))
    with open(os.path.join(out, "bounds.csv"), "w") as fh:
        fh.write(thm1.csv_header() + "\n")
        for key in sorted(run.reports):
            fh.write(run.reports[key].to_csv_row() + "\n")
    write_json({
        "version": CONFIG_VERSION,
        "certificate": cert.to_dict(),
        "lipschitz": lip.to_dict(),
        "beta_hat": run.beta_hat,
        "sup_rate": run.sup_rate,
        "transient_cutoff": run.transient_cutoff,
        "reports": {k: r.to_dict() for k, r in run.reports.items()},
        "satisfied": run.satisfied,
    }, os.path.join(out, "bounds.json"))
    return {"beta": cert.beta, "satisfied": run.satisfied}


def cmd_agc_demo(cfg, out, seed, metric):
    section = {k: v for k, v in cfg["agc"].items() if k != "integration"}
    agc_cfg = agc_mod.AgcConfig.from_dict(section)
    t0, t1, step = _window(cfg, "agc")
    demo = agc_mod.run_agc_demo(agc_cfg, t0, t1, step, out_dir=out, metric=metric)
    demo.delayed.to_csv(os.path.join(out, "agc_delayed.csv"))
    demo.true.to_csv(os.path.join(out, "agc_true.csv"))
    return {"beta": demo.certificate.beta, "satisfied": demo.report.satisfied}


def cmd_hierarchy_demo(cfg, out, seed, metric):
    section = dict(cfg["hierarchy"])
    exo = signal_from_dict(section.pop("exogenous"), "hierarchy.exogenous")
    init = section.pop("initial_states", [[0.0], [0.0]])
    section.pop("integration", None)
    layers = hierarchy.linear_cascade(**section)
    t0, t1, step = _window(cfg, "hierarchy")
    run = hierarchy.simulate_stack(layers, init, exo, t0, t1, step, cfg.get("transient_cutoff"))
    for traj in run.trajectories:
        traj.to_csv(os.path.join(out, f"{traj.field_label}.csv"))
    write_json({
        "version": CONFIG_VERSION,
        "taus": [{"gamma": g, "tau": t} for g, t in run.taus],
        "transient_cutoff": run.transient_cutoff,
        "reports": [r.to_dict() for r in run.reports],
        "satisfied": run.satisfied,
    }, os.path.join(out, "hierarchy_report.json"))
    return {"satisfied": run.satisfied}


HANDLERS = {
    "certify": cmd_certify,
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "agc-demo": cmd_agc_demo,
    "hierarchy-demo": cmd_hierarchy_demo,
}


def run_command(command, cfg, out, seed=0, metric="theta"):
    """Run one subcommand and write its artifacts into ``out``; returns a short summary."""
    os.makedirs(out, exist_ok=True)
    return HANDLERS[command](cfg, out, seed, metric)


def parse_sweep(text):
    """``param=start:stop:count`` -> ``(dotted path, values)``."""
    try:
        param, rng = text.split("=", 1)
        start, stop, count = rng.split(":")
        values = np.linspace(float(start), float(stop), int(count))
    except ValueError:
        raise SchemaError(f"--sweep {text!r}: expected param=start:stop:count", "--sweep") from None
    if int(count) < 1 or not param:
        raise SchemaError(f"--sweep {text!r}: need a parameter name and count >= 1", "--sweep")
    return param, values


def set_path(cfg, dotted, value):
    """Copy of ``cfg`` with the entry at ``a.b.c`` replaced; the entry must already exist."""
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise SchemaError(f"--sweep: config has no entry {dotted!r}", dotted)
        node = node[key]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise SchemaError(f"--sweep: config has no entry {dotted!r}", dotted)
    if isinstance(node[keys[-1]], int) and float(value).is_integer():
        value = int(value)
    node[keys[-1]] = value
    return validate_config(out)


def _classify(exc):
    if isinstance(exc, ConditionError):
        return 2, f"condition violated ({exc.condition}): {exc}"
    return 1, f"error: {exc}"


def run_sweep(command, cfg, out, param, values, seed, metric, workers=None):
    cases = [(i, float(v), set_path(cfg, param, float(v))) for i, v in enumerate(values)]

    def one(case):
        i, v, case_cfg = case
        sub = os.path.join(out, f"case_{i:03d}")
        try:
            summary = run_command(command, case_cfg, sub, seed, metric)
            return i, v, 0, summary.get("satisfied"), ""
        except (PDContractError, OSError, ValueError) as exc:
            code, msg = _classify(exc)
            return i, v, code, None, msg

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, cases))
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case", param, "exit_code", "satisfied", "message"])
        for i, v, code, sat, msg in results:
            writer.writerow([f"case_{i:03d}", repr(v), code, "" if sat is None else str(sat).lower(), msg])
    return results


def build_parser():
    parser = argparse.ArgumentParser(prog="pdcontract", description="Primal-dual contraction toolkit.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run config (defaults to the shipped config)")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed for sampled Lipschitz estimation")
    parser.add_argument("--sweep", help="param=start:stop:count over a dotted config entry")
    parser.add_argument("--metric", choices=("theta", "euclidean"), default="theta",
                        help="metric for emitted error series")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if args.sweep:
            param, values = parse_sweep(args.sweep)
            results = run_sweep(args.command, cfg, args.out, param, values, seed, args.metric)
            for i, v, code, sat, msg in results:
                if msg:
                    print(f"case_{i:03d} ({param}={v:g}): {msg}", file=sys.stderr)
            print(f"{len(results)} cases written to {args.out}")
            codes = {r[2] for r in results}
            return 2 if 2 in codes else (1 if 1 in codes else 0)
        summary = run_command(args.command, cfg, args.out, seed, args.metric)
    except ConditionError as exc:
        print(_classify(exc)[1], file=sys.stderr)
        return 2
    except (PDContractError, OSError, ValueError) as exc:
        print(_classify(exc)[1], file=sys.stderr)
        return 1
    parts = [f"{k}={v}" for k, v in sorted(summary.items())]
    print(f"{args.command}: " + " ".join(parts))
    return 0


if __name__ == "__main__":
    sys.exit(main())
