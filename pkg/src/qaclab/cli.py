"""``qac-lab run <config>``: run one bound-verification task and write its report.

Config files are flat YAML mappings with ``schema_version: 1``, a ``task`` and,
for path tasks, a ``model`` such as ``grover(16)`` or ``random_gapped(8, 0.3, 7)``.
Exit status is 0 when every record passes, 1 on a bound failure or numerical
breakdown, and 2 on an invalid config.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from . import __version__
from ._validation import ValidationError
from .family import scan_gap, spectrum
from .fixedpoint import FixedPointNumber, OpCounter, fx_arcsin_sqrt, fx_erfc, fx_exp_neg_sq
from .gaps import (Schedule, check_segment_bounds, greedy_schedule, grover_gap, level_sets,
                   profile_from_family)
from .ground_state import prepare_ground_state
from .linalg import phase_aligned_distance
from .models import generate_model, parse_model
from .propagation import prepare_eigenstate
from .qac import (QacParams, bin_masses, choose_parameters, discretization_residual,
                  tracking_residual)
from .resources import (estimate_eigenstate_cost, estimate_gap_adaptive,
                        estimate_generator_oracle, estimate_ground_state_cost,
                        monotonicity_suite)
from .stateprep import build_state_exact, build_state_quantized, qubit_count

SCHEMA_VERSION = 1
COMMON_KEYS = {"schema_version": int, "task": str, "model": str, "level": int,
               "seed": int, "output": str}
TRACKING_SLACK = 1e-9
KERNEL_INPUT_BITS = 60


class ConfigError(ValidationError):
    pass


# task name -> (needs a model, {key: (type, default)})
TASKS = {
    "tracking": (True, {"points": (int, 21), "delta": (float, None)}),
    "discretization": (True, {"points": (int, 11), "delta": (float, 1.0), "T": (float, 4.0),
                              "N": (int, 128)}),
    "eigenstate": (True, {"epsilon": (float, 1e-2)}),
    "ground_state": (True, {"epsilon": (float, 1e-2), "gamma1": (float, None),
                            "c": (float, 0.25), "c_T": (float, 4.0), "filter": (str, "exact")}),
    "schedule": (True, {"c": (float, 0.2), "grid_points": (int, 2001)}),
    "estimate": (False, {"alpha": (float, 1.0), "beta": (float, 1.0), "gamma": (float, 0.1),
                         "gamma1": (float, 0.1), "epsilon": (float, 1e-3), "n_a": (int, 2),
                         "n_b": (int, 2), "n_s": (int, 4), "samples": (int, 1000)}),
    "kernels": (False, {"delta_bits": (int, 20), "points": (int, 1000)}),
    "stateprep": (False, {"delta": (float, 1.0), "T": (float, 4.0), "N": (int, 64),
                          "bits": (int, 6)}),
}


def _coerce(key, value, typ):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is str and isinstance(value, str):
        return value
    raise ConfigError(f"config key {key!r} must be of type {typ.__name__}, got {value!r}")


def load_config(path, task_override=None, seed_override=None) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    return validate_config(raw, task_override, seed_override)


def validate_config(raw, task_override=None, seed_override=None) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat key-value mapping")
    raw = dict(raw)
    if task_override is not None:
        raw["task"] = task_override
    if seed_override is not None:
        raw["seed"] = seed_override
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {sorted(TASKS)}, got {task!r}")
    needs_model, spec = TASKS[task]
    cfg = {"schema_version": SCHEMA_VERSION, "task": task, "seed": 0, "level": 0}
    for key, value in raw.items():
        if isinstance(value, (dict, list)):
            raise ConfigError(f"config key {key!r} must be a scalar")
        if key in COMMON_KEYS:
            cfg[key] = _coerce(key, value, COMMON_KEYS[key])
        elif key in spec:
            cfg[key] = _coerce(key, value, spec[key][0])
        else:
            raise ConfigError(f"unknown key {key!r} for task {task!r}")
    for key, (_, default) in spec.items():
        cfg.setdefault(key, default)
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if needs_model:
        if "model" not in cfg:
            raise ConfigError(f"task {task!r} needs a model")
        check_model_spec(cfg["model"])
    if task == "kernels" and not 1 <= cfg["delta_bits"] <= 44:
        raise ConfigError("delta_bits must lie in 1..44 (double-precision reference)")
    return cfg


# model name -> argument converters
MODEL_ARGS = {"grover": (int,), "random_gapped": (int, float, int), "ising": (int, float),
              "explicit": (str,)}


def check_model_spec(spec: str):
    name, args = parse_model(spec)
    if name not in MODEL_ARGS:
        raise ConfigError(f"unknown model {name!r}; expected one of {sorted(MODEL_ARGS)}")
    conv = MODEL_ARGS[name]
    if len(args) != len(conv):
        raise ConfigError(f"model {name} takes {len(conv)} argument(s), got {len(args)}")
    for a, f in zip(args, conv):
        try:
            f(a)
        except ValueError:
            raise ConfigError(f"bad argument {a!r} in model {spec!r}") from None


def _record(name, bound, lhs, rhs, passed=None, **inputs):
    lhs, rhs = float(lhs), float(rhs)
    return {"name": name, "bound": bound, "inputs": inputs, "lhs": lhs, "rhs": rhs,
            "pass": bool(lhs <= rhs if passed is None else passed)}


# -- tasks -----------------------------------------------------------------


def _task_tracking(cfg, fam):
    gamma, _ = scan_gap(fam, cfg["level"])
    delta = cfg["delta"] or gamma / 2
    records, curve = [], []
    for s in np.linspace(0, 1, cfg["points"]):
        lhs, rhs = tracking_residual(fam, float(s), cfg["level"], delta)
        rec = _record("tracking residual", "generator tracking residual <= "
                      "exp(-g^2/(2 delta^2)) ||H'|| / g", lhs, rhs,
                      lhs <= rhs + TRACKING_SLACK, s=float(s), delta=delta)
        records.append(rec)
        curve.append((float(s), rec["lhs"], rec["rhs"], rec["pass"]))
    return records, {"tracking": curve}, {"gamma": gamma, "delta": delta}


def _task_discretization(cfg, fam):
    params = QacParams(cfg["delta"], cfg["T"], cfg["N"])
    records, curve = [], []
    for s in np.linspace(0, 1, cfg["points"]):
        lhs, rhs = discretization_residual(fam, float(s), params)
        rec = _record("discretization residual", "discretized generator error <= "
                      "filter truncation + bin width terms", lhs, rhs, s=float(s),
                      delta=params.delta, T=params.T, N=params.N)
        records.append(rec)
        curve.append((float(s), rec["lhs"], rec["rhs"], rec["pass"]))
    return records, {"discretization": curve}, {}


def _task_eigenstate(cfg, fam):
    eps = cfg["epsilon"]
    _, err, run = prepare_eigenstate(fam, cfg["level"], eps)
    rec = _record("eigenstate error", "segmented propagation error <= epsilon", err, eps,
                  epsilon=eps, level=cfg["level"])
    return [rec], {}, {"segments": run.segment_count, "grid_work": run.grid_work,
                       "gamma": run.gamma}


def _task_ground_state(cfg, fam):
    eps = cfg["epsilon"]
    _, err, run = prepare_ground_state(fam, cfg["gamma1"], eps, cfg["c"], cfg["c_T"],
                                       cfg["filter"])
    E1 = spectrum(fam, 1.0)
    prep = run.prepared
    adiabatic = phase_aligned_distance(E1.eigenvectors[:, 0], prep.state)
    gamma1 = run.gamma1
    return [
        _record("adiabatic preparation", "distance after time T = c_T beta/gamma^2 <= 1/c_T",
                adiabatic, 1 / cfg["c_T"], T=prep.T, c_T=cfg["c_T"]),
        _record("energy estimate", "|E_hat - E_0| <= c gamma1",
                abs(run.energy.value - E1.eigenvalues[0]), cfg["c"] * gamma1, c=cfg["c"],
                gamma1=gamma1),
        _record("ground state error", "filtered state error <= epsilon", err, eps, epsilon=eps),
    ], {}, {"overlap": prep.overlap_eta, "filter_degree": run.filter_degree,
            "bisection_rounds": run.energy.iterations}


def _task_schedule(cfg, fam_spec):
    name, args = parse_model(fam_spec)
    if name == "grover":
        profile = grover_gap(int(args[0]))
    else:
        fam = generate_model(fam_spec, cfg["level"])
        profile = profile_from_family(fam, cfg["level"], cfg["grid_points"])
    sched = greedy_schedule(profile, cfg["c"])
    ls = level_sets(profile)
    rep = check_segment_bounds(sched, profile, ls.L, ls.R)
    inputs = {"c": rep.c, "L": rep.L, "R": rep.R, "gamma": rep.gamma}
    records = [
        _record("segment count", "q <= (floor(log2(alpha/gamma)) + 2)(2L/c + R)",
                rep.q, rep.q_bound, **inputs),
        _record("inverse gap sum", "sum 1/gamma_i <= 4/(1-4c) (2L/c + R)/gamma",
                rep.inverse_gap_sum, rep.inverse_gap_bound, **inputs),
        _record("step rule", "segment lengths within [c0, c] gamma/alpha",
                rep.details["step_violation"], 1e-12, c=rep.c),
    ]
    curve = [(float(s), float(g), float(profile(s)), True)
             for s, g in zip(sched.points[:-1], sched.gammas)]
    return records, {"schedule": curve}, {"q": rep.q, "levels": [list(x) for x in ls.levels],
                                          "resolution": ls.resolution}


def _task_estimate(cfg):
    a, b, g, g1, e = (cfg[k] for k in ("alpha", "beta", "gamma", "gamma1", "epsilon"))
    na, nb, ns = cfg["n_a"], cfg["n_b"], cfg["n_s"]
    eig = estimate_eigenstate_cost(a, b, g, e, na, nb, ns)
    ground = estimate_ground_state_cost(a, b, g, g1, e, na, ns)
    single = Schedule(np.array([0.0, 1.0]), np.array([g]), 0.2, a)
    adaptive = estimate_gap_adaptive(single, a, b, e, na, nb, ns)
    records = [_record("single segment", "gap-adaptive sum over one segment equals "
                       "the eigenstate estimate", abs(adaptive.queries_H0H1 - eig.queries_H0H1)
                       + abs(adaptive.gates - eig.gates) + abs(adaptive.qubits - eig.qubits), 0.0)]
    counts = monotonicity_suite(cfg["samples"], cfg["seed"], greedy_schedule(grover_gap(16)))
    for prop, bad in sorted(counts.items()):
        records.append(_record("monotonicity", f"cost nondecreasing as {prop}", bad, 0,
                               samples=cfg["samples"]))
    values = {"eigenstate": eig.as_dict(), "ground_state": ground.as_dict()}
    try:
        params = choose_parameters(a, b, g, e)
        q, gv, gw, anc = estimate_generator_oracle(params, e, na)
        values["generator_oracle"] = {"queries": q, "g_V": gv, "g_W": gw, "ancillas": anc}
    except ValidationError as exc:
        values["generator_oracle"] = {"error": str(exc)}
    return records, {}, values


_KERNELS = {
    "arcsin_sqrt": (fx_arcsin_sqrt, 0, 1, lambda v: math.asin(math.sqrt(v))),
    "exp_neg_sq": (fx_exp_neg_sq, -4, 4, lambda v: math.exp(-v * v)),
    "erfc": (fx_erfc, -5, 5, math.erfc),
}


def _task_kernels(cfg):
    bits = cfg["delta_bits"]
    delta = 2.0 ** -bits
    n = cfg["points"]
    records, curves, values = [], {}, {}
    for name, (kernel, lo, hi, ref) in _KERNELS.items():
        worst, cost, curve = 0.0, 0, []
        for i in range(n):
            v = Fraction(lo) + Fraction(hi - lo) * Fraction(i, max(n - 1, 1))
            x = FixedPointNumber.from_value(v, KERNEL_INPUT_BITS, 4)
            res, ops = kernel(x, delta, ops=OpCounter())
            err = abs(res.to_float() - ref(x.to_float()))
            worst = max(worst, err)
            cost += ops.bit_cost
            curve.append((x.to_float(), err, delta, err <= delta))
        records.append(_record(f"{name} accuracy", "|kernel - reference| <= delta", worst,
                               delta, kernel=name, delta_bits=bits, points=n))
        curves[name] = curve
        values[name] = {"mean_bit_cost": cost / n, "C": cost / n / bits ** 3}
    return records, curves, values


def _task_stateprep(cfg):
    params = QacParams(cfg["delta"], cfg["T"], cfg["N"])
    state = build_state_exact(params)
    m = bin_masses(params.delta, params.T, params.N, np.arange(1, params.N + 1))
    target = np.zeros(len(state))
    target[:params.N] = np.sqrt(m / m.sum())
    qstate, bound = build_state_quantized(params, cfg["bits"])
    return [
        _record("exact cascade", "max |amplitude - sqrt(W_n)| <= 1e-12",
                np.abs(state - target).max(), 1e-12, N=params.N),
        _record("quantized cascade", "distance <= ceil(log2 N) 2 pi 2^-(b+1)",
                np.linalg.norm(qstate - state), bound, N=params.N, bits=cfg["bits"]),
    ], {}, {"qubits": qubit_count(params.N)}


def run_task(cfg: dict):
    """Dispatch ``cfg`` and return ``(report, curves)``."""
    task = cfg["task"]
    if task == "schedule":
        out = _task_schedule(cfg, cfg["model"])
    elif TASKS[task][0]:
        fam = generate_model(cfg["model"], cfg["level"])
        out = globals()[f"_task_{task}"](cfg, fam)
    else:
        out = globals()[f"_task_{task}"](cfg)
    records, curves, values = out
    report = {"tool": "qac-lab", "version": __version__, "config": cfg, "records": records,
              "values": values, "pass": all(r["pass"] for r in records)}
    return report, curves


def _clean(obj):
    # JSON has no inf/nan; write them as strings so the output stays standard
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(report, curves, out_dir: Path, fmt: str, elapsed: float):
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        report = {**report, "curves": {k: [list(r) for r in v] for k, v in curves.items()}}
    else:
        for name, rows in curves.items():
            with open(out_dir / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["x", "lhs", "rhs", "pass"])
                for x, lhs, rhs, ok in rows:
                    w.writerow([repr(float(x)), repr(float(lhs)), repr(float(rhs)),
                                "true" if ok else "false"])
    (out_dir / "report.json").write_text(
        json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n")
    # wall-clock times vary run to run, so they live outside the report
    (out_dir / "timings.json").write_text(json.dumps({"seconds": round(elapsed, 3)}) + "\n")


def build_parser():
    p = argparse.ArgumentParser(prog="qac-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one or more experiment configs")
    run.add_argument("configs", nargs="+", help="YAML config files")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--output-dir", help="directory for reports (default: config 'output' "
                     "or ./qac-out/<config name>)")
    run.add_argument("--threads", type=int, default=1, help="BLAS threads (default 1)")
    run.add_argument("--task", choices=sorted(TASKS), help="override the config task")
    run.add_argument("--format", choices=("json", "csv"), default="json",
                     help="curve output: embedded in the JSON report or as CSV files")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    configs = []
    for path in args.configs:
        try:
            configs.append((path, load_config(path, args.task, args.seed)))
        except ValidationError as exc:
            print(f"{path}: invalid config: {exc}", file=sys.stderr)
            return 2
    status = 0
    for path, cfg in configs:
        if args.output_dir:
            out_dir = Path(args.output_dir)
            if len(configs) > 1:
                out_dir = out_dir / Path(path).stem
        else:
            out_dir = Path(cfg.get("output") or Path("qac-out") / Path(path).stem)
        start = time.perf_counter()
        try:
            with threadpool_limits(limits=args.threads):
                report, curves = run_task(cfg)
        except ValidationError as exc:
            report = {"tool": "qac-lab", "version": __version__, "config": cfg,
                      "records": [], "values": {}, "pass": False,
                      "error": f"{type(exc).__name__}: {exc}"}
            curves = {}
        except RuntimeError as exc:
            report = {"tool": "qac-lab", "version": __version__, "config": cfg,
                      "records": [], "values": {}, "pass": False,
                      "error": f"{type(exc).__name__}: {exc}"}
            curves = {}
        write_outputs(report, curves, out_dir, args.format, time.perf_counter() - start)
        failed = [r for r in report["records"] if not r["pass"]]
        for r in failed:
            print(f"{path}: FAIL {r['name']} [{r['bound']}] lhs={r['lhs']:.6g} "
                  f"rhs={r['rhs']:.6g} inputs={r['inputs']}", file=sys.stderr)
        if "error" in report:
            print(f"{path}: FAIL {report['error']}", file=sys.stderr)
        if not report["pass"]:
            status = 1
        print(f"{path}: {'PASS' if report['pass'] else 'FAIL'} -> {out_dir / 'report.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
