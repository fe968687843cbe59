"""Command-line front end: ``fqcp <subcommand> [flags]``.

Flags override values read from ``--config`` (an INI file whose keys sit in
a ``[run]`` section or in a section named after the subcommand).  Every
output directory gets a ``run.json`` holding the resolved configuration and
the seeds actually used.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from . import adaptive as ad
from .analysis import bootstrap_se, crossing_estimate, effective_exponent
from .errors import (
    BudgetExceeded,
    DegenerateRate,
    DetectionExceedsTarget,
    FQCPError,
    InvalidParams,
    InvariantViolation,
    NoCrossing,
    NonpositiveValue,
    NotNormalized,
    TooFewSamples,
    TooManyQubits,
    UnknownKind,
    WindowTooLarge,
)
from .model import ModelParams, build_circuit
from .rng import derive_seed

log = logging.getLogger("fqcp")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_INVARIANT = 0, 2, 3, 4

_EXIT_FOR = (
    ((InvalidParams, UnknownKind, DetectionExceedsTarget, DegenerateRate), EXIT_CONFIG),
    ((BudgetExceeded, WindowTooLarge, TooManyQubits), EXIT_RESOURCE),
    ((InvariantViolation, NotNormalized, NonpositiveValue, NoCrossing, TooFewSamples), EXIT_INVARIANT),
)

DEFAULTS = {
    "theta": 3 * math.pi / 4,
    "p": None,
    "p_grid": None,
    "t": 10,
    "dt": 1,
    "shots": 10000,
    "calib_shots": None,
    "seed": 0,
    "threads": 1,
    "out": "out",
    "backend": "synthetic",
    "strict_reweight": False,
    "store_shots": False,
    "detect_field": None,
    "live_cap": 13,
    "records": None,
    "rates": None,
    "series": None,
    "times": None,
    "resamples": 200,
    "p1": 0.0,
    "p2": 0.0,
    "p_mem": 0.0,
    "p_meas": 0.0,
}

_TYPES = {
    "theta": float, "p": float, "t": int, "dt": int, "shots": int, "calib_shots": int,
    "seed": int, "threads": int, "live_cap": int, "resamples": int,
    "p1": float, "p2": float, "p_mem": float, "p_meas": float,
}
_BOOLS = {"strict_reweight", "store_shots"}


class ConfigError(InvalidParams):
    pass


# -- config ------------------------------------------------------------------


def _parse_grid(text):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


def _parse_times(text):
    if text is None:
        return None
    return [int(v) for v in str(text).replace(",", " ").split()]


def load_config_file(path, command):
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    out = {}
    for section in ("run", command):
        if cp.has_section(section):
            for k, v in cp.items(section):
                out[k.replace("-", "_")] = v
    unknown = set(out) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return out


def resolve(args):
    """Merge defaults, config file and flags (flags win) into a plain dict."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config, args.command))
    for k in DEFAULTS:
        v = getattr(args, k, None)
        if v is not None and v is not False:
            cfg[k] = v
    try:
        for k, f in _TYPES.items():
            if cfg[k] is not None:
                cfg[k] = f(cfg[k])
        for k in _BOOLS:
            if isinstance(cfg[k], str):
                cfg[k] = cfg[k].strip().lower() in ("1", "true", "yes", "on")
        cfg["p_grid"] = _parse_grid(cfg["p_grid"])
        cfg["times"] = _parse_times(cfg["times"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg["command"] = args.command
    validate(cfg)
    return cfg


def validate(cfg):
    cmd = cfg["command"]
    if cfg["t"] < 0 or cfg["dt"] < 1 or cfg["shots"] < 1 or cfg["threads"] < 1:
        raise ConfigError("t >= 0, dt >= 1, shots >= 1 and threads >= 1 are required")
    if not math.isfinite(cfg["theta"]):
        raise ConfigError("theta must be finite")
    for p in p_values(cfg, required=False):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"p={p} outside [0, 1]")
    if cmd in ("dephased", "dm") and not p_values(cfg, required=False):
        raise ConfigError(f"{cmd} needs --p or --p-grid")
    if cmd in ("adaptive", "reweight") and cfg["p"] is None:
        raise ConfigError(f"{cmd} needs --p")
    if cmd == "reweight" and not cfg["records"]:
        raise ConfigError("reweight needs --records")
    if cmd == "analyze" and not cfg["series"]:
        raise ConfigError("analyze needs --series")
    if cmd == "adaptive" and cfg["backend"] not in ("synthetic", "physical_trajectory"):
        raise ConfigError(f"unknown backend {cfg['backend']}")


def p_values(cfg, required=True):
    if cfg.get("p_grid"):
        return list(cfg["p_grid"])
    if cfg.get("p") is not None:
        return [cfg["p"]]
    if required:
        raise ConfigError("no p value given")
    return []


# -- output helpers --------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(out, cfg, seeds, extra=None):
    obj = {"config": {k: v for k, v in sorted(cfg.items())}, "seeds": seeds}
    if extra:
        obj.update(extra)
    write_json(os.path.join(out, "run.json"), obj)


def _outdir(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


# -- subcommands ---------------------------------------------------------------


def cmd_dephased(cfg):
    from .dephased import run_ensemble

    out = _outdir(cfg)
    series_rows, dens_rows, seeds = [], [], {}
    for p in p_values(cfg):
        seed = derive_seed(cfg["seed"], f"dephased:p={p!r}")
        seeds[repr(p)] = seed
        circuit = build_circuit(ModelParams(cfg["theta"], p, cfg["t"]))
        s = run_ensemble(circuit, cfg["theta"], p, cfg["shots"], seed, threads=cfg["threads"])
        for t in range(s.t_max + 1):
            series_rows.append((p, t, s.n_right[t], s.n_right_se[t]))
            for i, r in enumerate(s.sites):
                if s.density[t, i]:
                    dens_rows.append((p, t, int(r), s.density[t, i]))
        log.info("dephased p=%s: N_R(t_max)=%.6g", p, s.n_right[-1])
    write_csv(os.path.join(out, "series.csv"), ["p", "t", "n_right", "se"], series_rows)
    write_csv(os.path.join(out, "density.csv"), ["p", "t", "r", "n"], dens_rows)
    write_run(out, cfg, seeds)
    return EXIT_OK


def dm_resources(t_max, theta=1.0):
    """Per-t resource report for the exact simulator and the encoded circuit."""
    from .dm import build_reuse_schedule

    rows = []
    for t in range(1, t_max + 1):
        circuit = build_circuit(ModelParams(theta, 0.0, t))
        sched = build_reuse_schedule(circuit)
        rows.append({
            "t": t,
            "logical_blocks": len(circuit.blocks()),
            "sites_without_reuse": circuit.n_sites,
            "sites_with_reuse": sched.max_live,
            "physical_qubits_without_reuse": 4 * len(circuit.blocks()) + 2,
            "physical_qubits_with_reuse": 4 * math.ceil(sched.max_live / 2) + 2,
            "two_qubit_gates": sched.gate_count(),
        })
    return rows


def cmd_dm(cfg):
    from .dm import DensityWindow, build_reuse_schedule, run_schedule, _series_from_records

    out = _outdir(cfg)
    circuit = build_circuit(ModelParams(cfg["theta"], 0.0, cfg["t"]))
    sched = build_reuse_schedule(circuit)
    if sched.max_live > cfg["live_cap"]:
        raise WindowTooLarge(f"schedule needs {sched.max_live} live sites (cap {cfg['live_cap']})")
    prof_rows, series_rows = [], []
    executed = {}
    for p in p_values(cfg):
        n_gates = [0]

        def count(ins, _w):
            if ins[0] == "gate":
                n_gates[0] += 1

        w = run_schedule(sched, cfg["theta"], p, DensityWindow(), on_step=count)
        executed[repr(p)] = n_gates[0]
        if n_gates[0] != sched.gate_count():
            raise InvariantViolation("executed gate count differs from the schedule")
        s = _series_from_records(w.recorded, circuit)
        for t in range(s.t_max + 1):
            series_rows.append((p, t, s.n_right[t]))
            for i, r in enumerate(s.sites):
                prof_rows.append((p, t, int(r), s.density[t, i]))
    write_csv(os.path.join(out, "profiles.csv"), ["p", "t", "r", "n"], prof_rows)
    write_csv(os.path.join(out, "series.csv"), ["p", "t", "n_right"], series_rows)
    resources = dm_resources(cfg["t"], cfg["theta"])
    if resources and resources[-1]["two_qubit_gates"] != sched.gate_count():
        raise InvariantViolation("resource report disagrees with the executed schedule")
    write_json(os.path.join(out, "resources.json"), {
        "max_live": sched.max_live, "gates_executed": executed, "per_t": resources})
    write_run(out, cfg, {})
    return EXIT_OK


def ft_reports():
    from .code422 import accepted_branch, build_gadget, ft_check

    gadgets = [
        build_gadget("stab_meas"),
        accepted_branch(build_gadget("reset_00")),
        build_gadget("meas_Z1"),
        build_gadget("meas_Z2"),
        build_gadget("crx_intra", theta=math.pi, control=1),
        build_gadget("crx_intra", theta=math.pi, control=2),
        build_gadget("crx_inter", theta=math.pi),
    ]
    return [ft_check(g) for g in gadgets]


def cmd_ftcheck(cfg):
    out = _outdir(cfg)
    reports = ft_reports()
    for r in reports:
        print(f"{r.gadget:24s} {'FT' if r.fault_tolerant else 'not FT'}"
              f"  faults={r.n_faults} witnesses={len(r.witnesses)}")
    write_json(os.path.join(out, "ftcheck.json"), [r.to_dict() for r in reports])
    write_run(out, cfg, {})
    return EXIT_OK


def _backend(cfg):
    if cfg["backend"] == "synthetic":
        detect = None
        if cfg["detect_field"]:
            detect = ad.RateField.read_csv(cfg["detect_field"])
        return ad.make_backend("synthetic", theta=cfg["theta"], detect_field=detect)
    return ad.make_backend("physical_trajectory", theta=cfg["theta"], p1=cfg["p1"],
                           p2=cfg["p2"], p_mem=cfg["p_mem"], p_meas=cfg["p_meas"])


def cmd_adaptive(cfg):
    out = _outdir(cfg)
    circuit = build_circuit(ModelParams(cfg["theta"], cfg["p"], cfg["t"]))
    backend = _backend(cfg)
    if getattr(backend, "detect_field", None) is not None and not backend.detect_field.matches(circuit):
        raise ConfigError("detection field does not cover the circuit's reset slots")
    calib_shots = cfg["calib_shots"] or cfg["shots"]
    cal = ad.run_calibration(circuit, backend, calib_shots, cfg["seed"], threads=cfg["threads"])
    inj = ad.injection_field(cfg["p"], cal)
    records = ad.run_main(circuit, backend, inj, cfg["shots"], cfg["seed"], threads=cfg["threads"])
    for rec in records:
        for slot, kind in rec.events.items():
            if kind in ad.DETECTED_KINDS and rec.m(*slot) != 1:
                raise InvariantViolation(f"detection without reset at {slot}")
    emp = ad.empirical_rates(records, circuit)
    cal.write_csv(os.path.join(out, "calibration.csv"))
    inj.write_csv(os.path.join(out, "injection.csv"))
    emp.field.write_csv(os.path.join(out, "rates.csv"))
    ad.write_records(os.path.join(out, "records.jsonl"), records)
    write_json(os.path.join(out, "resources.json"), {"per_t": dm_resources(cfg["t"], cfg["theta"])})
    seeds = {"calibration": derive_seed(cfg["seed"], "calibration"),
             "main": derive_seed(cfg["seed"], "main")}
    write_run(out, cfg, seeds, {"degenerate": [list(pt) for pt in emp.degenerate]})
    print(f"max |p_hat - p| = {max(abs(v - cfg['p']) for v in emp.field.values.values()):.4g}")
    return EXIT_OK


def cmd_reweight(cfg):
    out = _outdir(cfg)
    records = ad.read_records(cfg["records"])
    if cfg["rates"]:
        emp = ad.RateField.read_csv(cfg["rates"])
    else:
        emp = ad.empirical_rates(records).field
    res = ad.reweight(records, cfg["p"], emp, strict=cfg["strict_reweight"])
    write_csv(os.path.join(out, "reweighted_rates.csv"), ["t", "r", "p", "se"],
              [(t, r, res.reset_rate[(r, t)], res.reset_rate_se[(r, t)]) for r, t in emp.points()])
    write_csv(os.path.join(out, "reweighted_series.csv"), ["t", "n_right", "se"],
              [(t, res.n_right[t], res.n_right_se[t]) for t in range(len(res.n_right))])
    write_csv(os.path.join(out, "weights.csv"), ["shot", "weight"],
              [(rec.shot, w) for rec, w in zip(records, res.weights)])
    write_run(out, cfg, {}, {"mean_weight": res.mean_weight, "weight_se": res.weight_se,
                             "clipped": [list(pt) for pt in res.clipped]})
    print(f"mean weight {res.mean_weight:.4f} +- {res.weight_se:.4f}; clipped {len(res.clipped)}")
    return EXIT_OK


def read_series(path):
    curves = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            p = float(row["p"]) if row.get("p") not in (None, "") else 0.0
            curves.setdefault(p, {})[int(row["t"])] = float(row["n_right"])
    return curves


def cmd_analyze(cfg):
    out = _outdir(cfg)
    curves = read_series(cfg["series"])
    exps = {p: effective_exponent(s, cfg["dt"], p=p) for p, s in curves.items()}
    rows = [(p, t, e.at(t)) for p, e in sorted(exps.items()) for t in e.times()]
    write_csv(os.path.join(out, "exponents.csv"), ["p", "t", "delta"], rows)
    extra = {}
    if len(exps) >= 2:
        times = cfg["times"] or sorted(set.intersection(*(set(e.times()) for e in exps.values())))
        cr = crossing_estimate(exps, times)
        write_json(os.path.join(out, "crossing.json"), cr.to_dict())
        print(f"p_c = {cr.p_c:.4f} +- {cr.p_scatter:.4f}, delta_c = {cr.delta_c:.4f}")
        extra["crossing"] = cr.to_dict()
    if cfg["records"]:
        records = ad.read_records(cfg["records"])
        vals = np.array([rec.n_right for rec in records], dtype=float)
        w = np.array([rec.weight if rec.weight is not None else 1.0 for rec in records])
        se = bootstrap_se(vals, resamples=cfg["resamples"], seed=cfg["seed"], weights=w)
        mean = (w[:, None] * vals).sum(axis=0) / len(records)
        write_csv(os.path.join(out, "bootstrap.csv"), ["t", "n_right", "se"],
                  [(t, mean[t], se[t]) for t in range(len(mean))])
    write_run(out, cfg, {}, extra)
    return EXIT_OK


COMMANDS = {
    "dephased": cmd_dephased,
    "dm": cmd_dm,
    "ftcheck": cmd_ftcheck,
    "adaptive": cmd_adaptive,
    "reweight": cmd_reweight,
    "analyze": cmd_analyze,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fqcp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--p", type=float)
        sp.add_argument("--p-grid", dest="p_grid")
        sp.add_argument("--t", type=int)
        sp.add_argument("--dt", type=int)
        sp.add_argument("--shots", type=int)
        sp.add_argument("--store-shots", dest="store_shots", action="store_true")
        if name == "dm":
            sp.add_argument("--live-cap", dest="live_cap", type=int)
        if name == "adaptive":
            sp.add_argument("--backend", choices=("synthetic", "physical_trajectory"))
            sp.add_argument("--detect-field", dest="detect_field")
            sp.add_argument("--calib-shots", dest="calib_shots", type=int)
            for k in ("p1", "p2", "p_mem", "p_meas"):
                sp.add_argument("--" + k.replace("_", "-"), dest=k, type=float)
        if name == "reweight":
            sp.add_argument("--records")
            sp.add_argument("--rates")
            sp.add_argument("--strict-reweight", dest="strict_reweight", action="store_true")
        if name == "analyze":
            sp.add_argument("--series")
            sp.add_argument("--records")
            sp.add_argument("--times")
            sp.add_argument("--resamples", type=int)
    return parser


def run(cfg):
    return COMMANDS[cfg["command"]](cfg)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve(args)
        return run(cfg)
    except FQCPError as exc:
        for classes, code in _EXIT_FOR:
            if isinstance(exc, classes):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, KeyError, csv.Error, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
