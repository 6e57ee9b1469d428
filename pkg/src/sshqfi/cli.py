"""Command-line front end: traces, sweeps, robustness tables and convergence checks.

Every command writes a CSV plus a ``<name>.meta.json`` sidecar.  Options can
come from a flat ``key = value`` config file (``--config``); explicit flags
override it.

Exit codes: 0 success, 2 invalid input, 3 physics guard tripped under
``--strict``, 4 internal numerical failure.
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
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TimeGrid, spectrum, survival_amplitude, write_trace_csv
from .errors import (
    DimensionGuardError,
    InvalidParameterError,
    NoBoundStateError,
    RangeError,
    RecurrenceWarning,
)
from .greens import bound_state
from .lattice import ModelParams, band_edges, build_hamiltonian, check_horizon, recurrence_horizon
from .metrology import (
    diagnose,
    late_time_average,
    numerical_bound_state,
    orderings_consistent,
    qfi_trace,
    retention_time,
)

log = logging.getLogger("sshqfi")

EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_NUMERICAL = 0, 2, 3, 4
AUTO_EXACT_MAX_DIM = 1200
AXES = ("dimerization", "coupling", "detuning", "detuning_normalized")

DEFAULTS = {
    "J": 1.0,
    "d": 0.3,
    "g": 0.4,
    "delta": 0.0,
    "L": 500,
    "method": "auto",
    "m": 350,
    "tmax": 100.0,
    "dt": 0.05,
    "t1": 40.0,
    "t2": 100.0,
    "eta": 0.2,
    "eta_window": 0.4,
    "tcut": 20.0,
    "out": None,
    "workers": None,
    "strict": False,
    "axis": None,
    "values": None,
    "linspace": None,
    "etas": [0.15, 0.2, 0.25],
    "windows": ["30:90", "40:100", "50:100"],
    "L_factor": 2,
    "m_step": 50,
    "tol": 1e-6,
}

SUMMARY_COLUMNS = [
    "d", "g", "delta", "delta_norm", "f_bar", "t_eta", "t_eta_capped", "w_eta",
    "z_bs_num", "z_bs_analytic", "omega_bs", "delta_edge", "outer_weight",
]
SCAN_COLUMNS = [
    "d", "g", "delta", "delta_norm", "z_bs_num", "e_bs_num", "delta_edge_num",
    "z_bs_analytic", "omega_bs_analytic", "delta_edge_analytic", "f_bs", "f_bar", "outer_weight",
]


class GuardTripped(Exception):
    pass


def fmt(value) -> str:
    """Shortest round-trip text for numbers; lowercase booleans."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(row[c]) for c in columns])


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def write_meta(path, command, opts, extra, started) -> None:
    meta = {
        "tool": "sshqfi",
        "version": __version__,
        "command": command,
        "parameters": {k: v for k, v in sorted(opts.items()) if k not in ("config",)},
        "wall_clock_s": round(time.perf_counter() - started, 6),
    }
    meta.update(extra)
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


# --- configuration --------------------------------------------------------

_TYPES = {
    "J": float, "d": float, "g": float, "delta": float, "L": int, "method": str, "m": int,
    "tmax": float, "dt": float, "t1": float, "t2": float, "eta": float, "eta_window": float,
    "tcut": float, "out": str, "workers": int, "strict": bool, "axis": str, "values": "floats",
    "linspace": "floats", "etas": "floats", "windows": "strs", "L_factor": int, "m_step": int,
    "tol": float,
}


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; a section header is optional."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[sshqfi]\n" + text
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    cfg = {}
    for section in parser.sections():
        for key, raw in parser[section].items():
            key = key.replace("-", "_")
            kind = _TYPES.get(key)
            if kind is None:
                raise InvalidParameterError(f"unknown config key {key!r}")
            if kind is bool:
                cfg[key] = parser[section].getboolean(key)
            elif kind == "floats":
                cfg[key] = [float(x) for x in raw.replace(",", " ").split()]
            elif kind == "strs":
                cfg[key] = raw.replace(",", " ").split()
            else:
                cfg[key] = kind(raw)
    return cfg


def resolve(args) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(load_config(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config", "func"):
            continue
        if value is not None and value is not False:
            opts[key] = value
    if opts["workers"] is None:
        opts["workers"] = int(os.environ.get("SSHQFI_WORKERS", "1"))
    if opts["workers"] < 1:
        raise InvalidParameterError("workers must be >= 1")
    if opts["method"] not in ("auto", "exact", "krylov"):
        raise InvalidParameterError(f"unknown method {opts['method']!r}")
    if opts["m"] < 1:
        raise InvalidParameterError("Krylov dimension m must be >= 1")
    if not opts["tmax"] > 0 or not opts["dt"] > 0:
        raise InvalidParameterError("tmax and dt must be positive")
    return opts


def base_params(opts) -> ModelParams:
    return ModelParams(d=opts["d"], g=opts["g"], delta=opts["delta"], L=opts["L"], J=opts["J"])


def sweep_values(opts):
    if opts.get("linspace"):
        start, stop, num = opts["linspace"]
        return [float(v) for v in np.linspace(start, stop, int(num))]
    values = opts.get("values")
    if not values:
        return None
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise InvalidParameterError("sweep values must be finite")
    return values


def point_params(base: ModelParams, axis: str | None, value: float) -> ModelParams:
    if axis is None:
        return base
    if axis == "dimerization":
        return base.replace(d=value)
    if axis == "coupling":
        return base.replace(g=value)
    if axis == "detuning":
        return base.replace(delta=value)
    if axis == "detuning_normalized":
        return base.replace(delta=value * 2 * base.J * abs(base.d))
    raise InvalidParameterError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


def points(opts) -> list[ModelParams]:
    base = base_params(opts)
    values = sweep_values(opts)
    if opts.get("axis") and values is None:
        raise InvalidParameterError("--axis needs --values or --linspace")
    if values is None:
        return [base]
    return [point_params(base, opts["axis"], v) for v in values]


def method_for(params: ModelParams, opts) -> str:
    if opts["method"] != "auto":
        return opts["method"]
    return "exact" if params.dim <= AUTO_EXACT_MAX_DIM else "krylov"


def grid_for(opts) -> TimeGrid:
    return TimeGrid.from_spacing(opts["tmax"], opts["dt"])


# --- per-point evaluation (module level so worker processes can pickle it) -

def _nan_bound():
    return {"omega": math.nan, "z": math.nan, "edge": math.nan}


def evaluate_point(params: ModelParams, opts: dict, method: str | None = None, m: int | None = None) -> dict:
    method = method or method_for(params, opts)
    m = m or opts["m"]
    H = build_hamiltonian(params)
    spec = spectrum(H, method, m)
    trace = survival_amplitude(spec, grid_for(opts))
    f = qfi_trace(trace)
    bands = band_edges(params.J, params.d)

    num = _nan_bound()
    outer = math.nan
    if params.d != 0:
        try:
            info, outer = numerical_bound_state(spec, bands)
            num = {"omega": info.omega_bs, "z": info.z_bs, "edge": info.delta_edge}
        except NoBoundStateError:
            pass
    ana = _nan_bound()
    try:
        info = bound_state(params.delta, params.g, params.J, params.d)
        ana = {"omega": info.omega_bs, "z": info.z_bs, "edge": info.delta_edge}
    except NoBoundStateError:
        pass
    return {
        "params": params,
        "trace": trace,
        "qfi": f,
        "method": spec.label,
        "breakdown": spec.breakdown,
        "numerical": num,
        "analytic": ana,
        "outer_weight": outer,
    }


def _job(args):
    params, opts = args
    return evaluate_point(params, opts)


def run_points(plist, opts) -> list[dict]:
    jobs = [(p, opts) for p in plist]
    workers = min(opts["workers"], len(jobs))
    if workers <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def summary_row(res: dict, opts: dict) -> dict:
    p = res["params"]
    rep = diagnose(res["qfi"], eta=opts["eta"], t1=opts["t1"], t2=opts["t2"], t_cut=opts["tcut"],
                   T=opts["tmax"], eta_window=opts["eta_window"])
    return {
        "d": p.d, "g": p.g, "delta": p.delta, "delta_norm": p.delta_norm,
        "f_bar": rep.f_bar, "t_eta": rep.t_eta, "t_eta_capped": rep.t_eta_capped, "w_eta": rep.w_eta,
        "z_bs_num": res["numerical"]["z"], "z_bs_analytic": res["analytic"]["z"],
        "omega_bs": res["analytic"]["omega"], "delta_edge": res["numerical"]["edge"],
        "outer_weight": res["outer_weight"],
    }


def horizon_guard(plist, opts) -> dict:
    """Check every point against its recurrence horizon; returns horizon per point."""
    horizons = {}
    ok = True
    for p in plist:
        horizons[repr(p)] = recurrence_horizon(p) if p.L >= 1 else 0.0
        ok &= check_horizon(p, opts["tmax"], stacklevel=2)
    if not ok and opts["strict"]:
        raise GuardTripped("requested times exceed the recurrence horizon")
    return horizons


def default_out(opts, name) -> Path:
    return Path(opts["out"] or f"{name}.csv")


# --- commands ---------------------------------------------------------------

def cmd_trace(opts) -> int:
    started = time.perf_counter()
    plist = points(opts)
    horizons = horizon_guard(plist, opts)
    results = run_points(plist, opts)
    out = default_out(opts, "trace")
    paths = [out] if len(results) == 1 else [out.with_name(f"{out.stem}_{i:03d}{out.suffix}") for i in range(len(results))]
    for res, path in zip(results, paths):
        write_trace_csv(res["trace"], path)
        p = res["params"]
        write_meta(path, "trace", {**opts, **asdict(p)}, {
            "recurrence_horizon": horizons[repr(p)],
            "method": res["method"],
            "lanczos_breakdown": res["breakdown"],
        }, started)
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_sweep(opts) -> int:
    started = time.perf_counter()
    plist = points(opts)
    horizons = horizon_guard(plist, opts)
    results = run_points(plist, opts)
    rows = [summary_row(r, opts) for r in results]
    out = default_out(opts, "sweep")
    write_csv(out, SUMMARY_COLUMNS, rows)
    write_meta(out, "sweep", opts, {
        "recurrence_horizon": sorted(set(horizons.values())),
        "methods": [r["method"] for r in results],
        "lanczos_breakdown": any(r["breakdown"] for r in results),
    }, started)
    return EXIT_OK


def parse_window(text: str):
    a, b = (float(x) for x in text.split(":"))
    if not b > a:
        raise InvalidParameterError(f"window {text!r} must satisfy start < end")
    return a, b


def cmd_robustness(opts) -> int:
    started = time.perf_counter()
    etas = [float(e) for e in opts["etas"]]
    windows = [parse_window(w) for w in opts["windows"]]
    if len(etas) < 2 or len(windows) < 2:
        raise InvalidParameterError("robustness needs at least two thresholds and two windows")
    if opts.get("axis") is None:
        opts = {**opts, "axis": "detuning_normalized"}
        if sweep_values(opts) is None:
            opts["linspace"] = [0.0, 1.3, 27]
    plist = points(opts)
    horizons = horizon_guard(plist, opts)
    results = run_points(plist, opts)

    t_cols = {e: [] for e in etas}
    f_cols = {w: [] for w in windows}
    rows = []
    for res in results:
        p = res["params"]
        row = {"d": p.d, "g": p.g, "delta": p.delta, "delta_norm": p.delta_norm}
        for e in etas:
            ret = retention_time(res["qfi"], e, opts["tmax"])
            row[f"t_eta_{e:g}"] = ret.time
            row[f"capped_{e:g}"] = ret.capped
            t_cols[e].append(ret.time)
        for w in windows:
            fb = late_time_average(res["qfi"], *w)
            row[f"f_bar_{w[0]:g}_{w[1]:g}"] = fb
            f_cols[w].append(fb)
        rows.append(row)
    eta_ok = orderings_consistent(list(t_cols.values()))
    win_ok = orderings_consistent(list(f_cols.values()))
    for row in rows:
        row["eta_ordering_consistent"] = eta_ok
        row["window_ordering_consistent"] = win_ok
    columns = list(rows[0].keys())
    out = default_out(opts, "robustness")
    write_csv(out, columns, rows)
    write_meta(out, "robustness", opts, {
        "recurrence_horizon": sorted(set(horizons.values())),
        "lanczos_breakdown": any(r["breakdown"] for r in results),
        "eta_ordering_consistent": eta_ok,
        "window_ordering_consistent": win_ok,
    }, started)
    print(f"eta ordering consistent: {fmt(eta_ok)}; window ordering consistent: {fmt(win_ok)}")
    return EXIT_OK


def convergence_check(opts) -> dict:
    """max |dF| for (L, m) vs (factor*L, m) and (L, m) vs (L, m + step) on [0, tmax]."""
    base = base_params(opts)
    m = opts["m"]
    method = "krylov" if opts["method"] == "auto" else opts["method"]
    bigger = base.replace(L=base.L * opts["L_factor"])

    ref = evaluate_point(base, opts, method, m)["qfi"].f
    longer = evaluate_point(bigger, opts, method, m)["qfi"].f
    deeper = evaluate_point(base, opts, method, m + opts["m_step"])["qfi"].f
    dev_L = float(np.max(np.abs(ref - longer)))
    dev_m = float(np.max(np.abs(ref - deeper)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RecurrenceWarning)
        within = check_horizon(base, opts["tmax"])
    return {
        "L": base.L, "L_big": bigger.L, "m": m, "m_big": m + opts["m_step"], "method": method,
        "dev_L": dev_L, "dev_m": dev_m, "tol": opts["tol"],
        "within_horizon": within,
        "passed": dev_L < opts["tol"] and dev_m < opts["tol"],
        "warnings": [str(w.message) for w in caught],
    }


def cmd_convergence(opts) -> int:
    started = time.perf_counter()
    res = convergence_check(opts)
    for msg in res["warnings"]:
        warnings.warn(msg, RecurrenceWarning, stacklevel=2)
    out = default_out(opts, "convergence")
    columns = ["L", "L_big", "m", "m_big", "dev_L", "dev_m", "tol", "within_horizon", "passed"]
    write_csv(out, columns, [res])
    write_meta(out, "convergence", opts, {"method": res["method"]}, started)
    print(f"L {res['L']}->{res['L_big']}: max|dF|={res['dev_L']:.3e}; "
          f"m {res['m']}->{res['m_big']}: max|dF|={res['dev_m']:.3e}; passed={fmt(res['passed'])}")
    if not res["passed"] and opts["strict"]:
        return EXIT_GUARD
    return EXIT_OK


def cmd_bound_state_scan(opts) -> int:
    started = time.perf_counter()
    if opts.get("axis") is None:
        opts = {**opts, "axis": "detuning_normalized"}
        if sweep_values(opts) is None:
            opts["linspace"] = [0.0, 1.3, 27]
    if opts["method"] == "auto":
        opts = {**opts, "method": "exact"}
    plist = points(opts)
    horizons = horizon_guard(plist, opts)
    results = run_points(plist, opts)
    rows = []
    for res in results:
        p = res["params"]
        num, ana = res["numerical"], res["analytic"]
        rows.append({
            "d": p.d, "g": p.g, "delta": p.delta, "delta_norm": p.delta_norm,
            "z_bs_num": num["z"], "e_bs_num": num["omega"], "delta_edge_num": num["edge"],
            "z_bs_analytic": ana["z"], "omega_bs_analytic": ana["omega"], "delta_edge_analytic": ana["edge"],
            "f_bs": ana["z"] ** 2, "f_bar": late_time_average(res["qfi"], opts["t1"], opts["t2"]),
            "outer_weight": res["outer_weight"],
        })
    out = default_out(opts, "bound_state_scan")
    write_csv(out, SCAN_COLUMNS, rows)
    write_meta(out, "bound-state-scan", opts, {
        "recurrence_horizon": sorted(set(horizons.values())),
        "methods": [r["method"] for r in results],
    }, started)
    return EXIT_OK


COMMANDS = {
    "trace": cmd_trace,
    "sweep": cmd_sweep,
    "robustness": cmd_robustness,
    "convergence": cmd_convergence,
    "bound-state-scan": cmd_bound_state_scan,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and numerics")
    g.add_argument("--J", type=float, help="hopping scale (energies in units of J)")
    g.add_argument("--d", type=float, help="dimerization")
    g.add_argument("--g", type=float, help="emitter-bath coupling")
    g.add_argument("--delta", type=float, help="emitter detuning from gap center")
    g.add_argument("--L", type=int, help="chain half-length (2L+1 unit cells)")
    g.add_argument("--method", choices=("auto", "exact", "krylov"))
    g.add_argument("--m", type=int, help="Krylov dimension")
    g.add_argument("--tmax", type=float, help="final time / observation horizon T")
    g.add_argument("--dt", type=float, help="time-grid spacing")
    d = common.add_argument_group("diagnostics")
    d.add_argument("--t1", type=float, help="late-time window start")
    d.add_argument("--t2", type=float, help="late-time window end")
    d.add_argument("--eta", type=float, help="retention-time threshold")
    d.add_argument("--eta-window", dest="eta_window", type=float, help="useful-window threshold")
    d.add_argument("--tcut", type=float, help="post-transient cutoff")
    s = common.add_argument_group("sweep")
    s.add_argument("--axis", choices=AXES)
    s.add_argument("--values", type=float, nargs="+")
    s.add_argument("--linspace", type=float, nargs=3, metavar=("START", "STOP", "NUM"))
    o = common.add_argument_group("run control")
    o.add_argument("--out", help="output CSV path")
    o.add_argument("--workers", type=int, help="parallel worker processes (default $SSHQFI_WORKERS or 1)")
    o.add_argument("--strict", action="store_true", help="exit 3 when a physics guard trips")
    o.add_argument("--config", help="flat key = value config file; flags override it")
    o.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sshqfi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("trace", parents=[common], help="survival amplitude and QFI time traces")
    sub.add_parser("sweep", parents=[common], help="diagnostics table over one swept parameter")
    rob = sub.add_parser("robustness", parents=[common], help="threshold and window ordering checks")
    rob.add_argument("--etas", type=float, nargs="+")
    rob.add_argument("--windows", nargs="+", help="averaging windows as START:END")
    conv = sub.add_parser("convergence", parents=[common], help="chain-length and Krylov-depth checks")
    conv.add_argument("--L-factor", dest="L_factor", type=int)
    conv.add_argument("--m-step", dest="m_step", type=int)
    conv.add_argument("--tol", type=float)
    sub.add_parser("bound-state-scan", parents=[common], help="numerical vs analytic in-gap residue")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    del args.verbose
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except GuardTripped as exc:
        log.error("%s", exc)
        return EXIT_GUARD
    except (InvalidParameterError, RangeError, ValueError, OSError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID
    except (DimensionGuardError, np.linalg.LinAlgError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
