"""Command-line front end: ``optotherm run|sweep|verify|presets``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .dynamics import SegmentSpec
from .errors import ConfigError, OptothermError
from .presets import get_preset, parse_grid, preset_names
from .protocols import (
    Evolve,
    Protocol,
    _clausius_point,
    _reversibility_point,
    adiabatic_transducer,
    clausius_sweep,
    default_jobs,
    erasure_half_period,
    isothermal_cycle,
    otto_cycle,
    reversibility_sweep,
    run_protocol,
    thermal_state,
)
from .tables import OutputTable, params_hash, record_summary, record_table, write_json
from .units import SystemParams, UnitConversion
from .verify import run_checks

PARAM_KEYS = ("nu0", "gm", "omega", "temperature", "bath_exponent")
OPTION_KEYS = ("protocol", "beta0", "periods", "duration", "bath", "samples", "dt", "x_m", "p_e",
               "iterations", "si", "gamma_si", "omega_grid", "beta0_grid", "temperatures",
               "name")
CONFIG_KEYS = ("preset",) + PARAM_KEYS + OPTION_KEYS

RUN_PROTOCOLS = ("isothermal", "halfperiod", "erasure", "adiabatic", "evolve", "otto")
SWEEP_PROTOCOLS = ("reversibility", "clausius")

# what each preset runs when no protocol is named
_PRESET_RUN = {"isothermal": "isothermal", "erasure": "erasure", "reversibility": "halfperiod",
               "clausius": "halfperiod", "otto": "otto"}

DEFAULTS = {"beta0": 1e3, "periods": 1.0, "bath": True, "samples": 2000, "x_m": 0.0,
            "p_e": 1.0, "iterations": 100, "si": False}


# ---------------------------------------------------------------------------
# configuration


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a flat JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    if "preset" in data and any(k in data for k in PARAM_KEYS):
        raise ConfigError("config gives both a preset and explicit parameters; choose one")
    return data


def resolve_config(overrides: dict, config_path=None, command: str = "run") -> dict:
    """Merge file and command-line settings into a complete, self-describing config."""
    merged = load_config_file(config_path) if config_path else {}
    merged.update({k: v for k, v in overrides.items() if v is not None})

    explicit = {k: merged[k] for k in PARAM_KEYS if k in merged}
    name = merged.get("preset")
    if name is None and merged.get("protocol") == "otto":
        name = "otto" if not explicit else None
    if name is None and not all(k in explicit for k in ("nu0", "gm", "omega")):
        # partial parameters override the default preset
        name = "fig3c" if command == "sweep" else "fig3a"

    options = {}
    gamma_si = None
    if name is not None:
        preset = get_preset(name)
        params = preset.params.to_dict()
        params.update(explicit)
        options.update(preset.options)
        options.setdefault("protocol", _PRESET_RUN[preset.protocol] if command == "run"
                           else preset.protocol)
        gamma_si = preset.gamma_si
    else:
        params = explicit
    options.update({k: merged[k] for k in OPTION_KEYS if k in merged})
    if gamma_si is not None:
        options.setdefault("gamma_si", gamma_si)
    for key, value in DEFAULTS.items():
        options.setdefault(key, value)
    options.setdefault("protocol", "isothermal" if command == "run" else "reversibility")

    params = SystemParams.from_dict(params)
    return {"preset": name, "params": params.to_dict(), **options}


# ---------------------------------------------------------------------------
# execution


def _conversion(config):
    if not config.get("si"):
        return None
    return UnitConversion(float(config.get("gamma_si") or 1e9))


def _stem(config) -> str:
    return config.get("name") or config["protocol"]


def _positive_duration(value, what):
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"protocol duration is empty ({what} = {value})")


def _header(config, wall_time, extra=None):
    params = SystemParams.from_dict(config["params"])
    meta = {"params_hash": params_hash(params), "params": config["params"], "config": config}
    meta.update(extra or {})
    if wall_time is not None:
        meta["wall_time"] = f"{wall_time:.3f}"
    return meta


def _series_table(record, config, wall_time):
    si = _conversion(config)
    table = record_table(record, wall_time=False, si=si)
    table.metadata["config"] = config
    if wall_time:
        table.metadata["wall_time"] = f"{record.diagnostics.get('wall_time', 0.0):.3f}"
    return table


def execute_run(config: dict, wall_time: bool = True):
    """Run one protocol; returns (table, summary)."""
    params = SystemParams.from_dict(config["params"])
    proto = config["protocol"]
    dt = config.get("dt")
    samples = int(config["samples"])
    summary = {"config": config}
    started = time.perf_counter()

    if proto == "isothermal":
        _positive_duration(float(config["periods"]), "periods")
        record = isothermal_cycle(params, float(config["beta0"]), float(config["periods"]),
                                  samples, dt)
        b = np.abs(record.beta)
        summary["closure"] = float(b[-1] / b[0] - 1.0)
    elif proto == "halfperiod":
        row, record = _reversibility_point(params, float(config["beta0"]), samples, dt)
        summary.update(row)
        crow, _ = _clausius_point(params, float(config["beta0"]), samples, dt)
        summary.update({k: crow[k] for k in ("heat", "erased_bits", "clausius_gap")})
    elif proto == "erasure":
        bracket = erasure_half_period(params, float(config["beta0"]), samples, dt)
        record = bracket.record
        record.samples["w_rev"] = np.asarray(bracket.reversible, dtype=float)
        record.samples["w_quench"] = np.asarray(bracket.quench, dtype=float)
        summary["bracket_violation"] = bracket.violation()
    elif proto == "adiabatic":
        res = adiabatic_transducer(params, float(config["x_m"]), float(config["p_e"]), dt,
                                   samples)
        record = res.record
        summary.update({"work": res.work, "delta_nu0": res.delta_nu0, "x_turn": res.x_turn,
                        "x_turn_expected": res.x_turn_expected,
                        "delta_e_mech": res.delta_e_mech})
    elif proto == "evolve":
        duration = config.get("duration")
        if duration is None:
            raise ConfigError("protocol 'evolve' needs a duration")
        _positive_duration(float(duration), "duration")
        seg = SegmentSpec(float(duration), bool(config["bath"]), dt)
        seg = SegmentSpec(seg.duration, seg.bath_on, dt,
                          max(1, int(round(seg.duration / seg.step_size(params) / samples))))
        record = run_protocol(params, Protocol(thermal_state(params, float(config["beta0"])),
                                               (Evolve(seg),), label="evolve"))
    elif proto == "otto":
        n = int(config["iterations"])
        if n < 1:
            raise ConfigError(f"protocol duration is empty (iterations = {n})")
        otto = otto_cycle(params, float(config["x_m"]), n, dt)
        data = {"iteration": otto.sweep.axis, **otto.sweep.observables}
        data["power"] = otto["work"] * params.omega
        si = _conversion(config)
        if si is not None:
            data["work_J"] = si.energy_to_si(otto["work"])
            data["power_W"] = si.power_to_si(data["power"])
        elapsed = time.perf_counter() - started
        table = OutputTable.from_columns(data, _header(config, elapsed if wall_time else None,
                                                       {"label": f"otto iterations={n}"}))
        work, formula = otto["work"], otto["work_formula"]
        summary.update({
            "iterations": n,
            "max_rel_error_vs_formula": float(np.max(np.abs(work - formula) / np.abs(formula))),
            "work_first": float(work[0]), "work_last": float(work[-1]),
            "final_state": otto.final_state.to_dict(),
        })
        if si is not None:
            summary["power_W_first"] = float(data["power_W"][0])
            summary["power_W_last"] = float(data["power_W"][-1])
        return table, summary
    else:
        raise ConfigError(f"unknown run protocol {proto!r}; choose from {list(RUN_PROTOCOLS)}")

    summary.update(record_summary(record))
    return _series_table(record, config, wall_time), summary


def _point_file(points_dir: Path, i: int, record, config, wall_time):
    if record is None:
        return ""
    path = points_dir / f"point_{i:03d}.csv"
    _series_table(record, config, wall_time).write(path)
    return str(path)


def execute_sweep(config: dict, out: Path, jobs: int, wall_time: bool = True):
    """Run a sweep, write per-point files; returns (table, summary)."""
    params = SystemParams.from_dict(config["params"])
    proto = config["protocol"]
    dt = config.get("dt")
    samples = int(config["samples"])
    stem = _stem(config)
    points_dir = out / f"{stem}_points"
    points_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()

    if proto == "reversibility":
        grid = config.get("omega_grid", config.get("omega_values"))
        if grid is None:
            raise ConfigError("reversibility sweep needs --omega-grid")
        sweep = reversibility_sweep(params, parse_grid(grid), float(config["beta0"]), samples,
                                    dt, jobs, keep_records=True)
        data = {"omega": sweep.axis, **sweep.observables}
        # single writer: point files are written here, after gathering
        data["run_file"] = [_point_file(points_dir, i, r, config, wall_time)
                            for i, r in enumerate(sweep.records)]
        data["error"] = [e or "" for e in sweep.errors]
        summary = {"config": config, "points": len(sweep),
                   "failed": sum(e is not None for e in sweep.errors)}
    elif proto == "clausius":
        grid = config.get("beta0_grid")
        temps = config.get("temperatures")
        if grid is None or temps is None:
            raise ConfigError("clausius sweep needs --beta0-grid and --temperatures")
        fits = clausius_sweep(params, parse_grid(grid), parse_grid(temps), samples, dt, jobs,
                              keep_records=True)
        data = {"temperature": [], "beta0": []}
        for fit in fits:
            for key in fit.sweep.observables:
                data.setdefault(key, [])
        data["run_file"], data["error"] = [], []
        i = 0
        for fit in fits:
            for j, row in enumerate(fit.sweep.rows()):
                data["temperature"].append(fit.temperature)
                data["beta0"].append(row["beta0"])
                for key in fit.sweep.observables:
                    data[key].append(row[key])
                data["run_file"].append(_point_file(points_dir, i, fit.sweep.records[j], config,
                                                    wall_time))
                data["error"].append(row["error"])
                i += 1
        summary = {"config": config, "fits": [
            {"temperature": f.temperature, "landauer_work": f.landauer_work, "slope": f.slope,
             "intercept": f.intercept, "slope_error": f.slope_error, "scatter": f.scatter}
            for f in fits]}
        summary["failed"] = sum(bool(e) for e in data["error"])
    else:
        raise ConfigError(f"unknown sweep protocol {proto!r}; choose from {list(SWEEP_PROTOCOLS)}")

    elapsed = time.perf_counter() - started
    table = OutputTable.from_columns(data, _header(config, elapsed if wall_time else None,
                                                   {"label": f"{proto} sweep"}))
    return table, summary


# ---------------------------------------------------------------------------
# argument parsing


def _add_param_args(p):
    g = p.add_argument_group("system parameters (units of gamma)")
    g.add_argument("--preset", choices=preset_names())
    g.add_argument("--config", help="flat JSON document; command-line values win")
    g.add_argument("--nu0", type=float)
    g.add_argument("--gm", type=float)
    g.add_argument("--omega", "--omega-over-gamma", dest="omega", type=float)
    g.add_argument("--temperature", type=float)
    g.add_argument("--bath-exponent", dest="bath_exponent", type=int)


def _add_protocol_args(p, choices):
    g = p.add_argument_group("protocol")
    g.add_argument("--protocol", choices=choices)
    g.add_argument("--beta0", type=float)
    g.add_argument("--dt", type=float)
    g.add_argument("--samples", type=int, help="approximate number of recorded samples")


def _add_output_args(p):
    g = p.add_argument_group("output")
    g.add_argument("--out", default="optotherm-out", help="output directory")
    g.add_argument("--name", help="file stem (default: protocol name)")
    g.add_argument("--si", action="store_const", const=True,
                   help="add SI columns next to the internal ones")
    g.add_argument("--gamma-si", dest="gamma_si", type=float, help="gamma in 1/s for --si")
    g.add_argument("--no-wall-time", dest="wall_time", action="store_false",
                   help="omit the wall-time header line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optotherm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one protocol")
    _add_param_args(run)
    _add_protocol_args(run, RUN_PROTOCOLS)
    run.add_argument("--periods", type=float)
    run.add_argument("--duration", type=float, help="'evolve' protocol duration")
    run.add_argument("--no-bath", dest="bath", action="store_const", const=False)
    run.add_argument("--x-m", dest="x_m", type=float, help="initial deflection in units of x0")
    run.add_argument("--p-e", dest="p_e", type=float, help="frozen population (adiabatic)")
    run.add_argument("--iterations", type=int)
    run.add_argument("--replay", help="re-execute the run stored in a table header")
    _add_output_args(run)

    sweep = sub.add_parser("sweep", help="run independent points along an axis")
    _add_param_args(sweep)
    _add_protocol_args(sweep, SWEEP_PROTOCOLS)
    sweep.add_argument("--omega-grid", dest="omega_grid")
    sweep.add_argument("--beta0-grid", dest="beta0_grid")
    sweep.add_argument("--temperatures")
    sweep.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: $OPTOTHERM_JOBS or 1)")
    _add_output_args(sweep)

    verify = sub.add_parser("verify", help="run the invariant suite")
    _add_param_args(verify)
    verify.add_argument("--beta0", type=float, default=1e3)
    verify.add_argument("--dt", type=float)
    verify.add_argument("--duration", type=float, default=50.0)

    sub.add_parser("presets", help="list the named parameter sets")
    return parser


def _overrides(args) -> dict:
    return {k: getattr(args, k) for k in CONFIG_KEYS if k != "preset" and hasattr(args, k)} | {
        "preset": getattr(args, "preset", None)}


def _write_outputs(table, summary, out: Path, stem: str):
    out.mkdir(parents=True, exist_ok=True)
    csv_path = table.write(out / f"{stem}.csv")
    json_path = write_json(out / f"{stem}.json", summary)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")


def cmd_run(args) -> int:
    if args.replay:
        table = OutputTable.read(args.replay)
        if "config" not in table.metadata:
            raise ConfigError(f"{args.replay}: header lacks a config line")
        config = table.metadata["config"]
    else:
        config = resolve_config(_overrides(args), args.config, "run")
    table, summary = execute_run(config, args.wall_time)
    _write_outputs(table, summary, Path(args.out), _stem(config))
    return 0


def cmd_sweep(args) -> int:
    config = resolve_config(_overrides(args), args.config, "sweep")
    jobs = args.jobs if args.jobs is not None else default_jobs()
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = Path(args.out)
    table, summary = execute_sweep(config, out, jobs, args.wall_time)
    _write_outputs(table, summary, out, _stem(config))
    if summary.get("failed"):
        print(f"{summary['failed']} sweep point(s) failed; see the error column", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    overrides = {k: getattr(args, k) for k in ("preset",) + PARAM_KEYS}
    config = resolve_config(overrides, args.config, "run")
    params = SystemParams.from_dict(config["params"])
    checks = run_checks(params, args.beta0, args.duration, args.dt)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def cmd_presets(args) -> int:
    for name in preset_names():
        p = get_preset(name)
        print(f"{name}: {p.description}")
        print(f"    params: {json.dumps(p.params.to_dict(), sort_keys=True)}")
        print(f"    protocol: {p.protocol}  options: {json.dumps(p.options, sort_keys=True)}")
    return 0


def _one_line_warning(message, category, filename, lineno, line=None):
    return f"optotherm: {category.__name__}: {message}\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify,
               "presets": cmd_presets}[args.command]
    previous, warnings.formatwarning = warnings.formatwarning, _one_line_warning
    try:
        return handler(args)
    except OptothermError as exc:
        print(f"optotherm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    finally:
        warnings.formatwarning = previous


if __name__ == "__main__":
    sys.exit(main())
