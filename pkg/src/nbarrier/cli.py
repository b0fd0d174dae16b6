"""Command-line front end.

    nbarrier {check,bounds,solve,verify} --config CONFIG [--out DIR] [--override KEY=VALUE ...]

Exit codes: 0 success / pass, 1 domain failure, 2 usage or config error.

Config schema (JSON, unknown keys are rejected)::

    {
      "system": {...} | "system_file": "path relative to the config",
      "problem": {"e_minus": [..], "e_plus": [..], "theta": "free" | number,
                  "L": 30, "N": 600, "phase_anchor": 0.5,
                  "free_end": null | "minus" | "plus", "init": "tanh"},
      "geometry": {"box": null | number | [..], "resolution": null | int,
                   "band_tol": 1e-10, "margin": 0.0},
      "weights": [1, 1],
      "sweep": {"values": [0.1, 0.3, 1, 3, 10]} | {"grid": [[..], ..]},
      "tolerances": {"verify": 1e-3, "newton": 1e-10, "state": 1e-9, "max_iter": 200},
      "output": "out"
    }
"""

from __future__ import annotations

import argparse
import copy
import datetime
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import geometry, hypotheses, nbmp, solver, verify
from ._io import atomic_write, json_text
from .errors import ConfigError, NBarrierError
from .model import WaveProblem, classify_boundary_state, system_from_dict, system_to_dict

SCHEMA = {
    "system": None,
    "system_file": None,
    "problem": {"e_minus", "e_plus", "theta", "L", "N", "phase_anchor", "free_end", "init"},
    "geometry": {"box", "resolution", "band_tol", "margin"},
    "weights": None,
    "sweep": {"values", "grid"},
    "tolerances": {"verify", "newton", "state", "max_iter"},
    "output": None,
}

DEFAULTS = {
    "problem": {"theta": "free", "L": 30.0, "N": 600, "phase_anchor": 0.5, "free_end": None, "init": "tanh"},
    "geometry": {"box": None, "resolution": None, "band_tol": 1e-10, "margin": 0.0},
    "sweep": {"values": list(verify.DEFAULT_VALUES)},
    "tolerances": {"verify": 1e-3, "newton": 1e-10, "state": 1e-9, "max_iter": 200},
    "output": "out",
}


def bundled_configs() -> list[str]:
    return sorted(p.name for p in resources.files("nbarrier").joinpath("configs").iterdir() if p.name.endswith(".json"))


def _resolve_config_path(path: str) -> Path:
    p = Path(path)
    if p.is_file():
        return p
    bundled = resources.files("nbarrier").joinpath("configs", p.name)
    if p.parent == Path(".") and bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file not found: {path}")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override must be KEY=VALUE, got {item!r}")
    key, value = item.split("=", 1)
    parts = key.split(".")
    node = cfg
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {key!r}")
    node[parts[-1]] = _parse_value(value)


def load_config(path, overrides=()) -> dict:
    """Read, override, validate and default-fill a config."""
    cfg_path = _resolve_config_path(str(path))
    try:
        cfg = json.loads(cfg_path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cfg_path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for item in overrides:
        apply_override(cfg, item)
    unknown = set(cfg) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, allowed in SCHEMA.items():
        if allowed and key in cfg:
            if not isinstance(cfg[key], dict):
                raise ConfigError(f"{key} must be an object")
            bad = set(cfg[key]) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
    if ("system" in cfg) == ("system_file" in cfg):
        raise ConfigError("give exactly one of system / system_file")
    if "system_file" in cfg:
        sys_path = cfg_path.parent / cfg["system_file"]
        if not sys_path.is_file():
            raise ConfigError(f"system file not found: {sys_path}")
        cfg["system"] = json.loads(sys_path.read_text())
        del cfg["system_file"]
    out = copy.deepcopy(DEFAULTS)
    for key, value in cfg.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "sweep":
            out[key].update(value)
        else:
            out[key] = value
    _check_ranges(out)
    return out


def _check_ranges(cfg):
    prob = cfg["problem"]
    if not (isinstance(prob.get("N"), int) and prob["N"] >= 16):
        raise ConfigError("problem.N must be an integer >= 16")
    if not (isinstance(prob.get("L"), (int, float)) and prob["L"] > 0):
        raise ConfigError("problem.L must be positive")
    if prob["theta"] != "free" and not isinstance(prob["theta"], (int, float)):
        raise ConfigError("problem.theta must be a number or 'free'")
    if not 0 < prob["phase_anchor"] < 1:
        raise ConfigError("problem.phase_anchor must lie in (0, 1)")
    if prob["free_end"] not in (None, "minus", "plus"):
        raise ConfigError("problem.free_end must be null, 'minus' or 'plus'")
    geo = cfg["geometry"]
    if not 0 <= geo["margin"] < 1:
        raise ConfigError("geometry.margin must lie in [0, 1)")
    if geo["band_tol"] <= 0:
        raise ConfigError("geometry.band_tol must be positive")
    tol = cfg["tolerances"]
    for key in ("verify", "newton", "state"):
        if not (isinstance(tol[key], (int, float)) and tol[key] > 0):
            raise ConfigError(f"tolerances.{key} must be positive")


# -- experiment pieces ---------------------------------------------------------


def build_system(cfg):
    try:
        return system_from_dict(cfg["system"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid system: {exc}") from exc


def build_problem(cfg, system) -> WaveProblem:
    prob = cfg["problem"]
    if "e_minus" not in prob or "e_plus" not in prob:
        raise ConfigError("problem needs e_minus and e_plus")
    tol = cfg["tolerances"]["state"]
    em = classify_boundary_state(system, prob["e_minus"], tol)
    ep = classify_boundary_state(system, prob["e_plus"], tol)
    try:
        return WaveProblem(system, em, ep, prob["theta"], float(prob["L"]), int(prob["N"]))
    except ValueError as exc:
        raise ConfigError(f"invalid problem: {exc}") from exc


def fit_region(cfg, system):
    geo = cfg["geometry"]
    box = geo["box"] if geo["box"] is not None else geometry.default_box(system)
    res = geo["resolution"] or (201 if system.n_species == 2 else 41)
    samples = geometry.sample_nullclines(system, box, res, geo["band_tol"])
    return geometry.fit_region(samples, geo["margin"]), samples


def solve_wave(cfg, problem):
    prob = cfg["problem"]
    opts = solver.NewtonOptions(tol=cfg["tolerances"]["newton"], max_iter=int(cfg["tolerances"]["max_iter"]))
    if problem.free_speed:
        return solver.solve_bvp_free_speed(problem, prob["init"], prob["phase_anchor"], opts)
    if prob["free_end"] is not None:
        return solver.solve_bvp(problem, prob["init"], opts, prob["phase_anchor"], prob["free_end"])
    return solver.solve_bvp(problem, prob["init"], opts)


def sweep_grid(cfg, n):
    sweep = cfg["sweep"]
    if "grid" in sweep:
        grid = [tuple(float(x) for x in w) for w in sweep["grid"]]
        if not grid or any(len(w) != n or min(w) <= 0 for w in grid):
            raise ConfigError(f"sweep.grid must list positive {n}-tuples")
        return grid
    values = sweep.get("values", verify.DEFAULT_VALUES)
    if not values or min(values) <= 0:
        raise ConfigError("sweep.values must be positive")
    return verify.weight_grid(n, values)


# -- commands -------------------------------------------------------------------


def cmd_check(cfg, out: Path) -> int:
    system = build_system(cfg)
    geo = cfg["geometry"]
    opts = hypotheses.HypothesisOptions(
        bounding_box=geo["box"],
        resolution=geo["resolution"],
        band_tol=geo["band_tol"],
        tol=cfg["tolerances"]["state"],
        margin=geo["margin"],
    )
    report = hypotheses.verify_hypotheses(system, opts)
    atomic_write(out / "hypotheses.json", report.to_json())
    print(report.table())
    return 0 if report.all_passed else 1


def cmd_bounds(cfg, out: Path) -> int:
    system = build_system(cfg)
    n = system.n_species
    region, samples = fit_region(cfg, system)
    chi = 1
    if "e_minus" in cfg["problem"] and "e_plus" in cfg["problem"]:
        problem = build_problem(cfg, system)
        chi = nbmp.chi_indicator(problem.e_minus, problem.e_plus)
    weights = cfg.get("weights", [1.0] * n)
    if len(weights) != n:
        raise ConfigError(f"weights must have {n} entries")
    try:
        b = nbmp.bounds(weights, system.diffusion, region, chi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    atomic_write(out / "bounds.json", json_text(b.to_dict()))
    atomic_write(out / "region.json", json_text(region.to_dict()))
    atomic_write(out / "region.csv", region.to_csv())
    atomic_write(out / "nullclines.csv", geometry.samples_to_csv(samples))
    print(f"{'p_lower':>12} {b.p_lower:.12g}")
    print(f"{'p_upper':>12} {b.p_upper:.12g}")
    return 0


def _write_wave(out: Path, sol, weights):
    atomic_write(out / "wave.csv", sol.to_csv(weights))
    meta = sol.metadata()
    meta["weights"] = list(weights)
    atomic_write(out / "wave.json", json_text(meta))


def cmd_solve(cfg, out: Path) -> int:
    system = build_system(cfg)
    problem = build_problem(cfg, system)
    sol = solve_wave(cfg, problem)
    weights = cfg.get("weights", [1.0] * system.n_species)
    _write_wave(out, sol, weights)
    print(f"theta={sol.theta:.12g} residual={sol.residual_norm:.3e} iterations={sol.iterations}")
    return 0


def cmd_verify(cfg, out: Path) -> int:
    system = build_system(cfg)
    problem = build_problem(cfg, system)
    region, _ = fit_region(cfg, system)
    sol = solve_wave(cfg, problem)
    chi = nbmp.chi_indicator(problem.e_minus, problem.e_plus)
    grid = sweep_grid(cfg, system.n_species)
    report = verify.sweep_weights(sol, region, system.diffusion, chi, grid, cfg["tolerances"]["verify"])
    _write_wave(out, sol, cfg.get("weights", [1.0] * system.n_species))
    atomic_write(out / "report.json", report.to_json())
    atomic_write(out / "report.csv", report.to_csv())
    failed = sum(not r.passed for r in report.records)
    print(f"{report.overall}: {len(report.records) - failed}/{len(report.records)} weight tuples within bounds")
    return 0 if report.passed else 1


COMMANDS = {"check": cmd_check, "bounds": cmd_bounds, "solve": cmd_solve, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbarrier", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="config JSON (or the name of a bundled config)")
    parser.add_argument("--out", default=None, help="output directory (default: config 'output')")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="dot-path override, value parsed as JSON when possible")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config, args.override)
        out = Path(args.out or cfg["output"])
        status = COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NBarrierError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(out / "run.log", "a") as fh:
        fh.write(f"{stamp} {args.command} config={args.config} overrides={args.override} exit={status}\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
