"""Command-line front end: config parsing, run dispatch, CSV artifacts.

Config files are flat ``key = value`` text with dotted keys; values are
Python literals (numbers, strings, lists). ``#`` starts a comment and ``;``
separates statements on one line, so the provenance comment emitted at the
top of every CSV can be re-parsed as a complete config reproducing the run.

Commands: ``solve`` writes value.csv, controls.csv, ergodic.csv, omega1.csv;
``sweep`` re-solves along one parameter axis and writes sweep.csv;
``mc-check`` cross-validates the solved value against the Monte Carlo
estimator. Exit codes: 0 success, 1 usage, 2 solver failure, 3 mc-check gate
failure.
"""

from __future__ import annotations

import argparse
import ast
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import build_mesh, build_time_grid
from .mc import SimConfig, simulate_value
from .model import (ProblemSpec, declining_rate, logistic_growth, tabulated,
                    tabulated_density, tent_disutility, tenth_cost,
                    uniform_density, unit_rate, validate_spec, zero_cost,
                    zero_rate)
from .solver import (PolicyConfig, PolicyIterationError, solve_backward,
                     solve_many, switching_points)

# benchmark values printed next to the computed ones; the combination of
# migration intensities and jump densities behind them is not fully pinned
# down, so they are context, not a gate
REFERENCE_E_UNCONTROLLED = 0.7943
REFERENCE_MIN_VALUE = {"uncontrolled": 38.665, "controlled": 37.003}


class ConfigError(ValueError):
    pass


GROWTH_PRESETS = {"logistic": logistic_growth}
RATE_PRESETS = {"one": unit_rate, "one_minus_q": declining_rate,
                "zero": zero_rate}
COST_PRESETS = {"zero": zero_cost, "tenth_q": tenth_cost}
DISUTILITY_PRESETS = {"tent": tent_disutility}

SWEEPABLE = ("psi0", "psi1", "psi2", "psi", "sigma", "gamma0", "gamma1",
             "nu1", "nu2", "lambda_max", "theta_max", "q_max")

# canonical key order; this is also the provenance order
DEFAULTS: dict[str, object] = {
    "command": "solve",
    "preset": "uncontrolled",
    "model.sigma": 1.0,
    "model.gamma0": 0.1,
    "model.gamma1": 0.1,
    "model.nu1": 1.0,
    "model.nu2": 1.0,
    "model.psi0": 0.5,
    "model.psi1": 0.5,
    "model.psi2": 0.5,
    "model.lambda_max": 100.0,
    "model.theta_max": 100.0,
    "model.q_max": 1.0,
    "model.horizon": 50.0,
    "model.q_grid_size": 2,
    "model.growth_a": "logistic",
    "model.growth_rate_r": "",     # preset-dependent default
    "model.cost_h": "",            # preset-dependent default
    "model.disutility_f": "tent",
    "model.jump1": [0.1, 0.9],
    "model.jump2": [0.1, 0.9],
    "mesh.n_cells": 500,
    "time.dt": 0.005,
    "solver.tol": 1e-9,
    "solver.max_iter": 50,
    "solver.n_quad": 64,
    "snapshot_times": [],
    "sweep.param": "",
    "sweep.values": [],
    "sweep.workers": 0,
    "mc.dt_sim": 5e-4,
    "mc.n_paths": 100_000,
    "mc.seed": 0,
    "mc.start_x": 0.5,
    "mc.start_t": 0.0,
    "mc.gate_abs": 0.02,
    "mc.chunk_size": 32_768,
}


def parse_config_text(text: str) -> dict[str, object]:
    """Parse flat key = value statements; newline or ';' separated."""
    entries: dict[str, object] = {}
    for line in text.splitlines():
        for stmt in line.split("#", 1)[0].split(";"):
            stmt = stmt.strip()
            if not stmt:
                continue
            key, sep, raw = stmt.partition("=")
            if not sep:
                raise ConfigError(f"expected 'key = value', got {stmt!r}")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                entries[key] = ast.literal_eval(raw.strip())
            except (ValueError, SyntaxError) as exc:
                raise ConfigError(f"bad value for {key}: {raw.strip()!r}") from exc
    return entries


@dataclass(frozen=True)
class RunConfig:
    items: dict[str, object]

    def __getitem__(self, key: str):
        return self.items[key]

    def provenance(self) -> str:
        return "; ".join(f"{k} = {_fmt_value(v)}" for k, v in self.items.items())


def resolve_config(entries: dict[str, object]) -> RunConfig:
    """Fill defaults (coefficient defaults follow the preset) and validate."""
    preset = entries.get("preset", DEFAULTS["preset"])
    if preset not in ("uncontrolled", "controlled"):
        raise ConfigError(f"unknown preset {preset!r}")
    resolved = dict(DEFAULTS)
    resolved["model.growth_rate_r"] = ("one_minus_q" if preset == "controlled"
                                       else "one")
    resolved["model.cost_h"] = "tenth_q" if preset == "controlled" else "zero"
    resolved.update(entries)

    command = resolved["command"]
    if command not in ("solve", "sweep", "mc-check"):
        raise ConfigError(f"unknown command {command!r}")
    if command == "sweep":
        if resolved["sweep.param"] not in SWEEPABLE:
            raise ConfigError(f"sweep.param must be one of {SWEEPABLE}")
        if not resolved["sweep.values"]:
            raise ConfigError("sweep.values must be a nonempty list")
    if command == "mc-check" and resolved["mc.start_t"] != 0.0:
        raise ConfigError("mc-check compares against the t = 0 slice; "
                          "mc.start_t must be 0")
    return RunConfig(items={k: resolved[k] for k in DEFAULTS})


def _fmt_value(value) -> str:
    if isinstance(value, list):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    return repr(value)


def _coefficient(value, presets, what):
    if isinstance(value, str):
        if value not in presets:
            raise ConfigError(f"unknown {what} preset {value!r}; "
                              f"known: {sorted(presets)}")
        return presets[value]
    try:
        return tabulated(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad {what} table: {exc}") from exc


def _jump_density(value, name):
    try:
        if (isinstance(value, list) and len(value) == 2
                and all(isinstance(v, (int, float)) for v in value)):
            return uniform_density(float(value[0]), float(value[1]))
        return tabulated_density(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad {name}: {exc}") from exc


def build_spec(cfg: RunConfig) -> ProblemSpec:
    it = cfg.items
    return ProblemSpec(
        sigma=float(it["model.sigma"]),
        gamma0=float(it["model.gamma0"]),
        gamma1=float(it["model.gamma1"]),
        nu1=float(it["model.nu1"]),
        nu2=float(it["model.nu2"]),
        psi0=float(it["model.psi0"]),
        psi1=float(it["model.psi1"]),
        psi2=float(it["model.psi2"]),
        lambda_max=float(it["model.lambda_max"]),
        theta_max=float(it["model.theta_max"]),
        q_max=float(it["model.q_max"]),
        horizon=float(it["model.horizon"]),
        growth_a=_coefficient(it["model.growth_a"], GROWTH_PRESETS, "growth_a"),
        growth_rate_r=_coefficient(it["model.growth_rate_r"], RATE_PRESETS,
                                   "growth_rate_r"),
        cost_h=_coefficient(it["model.cost_h"], COST_PRESETS, "cost_h"),
        disutility_f=_coefficient(it["model.disutility_f"], DISUTILITY_PRESETS,
                                  "disutility_f"),
        jump_density_1=_jump_density(it["model.jump1"], "model.jump1"),
        jump_density_2=_jump_density(it["model.jump2"], "model.jump2"),
        q_grid_size=int(it["model.q_grid_size"]),
    )


def _sweep_spec(base: ProblemSpec, param: str, value: float) -> ProblemSpec:
    if param == "psi":
        return replace(base, psi1=value, psi2=value)
    return replace(base, **{param: value})


# ---------------------------------------------------------------------------
# CSV artifacts
# ---------------------------------------------------------------------------

def _fmt_num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_csv(path: Path, provenance: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(f"# config: {provenance}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_num(v) for v in row) + "\n")


def read_provenance(path) -> str:
    """Recover the config text embedded in an emitted CSV."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
    prefix = "# config: "
    if not first.startswith(prefix):
        raise ConfigError(f"{path} carries no provenance line")
    return first[len(prefix):]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _run_solve(cfg: RunConfig, out: Path, quiet: bool) -> int:
    spec = build_spec(cfg)
    mesh = build_mesh(int(cfg["mesh.n_cells"]))
    tg = build_time_grid(spec.horizon, float(cfg["time.dt"]))
    policy = PolicyConfig(tol=float(cfg["solver.tol"]),
                          max_iter=int(cfg["solver.max_iter"]))
    result = solve_backward(spec, mesh, tg, policy=policy,
                            snapshot_times=tuple(cfg["snapshot_times"]),
                            n_quad=int(cfg["solver.n_quad"]))
    prov = cfg.provenance()
    phi = result.final_value.values
    ctrl = result.final_controls
    _write_csv(out / "value.csv", prov, ["x", "phi"],
               zip(mesh.nodes, phi))
    _write_csv(out / "controls.csv", prov,
               ["x", "q_star", "lambda_star", "theta1_star", "theta2_star"],
               zip(mesh.nodes, ctrl.q_star, ctrl.lambda_star,
                   ctrl.theta1_star, ctrl.theta2_star))
    _write_csv(out / "ergodic.csv", prov, ["E_mean", "E_spread"],
               [(result.ergodic.E_mean, result.ergodic.E_spread)])
    intervals = switching_points(ctrl.q_star, mesh, spec.q_max / 2.0)
    _write_csv(out / "omega1.csv", prov, ["left_x", "right_x"], intervals)
    if result.snapshots:
        _write_csv(out / "snapshots.csv", prov, ["t", "x", "phi"],
                   ((s.time, x, v) for s in result.snapshots
                    for x, v in zip(mesh.nodes, s.value.values)))

    if not quiet:
        preset = cfg["preset"]
        min_ref = REFERENCE_MIN_VALUE[preset]
        print(f"min value  {phi.min():.6f}  (reference {min_ref} for the "
              f"{preset} benchmark)")
        e_line = f"E_mean     {result.ergodic.E_mean:.6f}"
        if preset == "uncontrolled":
            e_line += f"  (reference {REFERENCE_E_UNCONTROLLED})"
        print(e_line)
        print(f"E_spread   {result.ergodic.E_spread:.3e}")
        print(f"omega1     {intervals if intervals else 'empty'}")
        print(f"artifacts  {out}")
    return 0


def _run_sweep(cfg: RunConfig, out: Path, quiet: bool) -> int:
    base = build_spec(cfg)
    param = cfg["sweep.param"]
    values = sorted(float(v) for v in cfg["sweep.values"])
    specs = [_sweep_spec(base, param, v) for v in values]
    mesh = build_mesh(int(cfg["mesh.n_cells"]))
    tg = build_time_grid(base.horizon, float(cfg["time.dt"]))
    policy = PolicyConfig(tol=float(cfg["solver.tol"]),
                          max_iter=int(cfg["solver.max_iter"]))
    workers = int(cfg["sweep.workers"]) or min(os.cpu_count() or 1, len(specs))
    results = solve_many(specs, mesh, tg, policy=policy,
                         n_quad=int(cfg["solver.n_quad"]), workers=workers)

    rows = []
    for v, res in zip(values, results):
        intervals = switching_points(res.final_controls.q_star, mesh,
                                     base.q_max / 2.0)
        left, right = intervals[0] if intervals else (np.nan, np.nan)
        rows.append((v, res.ergodic.E_mean, res.ergodic.E_spread,
                     res.final_value.values.min(), left, right,
                     len(intervals)))
    _write_csv(out / "sweep.csv", cfg.provenance(),
               [param, "E_mean", "E_spread", "min_phi",
                "omega1_left", "omega1_right", "n_intervals"], rows)
    if not quiet:
        for row in rows:
            print(f"{param} = {row[0]:<8g} E_mean = {row[1]:.6f}  "
                  f"min_phi = {row[3]:.6f}")
        print(f"artifacts  {out}")
    return 0


def _run_mc_check(cfg: RunConfig, out: Path, quiet: bool) -> int:
    spec = build_spec(cfg)
    mesh = build_mesh(int(cfg["mesh.n_cells"]))
    tg = build_time_grid(spec.horizon, float(cfg["time.dt"]))
    policy = PolicyConfig(tol=float(cfg["solver.tol"]),
                          max_iter=int(cfg["solver.max_iter"]))
    result = solve_backward(spec, mesh, tg, policy=policy,
                            n_quad=int(cfg["solver.n_quad"]),
                            record_controls=True)
    start_x = float(cfg["mc.start_x"])
    pde_value = float(np.interp(start_x, mesh.nodes, result.final_value.values))
    sim = SimConfig(dt_sim=float(cfg["mc.dt_sim"]),
                    n_paths=int(cfg["mc.n_paths"]),
                    master_seed=int(cfg["mc.seed"]),
                    start_x=start_x,
                    start_t=float(cfg["mc.start_t"]),
                    chunk_size=int(cfg["mc.chunk_size"]))
    estimate = simulate_value(spec, result.control_table, sim)
    diff = abs(estimate.mean - pde_value)
    gate = 3.0 * estimate.std_err + float(cfg["mc.gate_abs"])
    passed = diff <= gate
    _write_csv(out / "mc_check.csv", cfg.provenance(),
               ["pde_value", "mc_mean", "mc_std_err", "abs_diff", "gate",
                "passed"],
               [(pde_value, estimate.mean, estimate.std_err, diff, gate,
                 int(passed))])
    if not quiet:
        print(f"pde value  {pde_value:.6f}")
        print(f"mc value   {estimate.mean:.6f} +- {estimate.std_err:.6f} "
              f"({estimate.n_paths} paths)")
        print(f"|diff|     {diff:.6f}  gate {gate:.6f}  "
              f"{'PASS' if passed else 'FAIL'}")
        print(f"artifacts  {out}")
    return 0 if passed else 3


def execute(cfg: RunConfig, out_dir, quiet: bool = False) -> int:
    """Dispatch one resolved run; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    check = validate_spec(build_spec(cfg))
    if not check.ok:
        for violation in check.violations:
            print(f"invalid model: {violation}", file=sys.stderr)
        return 1
    try:
        if cfg["command"] == "solve":
            return _run_solve(cfg, out, quiet)
        if cfg["command"] == "sweep":
            return _run_sweep(cfg, out, quiet)
        return _run_mc_check(cfg, out, quiet)
    except PolicyIterationError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        raise ConfigError(message)


def main(argv=None) -> int:
    parser = _Parser(prog="robpop",
                     description="Robust population-control solver: solve / "
                                 "sweep / mc-check runs driven by a config file.")
    parser.add_argument("--config", help="path to a 'key = value' config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="config override (repeatable)")
    parser.add_argument("--quiet", action="store_true")
    try:
        ns = parser.parse_args(argv)
        entries: dict[str, object] = {}
        if ns.config:
            entries.update(parse_config_text(Path(ns.config).read_text()))
        for override in ns.override:
            entries.update(parse_config_text(override))
        cfg = resolve_config(entries)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return execute(cfg, ns.out, quiet=ns.quiet)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
