"""Command-line entry point: ``gliderdec simulate | process | sweep``.

Exit codes: 0 success, 2 unparseable or invalid input, 3 infeasible
scenario, 4 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bundle, navigation
from .config import ConfigError, RunConfig, apply_override, load_file, parse_text, run_config_from, scenario_from
from .domain import CurrentProfileEstimate, DiveRecord, InvalidRecordError, Trajectory
from .inversion import InversionResult, integrate_displacement, invert
from .simulator import InfeasibleScenarioError, SyntheticDive, generate
from .sparse_lsq import SolverError
from .statespace import JointSolution, solve_joint

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4
THREADS_ENV = "GLIDERDEC_THREADS"
RUN_KEYS = ("scenario", "inversion", "statespace", "method", "plots", "sweep")

log = logging.getLogger("gliderdec")


def _fail(code: int, message: str) -> int:
    print(f"gliderdec: {message}", file=sys.stderr)
    return code


def _mapping(path: Optional[str]) -> dict:
    return {} if path is None else load_file(path)


# simulate

def cmd_simulate(scenario_file: Optional[str], out: str, seed: Optional[int] = None) -> int:
    try:
        mapping = _mapping(scenario_file)
        spec = scenario_from(mapping)
        if seed is not None:
            spec = dataclasses.replace(spec, seed=int(seed))
    except ConfigError as exc:
        return _fail(EXIT_INPUT, str(exc))
    try:
        syn = generate(spec)
    except InfeasibleScenarioError as exc:
        return _fail(EXIT_INFEASIBLE, f"infeasible scenario: {exc}")
    write_simulation(out, syn)
    return EXIT_OK


def write_simulation(out, syn: SyntheticDive) -> None:
    d = Path(out)
    bundle.write_bundle(d, syn.dive)
    bundle.write_profile(d / "truth_profile.csv", syn.truth_profile)
    ts = syn.truth_states
    bundle.write_csv(d / "truth_states.csv", ["time_s", "east_m", "north_m", "u_g_mps", "v_g_mps"],
                     [ts.t, ts.east, ts.north, ts.u_g, ts.v_g])


# process

@dataclasses.dataclass
class ProcessOutcome:
    inversion: Optional[InversionResult]
    joint: Optional[JointSolution]
    trajectories: dict
    comparison: dict
    residuals: dict


def profile_correlation(a: CurrentProfileEstimate, b: CurrentProfileEstimate) -> dict:
    """Per-component Pearson correlation over depth nodes covered in both profiles."""
    both = (a.coverage > 0) & (b.coverage > 0)
    out = {}
    for comp in ("u", "v"):
        x, y = getattr(a, comp)[both], getattr(b, comp)[both]
        if len(x) < 2 or np.std(x) == 0 or np.std(y) == 0:
            out[comp] = None
        else:
            out[comp] = float(np.corrcoef(x, y)[0, 1])
    return out


def _residual_entry(residuals: dict, cond: float, method: str) -> dict:
    blocks = {k: np.atleast_1d(np.asarray(v, dtype=float)).tolist() for k, v in residuals.items()}
    return {"blocks": blocks, "condition_estimate": float(cond), "method": method}


def run_methods(dive: DiveRecord, config: RunConfig) -> ProcessOutcome:
    """Run the configured methods and derive trajectories and comparison metrics."""
    inv = invert(dive, config.inversion) if config.runs_invert else None
    joint = solve_joint(dive, config.statespace) if config.runs_joint else None
    epochs = joint.epochs if joint is not None else inv.grids.t_hat
    dead = navigation.dead_reckon(dive.ttw, dive.gps_start, epochs)
    avg = navigation.depth_averaged_correction(dead, dive.gps_end)
    trajectories = {"dead": dead, "avg": avg}
    offsets = {"avg_vs_dead": navigation.max_horizontal_offset(avg, dead)}
    closure = {}
    residuals = {}
    methods = []
    if inv is not None:
        methods.append("invert")
        closure["invert"] = float(np.max(np.abs(integrate_displacement(inv) - dive.displacement)))
        residuals["invert"] = _residual_entry(inv.residuals, inv.condition_estimate, inv.solution.method)
    if joint is not None:
        methods.append("joint")
        adcp = navigation.adcp_informed_trajectory(joint)
        trajectories["adcp"] = adcp
        offsets["adcp_vs_avg"] = navigation.max_horizontal_offset(adcp, avg)
        offsets["adcp_vs_dead"] = navigation.max_horizontal_offset(adcp, dead)
        ends = np.array([joint.positions[0] - dive.gps_start.position, joint.positions[-1] - dive.gps_end.position])
        closure["joint"] = float(np.max(np.hypot(ends[:, 0], ends[:, 1])))
        residuals["joint"] = _residual_entry(joint.residuals, joint.condition_estimate, joint.solution.method)
    corr = profile_correlation(inv.profile, joint.profile) if inv is not None and joint is not None else None
    comparison = {"methods": methods, "correlation": corr, "max_horizontal_offset_m": offsets,
                  "gps_closure_m": closure}
    return ProcessOutcome(inv, joint, trajectories, comparison, residuals)


def write_outcome(out, dive: DiveRecord, outcome: ProcessOutcome, plots: bool) -> None:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    if outcome.inversion is not None:
        bundle.write_profile(d / "profile_invert.csv", outcome.inversion.profile)
    if outcome.joint is not None:
        bundle.write_profile(d / "profile_joint.csv", outcome.joint.profile)
    for name, traj in outcome.trajectories.items():
        bundle.write_trajectory(d / f"trajectory_{name}.csv", traj)
    bundle.write_json(d / "residuals.json", outcome.residuals)
    bundle.write_json(d / "comparison.json", outcome.comparison)
    if plots:
        from . import plots as P

        main = outcome.inversion if outcome.inversion is not None else None
        if main is not None:
            ping_u = np.column_stack([np.interp(dive.adcp.t, main.grids.t_hat, main.otg[:, j]) for j in range(2)])
            P.plot_traces_and_profile(d / "traces_profile.svg", dive, main.profile, ping_u)
        else:
            j = outcome.joint
            ping_u = np.column_stack([np.interp(dive.adcp.t, j.epochs, j.velocities[:, k]) for k in range(2)])
            P.plot_traces_and_profile(d / "traces_profile.svg", dive, j.profile, ping_u)
        if outcome.inversion is not None and outcome.joint is not None:
            P.plot_method_comparison(d / "method_comparison.svg", outcome.inversion.profile, outcome.joint.profile)
        names = {"dead": "dead reckoning", "avg": "depth-averaged", "adcp": "ADCP-informed"}
        P.plot_trajectories(d / "trajectories.svg", {names[k]: v for k, v in outcome.trajectories.items()},
                            fixes=[dive.gps_start, dive.gps_end])


def cmd_process(bundle_dir: str, config: RunConfig) -> int:
    try:
        dive = bundle.load_bundle(bundle_dir)
    except bundle.BundleParseError as exc:
        return _fail(EXIT_INPUT, f"parse error: {exc}")
    except InvalidRecordError as exc:
        listing = "\n".join(f"  {v}" for v in exc.violations)
        return _fail(EXIT_INPUT, f"dive failed validation with {len(exc.violations)} violation(s):\n{listing}")
    try:
        outcome = run_methods(dive, config)
    except SolverError as exc:
        return _fail(EXIT_SOLVER, f"solver failure: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INPUT, f"cannot process dive: {exc}")
    write_outcome(config.output_dir, dive, outcome, config.emit_plots)
    return EXIT_OK


# sweep

SWEEP_METRICS = ["rmse_invert", "rmse_joint", "gps_closure_invert_m", "endpoint_error_joint_m",
                 "correlation_u", "correlation_v"]


def parse_grid_arg(text: str) -> tuple[str, list]:
    """``section.field=v1,v2,...`` with TOML scalar values."""
    if "=" not in text:
        raise ConfigError(f"grid entry {text!r}: expected key=v1,v2,...")
    key, values = text.split("=", 1)
    parsed = parse_text(f"v = [{values}]", f"--grid {key.strip()}")["v"]
    if not parsed:
        raise ConfigError(f"grid entry {key.strip()!r}: no values")
    return key.strip(), parsed


def grid_cells(grid: dict[str, list]) -> list[dict]:
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def profile_rmse(est: CurrentProfileEstimate, truth: CurrentProfileEstimate) -> float:
    cov = est.coverage > 0
    err = np.concatenate([(est.u - truth.u)[cov], (est.v - truth.v)[cov]])
    return float(np.sqrt(np.mean(err ** 2)))


def run_cell(base: RunConfig, cell: dict, dives: dict) -> dict:
    row = {k: v for k, v in cell.items()}
    try:
        config = base
        for key, value in cell.items():
            config = apply_override(config, key, value)
    except ConfigError as exc:
        return {**row, "status": "invalid_config", "message": str(exc)}
    try:
        syn = dives.get(config.scenario)
        if syn is None:
            syn = generate(config.scenario)
    except InfeasibleScenarioError as exc:
        return {**row, "status": "invalid_config", "message": f"infeasible scenario: {exc}"}
    both = dataclasses.replace(config, method="both")
    try:
        outcome = run_methods(syn.dive, both)
    except SolverError as exc:
        return {**row, "status": "solver_failure", "message": str(exc)}
    except ValueError as exc:
        return {**row, "status": "solver_failure", "message": str(exc)}
    inv, joint = outcome.inversion, outcome.joint
    truth_inv = syn.truth_profile_on(inv.grids.z_hat)
    corr = outcome.comparison["correlation"]
    metrics = {
        "rmse_invert": profile_rmse(inv.profile, truth_inv),
        "rmse_joint": profile_rmse(joint.profile, syn.truth_profile_on(joint.grids.z_hat)),
        "gps_closure_invert_m": outcome.comparison["gps_closure_m"]["invert"],
        "endpoint_error_joint_m": outcome.comparison["gps_closure_m"]["joint"],
        "correlation_u": corr["u"],
        "correlation_v": corr["v"],
    }
    return {**row, **metrics, "status": "ok", "message": ""}


def sweep_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw)) if raw.strip() else 1
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return 1


def cmd_sweep(scenario_file: Optional[str], grid: dict[str, list], out: str, base: RunConfig) -> int:
    if not grid:
        return _fail(EXIT_INPUT, "sweep grid is empty")
    try:
        generate(base.scenario)
    except InfeasibleScenarioError as exc:
        return _fail(EXIT_INFEASIBLE, f"infeasible scenario: {exc}")
    cells = grid_cells(grid)
    dives = {base.scenario: generate(base.scenario)}
    with ThreadPoolExecutor(max_workers=sweep_threads()) as pool:
        rows = list(pool.map(lambda c: run_cell(base, c, dives), cells))
    header = ["cell"] + list(grid) + ["status"] + SWEEP_METRICS + ["message"]
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(rows):
            line = [str(i)]
            for key in header[1:]:
                value = row.get(key, "")
                if value is None or (isinstance(value, float) and not np.isfinite(value)):
                    value = ""
                line.append(_cell_text(value))
            w.writerow(line)
    return EXIT_OK


def _cell_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float, np.integer, np.floating)):
        return bundle.fmt(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_cell_text(v) for v in value)
    return str(value)


# argument handling

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gliderdec", description="Glider ADCP current profiles and navigation.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dive bundle with truth files")
    sim.add_argument("scenario", nargs="?", help="scenario file (TOML or JSON); defaults when omitted")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, help="override the scenario seed")

    proc = sub.add_parser("process", help="estimate profiles and trajectories for a dive bundle")
    proc.add_argument("bundle", help="dive bundle directory")
    proc.add_argument("--out", required=True, help="output directory")
    proc.add_argument("--method", choices=("invert", "joint", "both"), help="solver(s) to run")
    proc.add_argument("--config", help="run configuration file (TOML or JSON)")
    proc.add_argument("--plots", action="store_true", default=None, help="write SVG figures")
    proc.add_argument("--seed", type=int, help="accepted for symmetry; processing is deterministic")

    sw = sub.add_parser("sweep", help="run both methods over a grid of weights on one synthetic dive")
    sw.add_argument("scenario", nargs="?", help="scenario file; its [sweep] table may hold the grid")
    sw.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                    help="grid axis such as inversion.lambda_o=1,10,100 (repeatable)")
    sw.add_argument("--out", required=True, help="output CSV path")
    sw.add_argument("--config", help="base run configuration file")
    sw.add_argument("--seed", type=int, help="override the scenario seed")
    return parser


def _run_config(args, mapping: dict) -> RunConfig:
    config = run_config_from(mapping)
    if getattr(args, "method", None):
        config = dataclasses.replace(config, method=args.method)
    if getattr(args, "plots", None):
        config = dataclasses.replace(config, emit_plots=True)
    return dataclasses.replace(config, output_dir=Path(args.out))


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.out, args.seed)
    if args.command == "process":
        try:
            config = _run_config(args, _mapping(args.config))
        except ConfigError as exc:
            return _fail(EXIT_INPUT, str(exc))
        return cmd_process(args.bundle, config)
    try:
        mapping = _mapping(args.scenario)
        if "scenario" not in mapping:
            loose = {k: v for k, v in mapping.items() if k not in RUN_KEYS}
            mapping = {k: v for k, v in mapping.items() if k in RUN_KEYS}
            mapping["scenario"] = loose
        if args.config:
            extra = load_file(args.config)
            mapping = {**mapping, **{k: v for k, v in extra.items() if k != "scenario"}}
        config = _run_config(args, mapping)
        if args.seed is not None:
            config = dataclasses.replace(config, scenario=dataclasses.replace(config.scenario, seed=int(args.seed)))
        grid = {}
        for key, values in _flatten(mapping.get("sweep", {})).items():
            if not isinstance(values, list):
                raise ConfigError(f"sweep.{key}: expected a list of values")
            grid[key] = values
        for text in args.grid:
            key, values = parse_grid_arg(text)
            grid[key] = values
    except ConfigError as exc:
        return _fail(EXIT_INPUT, str(exc))
    return cmd_sweep(args.scenario, grid, args.out, config)


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in table.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


if __name__ == "__main__":
    sys.exit(main())
