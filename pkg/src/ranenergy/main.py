"""main.py
Command-line entry point.

    ranenergy run       --scenario centre --power-dbm 37 --seed 4
    ranenergy sweep     --scenario inner-ring-alternate --seeds 0..99 --jobs 8
    ranenergy aggregate --out out
    ranenergy plot      --out out
    ranenergy replay    --out out
    ranenergy topology  --out out --seed 0
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Tuple

from .config import ChecksumMismatch, ConfigError, ConfigFileNotFound, RunConfig, load_config
from .plot import load_summary, plot_summary
from .simulator import engine
from .simulator.scenarios import (ScenarioError, ScenarioSpec, builtin_scenarios, canonical_level, level_label,
                                  level_to_watts, parse_grid, parse_seeds, resolve_scenario, watts_to_level)
from .simulator.topology import (build_hex_grid, default_region, place_ues, write_region_csv, write_sites_csv,
                                 write_ues_csv)
from .sweep import SUMMARY_JSON, aggregate_dir, replay_dir, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INCOMPLETE = 4
EXIT_CONFIG_MISSING = 5
EXIT_CHECKSUM = 6


def setup_logging(out_dir: Path, command: str, verbose: bool = False) -> str:
    """
    Log to `<out>/logs/<command>-<timestamp>.log` and to the console.
    Returns the path to the created log file.
    """
    log_dir = Path(out_dir) / "logs"
    os.makedirs(log_dir, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    log_filename = os.path.join(log_dir, f"{command}-{timestamp}.log")

    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)

    file_handler = logging.FileHandler(log_filename, mode="w")
    file_handler.setFormatter(logging.Formatter("%(message)s"))
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(levelname)s - %(message)s"))
    root.addHandler(file_handler)
    root.addHandler(console)
    return log_filename


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ranenergy",
                                     description="Macro-cell RAN energy / spectral efficiency simulator.")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, help="JSON configuration file.")
        p.add_argument("--out", type=Path, help="Output directory (default: run.out_dir of the config).")
        p.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    p_run = sub.add_parser("run", help="Single run at one K^v power level.")
    common(p_run)
    p_run.add_argument("--scenario", required=True, help="Scenario name or comma-separated cell ids.")
    power = p_run.add_mutually_exclusive_group(required=True)
    power.add_argument("--power-dbm", type=float, help="K^v transmit power in dBm.")
    power.add_argument("--power-watts", type=float, help="K^v transmit power in W.")
    power.add_argument("--sleep", action="store_true", help="Put K^v to sleep.")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--until", type=float, help="Run duration in seconds.")

    p_sweep = sub.add_parser("sweep", help="Power grid x seeds for one or more scenarios.")
    common(p_sweep)
    p_sweep.add_argument("--scenario", action="append",
                         help="Scenario name or cell ids; repeatable (default: all built-ins).")
    p_sweep.add_argument("--seeds", default="0..99", help="Seed or inclusive range A..B.")
    p_sweep.add_argument("--grid", help="Comma-separated dBm levels, 'sleep' allowed (default 43..1 step 3 + sleep).")
    p_sweep.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_sweep.add_argument("--ue-logs", action="store_true", help="Also write ue_log.csv per run.")
    p_sweep.add_argument("--until", type=float, help="Run duration in seconds.")

    for name, text in (("aggregate", "Rebuild summary.json/csv from the run directories."),
                       ("plot", "Write SVG panels from summary.json."),
                       ("replay", "Recompute every metric from the CSV logs and compare.")):
        p = sub.add_parser(name, help=text)
        common(p)
        if name == "plot":
            p.add_argument("--summary", type=Path, help="summary.json (default: <out>/summary.json).")
            p.add_argument("--scenario", action="append", help="Expected series (default: built-ins).")

    p_topo = sub.add_parser("topology", help="Dump sites, region and one UE drop as CSV.")
    common(p_topo)
    p_topo.add_argument("--seed", type=int, default=0)
    return parser


# ------------------------------------------------------------------------ #
# Commands
# ------------------------------------------------------------------------ #
def _with_until(config: RunConfig, until: Optional[float]) -> RunConfig:
    return config.replace(run={"until_s": until}) if until is not None else config


def _checked(config: RunConfig, spec: ScenarioSpec) -> ScenarioSpec:
    p_max = config.network.p_max_w
    spec.validate(config.network.n_bs, p_max)
    for level in spec.power_grid_dbm:
        level_to_watts(level, p_max)
    return spec


def prepare_run(args, config: RunConfig) -> Tuple[RunConfig, ScenarioSpec, float]:
    """Resolve scenario, level and duration of `run`; raises ScenarioError / ConfigError."""
    p_max = config.network.p_max_w
    if args.sleep:
        level = watts_to_level(0.0, p_max)
    elif args.power_watts is not None:
        level = watts_to_level(args.power_watts, p_max)
    else:
        level = canonical_level(args.power_dbm, p_max)
    scenario = resolve_scenario(args.scenario).with_grid([level]).with_seeds([args.seed])
    return _with_until(config, args.until), _checked(config, scenario), level


def prepare_sweep(args, config: RunConfig) -> Tuple[RunConfig, List[ScenarioSpec]]:
    names = args.scenario or [s.name for s in builtin_scenarios()]
    seeds = parse_seeds(args.seeds)
    scenarios: List[ScenarioSpec] = []
    for name in names:
        spec = resolve_scenario(name).with_seeds(seeds)
        if args.grid:
            spec = spec.with_grid(parse_grid(args.grid))
        spec = spec.with_grid(canonical_level(lv, config.network.p_max_w) for lv in spec.power_grid_dbm)
        scenarios.append(_checked(config, spec))
    return _with_until(config, args.until), scenarios


def cmd_run(args, config: RunConfig, out_dir: Path) -> int:
    config, scenario, level = args.prepared
    record = engine.run(config, scenario, level, args.seed)
    run_dir = out_dir / "runs" / scenario.name / level_label(level) / f"seed-{args.seed}"
    record.write(run_dir)
    for name, m in record.sets.items():
        logging.info(f"{name:>5}: T={m.t_set_mbps:.3f} Mb/s  PC={m.pc_set_kw:.4f} kW  "
                     f"SE={m.se_set:.4f} b/s/Hz  EE={m.ee_set:.5f} Mb/J")
    logging.info(f"Wrote {run_dir}")
    return EXIT_OK


def cmd_sweep(args, config: RunConfig, out_dir: Path) -> int:
    config, scenarios = args.prepared
    result = run_sweep(config, scenarios, out_dir, jobs=max(1, args.jobs), keep_ue_log=args.ue_logs)
    if not result.complete:
        logging.error(f"Sweep incomplete: {len(result.failed)} failed run(s), "
                      f"{len(result.missing_groups)} missing group(s)")
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_aggregate(args, config: RunConfig, out_dir: Path) -> int:
    _, missing = aggregate_dir(out_dir)
    return EXIT_INCOMPLETE if missing else EXIT_OK


def cmd_plot(args, config: RunConfig, out_dir: Path) -> int:
    summary_path = args.summary or out_dir / SUMMARY_JSON
    written = plot_summary(load_summary(summary_path), out_dir / "plots", args.scenario)
    return EXIT_OK if written else EXIT_RUNTIME


def cmd_replay(args, config: RunConfig, out_dir: Path) -> int:
    problems = replay_dir(out_dir)
    if problems:
        return EXIT_RUNTIME
    logging.info("Replay matches every stored metric")
    return EXIT_OK


def cmd_topology(args, config: RunConfig, out_dir: Path) -> int:
    net = config.network
    plan = build_hex_grid(net)
    region = default_region(plan, net)
    ues = place_ues(region, net.ue_density_per_km2, net.ue_height_m, args.seed, net.fixed_ue_count)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sites_csv(plan, out_dir / "sites.csv")
    write_region_csv(region, out_dir / "region.csv")
    write_ues_csv(ues, out_dir / f"ues-seed-{args.seed}.csv")
    logging.info(f"{len(plan)} sites, region {region.area_km2:.6f} km², {len(ues)} UEs (seed {args.seed})")
    return EXIT_OK


PREPARE = {
    "run": prepare_run,
    "sweep": prepare_sweep,
}

COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "aggregate": cmd_aggregate,
    "plot": cmd_plot,
    "replay": cmd_replay,
    "topology": cmd_topology,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigFileNotFound as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG_MISSING
    except ChecksumMismatch as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECKSUM
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    # inputs are validated before any output file is created
    prepare = PREPARE.get(args.command)
    try:
        args.prepared = prepare(args, config) if prepare else None
    except (ScenarioError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out) if args.out else Path(config.run.out_dir)
    setup_logging(out_dir, args.command, args.verbose)
    try:
        return COMMANDS[args.command](args, config, out_dir)
    except (ScenarioError, ConfigError) as e:
        logging.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logging.exception(f"Runtime error: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
