"""sweep.py
Scenario sweeps over (power level x seed), their on-disk layout, seed
aggregation and the replay check.

    <out>/runs/<scenario>/<level>/seed-<n>/cell_log.csv
                                          /run_summary.json
                                          /ue_log.csv        (with --ue-logs)
    <out>/manifest.jsonl     one completed run per line
    <out>/summary.json       per (scenario, level): set metrics, std, n_seeds
    <out>/summary.csv        the same table, flat
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from .config import RunConfig
from .simulator import engine
from .simulator.metrics import (METRIC_FIELDS, EmptyCellMean, aggregate_seeds, cell_means_from_ue_log,
                                run_set_metrics, runs_table)
from .simulator.scenarios import ScenarioSpec, level_label, parse_level

RUNS_DIR = "runs"
MANIFEST = "manifest.jsonl"
SUMMARY_JSON = "summary.json"
SUMMARY_CSV = "summary.csv"
RUN_SUMMARY = "run_summary.json"


@dataclass(frozen=True)
class RunKey:
    scenario: str
    power_level: str
    seed: int

    def path(self, out_dir: Path) -> Path:
        return Path(out_dir) / RUNS_DIR / self.scenario / self.power_level / f"seed-{self.seed}"


@dataclass
class SweepResult:
    planned: List[RunKey]
    completed: List[RunKey] = field(default_factory=list)
    skipped: List[RunKey] = field(default_factory=list)
    failed: Dict[RunKey, str] = field(default_factory=dict)
    missing_groups: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failed and not self.missing_groups


def config_digest(config: RunConfig) -> str:
    return hashlib.sha1(json.dumps(config.as_dict(), sort_keys=True).encode()).hexdigest()[:12]


def plan_runs(scenarios: Sequence[ScenarioSpec]) -> List[Tuple[ScenarioSpec, float, RunKey]]:
    """Every (scenario, level, seed) of a sweep in (scenario, grid, seed) order."""
    plan = []
    for spec in scenarios:
        for level in spec.power_grid_dbm:
            for seed in spec.seeds:
                plan.append((spec, level, RunKey(spec.name, level_label(level), int(seed))))
    return plan


# ------------------------------------------------------------------------ #
# Manifest
# ------------------------------------------------------------------------ #
def read_manifest(out_dir: Path) -> Dict[RunKey, str]:
    """Completed runs recorded in the manifest, with the config digest they ran under."""
    path = Path(out_dir) / MANIFEST
    done: Dict[RunKey, str] = {}
    if not path.is_file():
        return done
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            done[RunKey(entry["scenario"], entry["power_level"], int(entry["seed"]))] = entry.get("config", "")
        except (ValueError, KeyError) as e:
            logging.warning(f"Ignoring malformed manifest line {line!r}: {e}")
    return done


def _append_manifest(out_dir: Path, key: RunKey, digest: str) -> None:
    with open(Path(out_dir) / MANIFEST, "a") as fh:
        fh.write(json.dumps({"scenario": key.scenario, "power_level": key.power_level, "seed": key.seed,
                             "config": digest}, sort_keys=True) + "\n")


# ------------------------------------------------------------------------ #
# Workers
# ------------------------------------------------------------------------ #
def worker(job):
    """
    Top-level worker function for multiprocessing.

    job: (config, scenario, level_dbm, key, out_dir, keep_ue_log)
    """
    config, scenario, level_dbm, key, out_dir, keep_ue_log = job
    try:
        record = engine.run(config, scenario, level_dbm, key.seed, keep_ue_log=keep_ue_log)
        record.write(key.path(out_dir))
        return key, None
    except Exception as e:  # reported by the parent; one bad run must not stop the sweep
        return key, f"{type(e).__name__}: {e}"


def run_sweep(config: RunConfig, scenarios: Sequence[ScenarioSpec], out_dir: Path, jobs: int = 1,
              keep_ue_log: bool = False) -> SweepResult:
    """
    Execute every run of `scenarios`, skipping runs the manifest already lists
    for the same configuration, then rebuild the summaries.
    """
    out_dir = Path(out_dir)
    for spec in scenarios:
        spec.validate(config.network.n_bs, config.network.p_max_w)
    out_dir.mkdir(parents=True, exist_ok=True)

    plan = plan_runs(scenarios)
    digest = config_digest(config)
    done = read_manifest(out_dir)
    result = SweepResult(planned=[key for _, _, key in plan])

    todo = []
    for spec, level, key in plan:
        if done.get(key) == digest and (key.path(out_dir) / RUN_SUMMARY).is_file():
            result.skipped.append(key)
        else:
            todo.append((config, spec, level, key, out_dir, keep_ue_log))
    logging.info(f"Sweep: {len(plan)} run(s) planned, {len(result.skipped)} already done, "
                 f"{len(todo)} to run on {jobs} worker(s)")

    def _collect(key: RunKey, error: Optional[str]) -> None:
        if error is None:
            _append_manifest(out_dir, key, digest)
            result.completed.append(key)
            logging.info(f"✓ {key.scenario} {key.power_level} seed {key.seed}")
        else:
            result.failed[key] = error
            logging.error(f"✗ {key.scenario} {key.power_level} seed {key.seed}: {error}")

    if jobs > 1 and len(todo) > 1:
        with Pool(jobs) as P:
            for key, error in P.imap_unordered(worker, todo):
                _collect(key, error)
    else:
        for job in todo:
            _collect(*worker(job))

    expected = sorted({(k.scenario, k.power_level) for k in result.planned})
    present = [k for k in result.planned if k not in result.failed]
    _, missing = write_summaries(out_dir, present, expected)
    result.missing_groups = missing
    logging.info(f"Sweep finished: {len(result.completed)} run, {len(result.skipped)} skipped, "
                 f"{len(result.failed)} failed")
    return result


# ------------------------------------------------------------------------ #
# Summaries
# ------------------------------------------------------------------------ #
def discover_runs(out_dir: Path) -> List[RunKey]:
    """Run directories under `<out>/runs` that hold a run summary, sorted."""
    keys = []
    for summary in sorted((Path(out_dir) / RUNS_DIR).glob(f"*/*/seed-*/{RUN_SUMMARY}")):
        seed_dir = summary.parent
        keys.append(RunKey(seed_dir.parent.parent.name, seed_dir.parent.name,
                           int(seed_dir.name.split("-", 1)[1])))
    return sorted(keys, key=_key_order)


def _key_order(key: RunKey):
    return key.scenario, parse_level(key.power_level), key.seed


def load_run_summaries(out_dir: Path, keys: Iterable[RunKey]) -> List[dict]:
    records = []
    for key in sorted(keys, key=_key_order):
        path = key.path(out_dir) / RUN_SUMMARY
        if not path.is_file():
            logging.warning(f"Missing run summary {path}")
            continue
        with open(path) as fh:
            records.append(json.load(fh))
    return records


def _json_value(x):
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def summary_document(aggregate: pd.DataFrame, bandwidth_hz: Optional[float]) -> dict:
    groups = []
    for (scenario, level), frame in aggregate.groupby(["scenario", "power_level"], sort=False):
        sets = {}
        for _, row in frame.iterrows():
            entry = {}
            for m in METRIC_FIELDS:
                entry[m] = _json_value(float(row[m]))
                entry[f"{m}_std"] = _json_value(float(row[f"{m}_std"]))
            sets[row["set"]] = entry
        dbm = parse_level(level)
        groups.append({
            "scenario": scenario,
            "power_level": level,
            "power_dbm": None if math.isinf(dbm) else dbm,
            "n_seeds": int(frame["n_seeds"].max()),
            "sets": sets,
        })
    return {"bandwidth_hz": bandwidth_hz, "groups": groups}


def _ordered(aggregate: pd.DataFrame) -> pd.DataFrame:
    order = aggregate.assign(_dbm=aggregate["power_level"].map(parse_level))
    return order.sort_values(["scenario", "_dbm", "set"], kind="mergesort").drop(columns="_dbm").reset_index(drop=True)


def write_summaries(out_dir: Path, keys: Iterable[RunKey],
                    expected: Optional[Iterable[Tuple[str, str]]] = None) -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
    """Aggregate the listed runs from disk into summary.json and summary.csv."""
    records = load_run_summaries(out_dir, keys)
    runs = runs_table(records)
    aggregate, missing = aggregate_seeds(runs, expected)
    aggregate = _ordered(aggregate)
    bandwidth = records[0].get("bandwidth_hz") if records else None
    out_dir = Path(out_dir)
    with open(out_dir / SUMMARY_JSON, "w") as fh:
        json.dump(summary_document(aggregate, bandwidth), fh, indent=2)
        fh.write("\n")
    aggregate.to_csv(out_dir / SUMMARY_CSV, index=False)
    logging.info(f"Wrote {out_dir / SUMMARY_JSON} ({len(records)} run(s), {len(missing)} missing group(s))")
    return aggregate, missing


def aggregate_dir(out_dir: Path) -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
    """Rebuild the summaries from whatever run directories exist under `out_dir`."""
    keys = discover_runs(out_dir)
    if not keys:
        raise FileNotFoundError(f"No runs under {Path(out_dir) / RUNS_DIR}")
    scenarios = sorted({k.scenario for k in keys})
    levels = sorted({k.power_level for k in keys}, key=parse_level)
    expected = [(s, lv) for s in scenarios for lv in levels]
    return write_summaries(out_dir, keys, expected)


# ------------------------------------------------------------------------ #
# Replay
# ------------------------------------------------------------------------ #
def replay_run(run_dir: Path) -> dict:
    """
    Recompute one run's set metrics from its CSV logs.

    The UE log is used for the per-cell mean throughputs when present; power
    always comes from the cell log.
    """
    run_dir = Path(run_dir)
    with open(run_dir / RUN_SUMMARY) as fh:
        meta = json.load(fh)
    cell_log = pd.read_csv(run_dir / "cell_log.csv", float_precision="round_trip")
    ue_path = run_dir / "ue_log.csv"
    ue_log = pd.read_csv(ue_path, float_precision="round_trip") if ue_path.is_file() else None
    if ue_log is not None and len(ue_log):
        means = cell_means_from_ue_log(ue_log, int(meta["n_cells"]),
                                       EmptyCellMean(meta.get("empty_cell_mean", EmptyCellMean.ZERO.value)))
        cell_log = cell_log.drop(columns="mean_tp_mbps").merge(means, on=["t_s", "cell_id"], how="left")
    sets = run_set_metrics(cell_log, float(meta["bandwidth_hz"]))
    replayed = dict(meta)
    replayed["sets"] = {name: m.as_dict() for name, m in sets.items()}
    return replayed


def replay_dir(out_dir: Path) -> List[str]:
    """
    Recompute every run and the aggregate from the CSV logs and compare with
    the stored run summaries and summary.json. Returns the differences found.
    """
    out_dir = Path(out_dir)
    problems: List[str] = []
    keys = discover_runs(out_dir)
    if not keys:
        return [f"no runs under {out_dir / RUNS_DIR}"]

    replayed = []
    for key in keys:
        stored = load_run_summaries(out_dir, [key])[0]
        again = replay_run(key.path(out_dir))
        if again["sets"] != stored["sets"]:
            problems.append(f"{key.scenario}/{key.power_level}/seed-{key.seed}: set metrics differ")
        replayed.append(again)

    summary_path = out_dir / SUMMARY_JSON
    if not summary_path.is_file():
        problems.append(f"{summary_path} missing")
        return problems
    with open(summary_path) as fh:
        stored_doc = json.load(fh)
    aggregate, _ = aggregate_seeds(runs_table(replayed))
    doc = summary_document(_ordered(aggregate), replayed[0].get("bandwidth_hz"))
    stored_groups = {(g["scenario"], g["power_level"]): g for g in stored_doc.get("groups", [])}
    for group in doc["groups"]:
        gid = (group["scenario"], group["power_level"])
        if gid not in stored_groups:
            problems.append(f"{gid}: not in {SUMMARY_JSON}")
        elif stored_groups[gid] != group:
            problems.append(f"{gid}: aggregate differs from {SUMMARY_JSON}")
    for gid in stored_groups:
        if gid not in {(g["scenario"], g["power_level"]) for g in doc["groups"]}:
            problems.append(f"{gid}: in {SUMMARY_JSON} but no run logs")
    for p in problems:
        logging.error(f"Replay mismatch: {p}")
    return problems
