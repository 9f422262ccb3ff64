"""metrics.py
Per-cell and set-based metrics, and their aggregation over seeds.

Per interval every cell gets a mean UE throughput T_j (0 when nothing is
attached). A run's set metrics average T_j and P_BS_j over time, then over the
members of the set:

    T_S  = mean_j T_j                 (Mb/s)
    PC_S = mean_j P_BS_j              (kW)
    SE_S = T_S / B                    (b/s/Hz)
    EE_S = T_S * tau / (PC_S * tau)   (Mb/J; tau cancels)
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .nodes import UNATTACHED

METRIC_FIELDS = ("t_set_mbps", "pc_set_kw", "se_set", "ee_set")


class SetKind(Enum):
    K_V = "K_v"
    K_S = "K_s"
    UNION = "union"


class EmptyCellMean(Enum):
    ZERO = "zero"        # a cell with no attached UEs has mean throughput 0
    EXCLUDE = "exclude"  # ... or is left out of the set means


@dataclass(frozen=True)
class SetDefinition:
    name: str
    members: Tuple[int, ...]
    kind: SetKind


@dataclass(frozen=True)
class SetMetrics:
    t_set_mbps: float
    pc_set_kw: float
    se_set: float
    ee_set: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def scenario_sets(variable_cells: Sequence[int], n_bs: int) -> Tuple[SetDefinition, SetDefinition, SetDefinition]:
    """K^v, K^s and their union for a scenario over `n_bs` cells."""
    kv = tuple(sorted(int(c) for c in variable_cells))
    ks = tuple(c for c in range(n_bs) if c not in set(kv))
    return (SetDefinition(SetKind.K_V.value, kv, SetKind.K_V),
            SetDefinition(SetKind.K_S.value, ks, SetKind.K_S),
            SetDefinition(SetKind.UNION.value, tuple(range(n_bs)), SetKind.UNION))


# ------------------------------------------------------------------------ #
# Per-cell means
# ------------------------------------------------------------------------ #
def per_cell_mean_throughput(serving: np.ndarray, throughput: np.ndarray, n_cells: int,
                             empty: EmptyCellMean = EmptyCellMean.ZERO) -> np.ndarray:
    """Mean throughput of the UEs attached to each cell, one time slice."""
    serving = np.asarray(serving, dtype=np.int64)
    attached = serving != UNATTACHED
    sums = np.bincount(serving[attached], weights=np.asarray(throughput, dtype=float)[attached],
                       minlength=n_cells)
    counts = np.bincount(serving[attached], minlength=n_cells)
    fill = 0.0 if empty is EmptyCellMean.ZERO else np.nan
    out = np.full(n_cells, fill)
    np.divide(sums, counts, out=out, where=counts > 0)
    return out


def mean_bs_throughput(cell_id: int, serving: np.ndarray, throughput: np.ndarray,
                       empty: EmptyCellMean = EmptyCellMean.ZERO) -> float:
    """Mean throughput of one cell's attached UEs; 0 (or NaN with EXCLUDE) when it has none."""
    serving = np.asarray(serving, dtype=np.int64)
    n_cells = max(cell_id, int(serving.max(initial=UNATTACHED))) + 1
    return float(per_cell_mean_throughput(serving, throughput, n_cells, empty)[cell_id])


# ------------------------------------------------------------------------ #
# Set metrics
# ------------------------------------------------------------------------ #
def _members(set_def: SetDefinition, values: np.ndarray) -> np.ndarray:
    if not set_def.members:
        raise ValueError(f"Set {set_def.name!r} has no members")
    return np.asarray(values, dtype=float)[list(set_def.members)]


def set_throughput(set_def: SetDefinition, per_cell_means: np.ndarray) -> float:
    """Arithmetic mean of the members' mean throughputs; NaN entries are skipped."""
    vals = _members(set_def, per_cell_means)
    vals = vals[~np.isnan(vals)]
    return float(vals.mean()) if len(vals) else 0.0


def set_power(set_def: SetDefinition, per_cell_powers_w: np.ndarray) -> float:
    """Mean member consumption in kW."""
    return float(_members(set_def, per_cell_powers_w).mean()) / 1e3


def set_se(t_set_mbps: float, bandwidth_hz: float) -> float:
    if not bandwidth_hz > 0:
        raise ValueError(f"Bandwidth must be > 0 Hz, got {bandwidth_hz}")
    return t_set_mbps * 1e6 / bandwidth_hz


def set_ee(t_set_mbps: float, pc_set_kw: float) -> float:
    """Megabits delivered per joule consumed."""
    if not pc_set_kw > 0:
        raise ValueError(f"Set power must be > 0 kW, got {pc_set_kw}")
    return t_set_mbps / (pc_set_kw * 1e3)


def set_metrics(set_def: SetDefinition, per_cell_means_mbps: np.ndarray, per_cell_powers_w: np.ndarray,
                bandwidth_hz: float) -> SetMetrics:
    t = set_throughput(set_def, per_cell_means_mbps)
    pc = set_power(set_def, per_cell_powers_w)
    return SetMetrics(t, pc, set_se(t, bandwidth_hz), set_ee(t, pc))


def run_set_metrics(cell_log: pd.DataFrame, bandwidth_hz: float) -> Dict[str, SetMetrics]:
    """
    Set metrics of one run from its cell log.

    Parameters
    ----------
    cell_log : pandas.DataFrame
        Rows ``t_s, cell_id, group, p_cons_w, mean_tp_mbps`` for every cell
        at every interval.
    bandwidth_hz : float
        System bandwidth B.

    Returns
    -------
    dict
        ``{"K_v": SetMetrics, "K_s": SetMetrics, "union": SetMetrics}``; a set
        with no members is left out.
    """
    tp = cell_log.pivot(index="t_s", columns="cell_id", values="mean_tp_mbps").sort_index(axis=1)
    pc = cell_log.pivot(index="t_s", columns="cell_id", values="p_cons_w").sort_index(axis=1)
    tp_arr = tp.to_numpy(dtype=float)
    # time average; a cell without UEs in every interval stays NaN under EXCLUDE
    counts = np.sum(~np.isnan(tp_arr), axis=0)
    sums = np.nansum(tp_arr, axis=0)
    mean_tp = np.full(tp_arr.shape[1], np.nan)
    np.divide(sums, counts, out=mean_tp, where=counts > 0)
    mean_pc = pc.to_numpy(dtype=float).mean(axis=0)

    groups = cell_log.drop_duplicates("cell_id").set_index("cell_id")["group"].sort_index()
    variable = [int(c) for c, g in groups.items() if g == "variable"]
    out: Dict[str, SetMetrics] = {}
    for set_def in scenario_sets(variable, len(groups)):
        if set_def.members:
            out[set_def.name] = set_metrics(set_def, mean_tp, mean_pc, bandwidth_hz)
    return out


def cell_means_from_ue_log(ue_log: pd.DataFrame, n_cells: int,
                           empty: EmptyCellMean = EmptyCellMean.ZERO) -> pd.DataFrame:
    """Recompute every cell's per-interval mean throughput from a UE log."""
    rows = []
    for t, frame in ue_log.sort_values(["t_s", "ue_id"]).groupby("t_s", sort=True):
        means = per_cell_mean_throughput(frame["serving_cell"].to_numpy(), frame["throughput_mbps"].to_numpy(),
                                         n_cells, empty)
        rows.append(pd.DataFrame({"t_s": t, "cell_id": np.arange(n_cells), "mean_tp_mbps": means}))
    return pd.concat(rows, ignore_index=True)


# ------------------------------------------------------------------------ #
# Aggregation over seeds
# ------------------------------------------------------------------------ #
def runs_table(records: Iterable[dict]) -> pd.DataFrame:
    """
    Flatten per-run summaries into one row per (scenario, level, seed, set).

    Each record carries ``scenario``, ``power_level``, ``seed`` and ``sets``
    (set name -> metric dict), the layout of ``run_summary.json``.
    """
    rows = []
    for rec in records:
        for set_name, values in rec["sets"].items():
            row = {"scenario": rec["scenario"], "power_level": rec["power_level"], "seed": int(rec["seed"]),
                   "set": set_name}
            row.update({k: float(values[k]) for k in METRIC_FIELDS})
            rows.append(row)
    cols = ["scenario", "power_level", "seed", "set", *METRIC_FIELDS]
    return pd.DataFrame(rows, columns=cols)


def aggregate_seeds(runs: pd.DataFrame,
                    expected: Optional[Iterable[Tuple[str, str]]] = None) -> Tuple[pd.DataFrame, List[Tuple[str, str]]]:
    """
    Mean and one sample standard deviation of every metric per
    (scenario, power_level, set).

    Returns the aggregate table and the list of expected
    (scenario, power_level) groups that have no runs at all.
    """
    keys = ["scenario", "power_level", "set"]
    if runs.empty:
        cols = keys + [c for m in METRIC_FIELDS for c in (m, f"{m}_std")] + ["n_seeds"]
        missing = list(expected) if expected is not None else []
        for scenario, level in missing:
            logging.warning(f"No runs for scenario {scenario!r} at level {level!r}")
        return pd.DataFrame(columns=cols), missing
    ordered = runs.sort_values(keys + ["seed"], kind="mergesort")
    grouped = ordered.groupby(keys, sort=True)
    agg = grouped[list(METRIC_FIELDS)].agg(["mean", "std"])
    agg.columns = [f"{m}_std" if stat == "std" else m for m, stat in agg.columns]
    agg["n_seeds"] = grouped["seed"].nunique()
    agg = agg.reset_index()

    missing: List[Tuple[str, str]] = []
    if expected is not None:
        present = set(zip(runs["scenario"], runs["power_level"]))
        missing = [g for g in expected if g not in present]
        for scenario, level in missing:
            logging.warning(f"No runs for scenario {scenario!r} at level {level!r}")
    return agg, missing


def relative_change(aggregate: pd.DataFrame, scenario: str, metric: str, level: str,
                    baseline_level: str = "43", set_name: str = "union") -> float:
    """(value at `level` - value at `baseline_level`) / value at `baseline_level`."""
    sel = aggregate[(aggregate["scenario"] == scenario) & (aggregate["set"] == set_name)].set_index("power_level")
    if level not in sel.index or baseline_level not in sel.index:
        raise KeyError(f"{scenario!r}: levels {level!r} / {baseline_level!r} not in aggregate")
    base = float(sel.loc[baseline_level, metric])
    return (float(sel.loc[level, metric]) - base) / base


def ee_gain(aggregate: pd.DataFrame, scenario: str, level: str, baseline_level: str = "43") -> float:
    return relative_change(aggregate, scenario, "ee_set", level, baseline_level)


def se_change(aggregate: pd.DataFrame, scenario: str, level: str, baseline_level: str = "43") -> float:
    return relative_change(aggregate, scenario, "se_set", level, baseline_level)
