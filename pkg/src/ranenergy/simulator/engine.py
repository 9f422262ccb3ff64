"""engine.py
Discrete-event simulation of one run: topology, UE drop, attachment, the
per-interval loop and the CSV log streams.

Key points
----------
• The loop is a simpy process that wakes once per interval. Each interval:
  RIC hooks -> command application -> handover check -> link chain for
  every UE -> per-cell power -> one log row per UE and per cell.
• UEs are stationary, so the cells x UEs channel gain matrix is computed
  once per run and reused for every interval.
• SINR of UE i towards cell j uses every other active cell as interference.
  Inactive cells neither serve nor interfere.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import simpy

from .energy import network_power_w
from .events import Command, EventBus, EventType, RicHook, SetPower, Sleep, Wake
from .metrics import EmptyCellMean, SetMetrics, per_cell_mean_throughput, run_set_metrics
from .nodes import UNATTACHED, CellGroup, CellState, NetworkSnapshot, UEPopulation, log_cells
from .radio import LinkTables, RadioContext, db_to_ratio, ue_throughput
from .scenarios import ScenarioSpec, level_label, level_to_watts
from .topology import SitePlan, build_hex_grid, default_region, place_ues

if TYPE_CHECKING:
    from ..config import RunConfig

UE_LOG_COLUMNS = ["t_s", "seed", "scenario", "ue_id", "serving_cell", "sinr_db", "cqi", "mcs",
                  "se_bps_hz", "throughput_mbps"]
CELL_LOG_COLUMNS = ["t_s", "seed", "scenario", "cell_id", "group", "p_tx_dbm", "p_cons_w", "n_attached",
                    "mean_tp_mbps"]


@dataclass
class SimClock:
    interval_s: float
    until_s: float
    now_s: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.interval_s <= self.until_s:
            raise ValueError(f"Need 0 < interval ({self.interval_s}) <= until ({self.until_s})")

    @property
    def n_intervals(self) -> int:
        return int(math.floor(self.until_s / self.interval_s + 1e-9))

    def time_of(self, k: int) -> float:
        return k * self.interval_s


@dataclass(frozen=True)
class HandoverEvent:
    t_s: float
    ue_id: int
    source: Optional[int]
    target: Optional[int]
    forced: bool


# ------------------------------------------------------------------------ #
# Array-level radio steps
# ------------------------------------------------------------------------ #
def sinr_matrix(p_tx_w: np.ndarray, gain: np.ndarray, noise_w: float) -> np.ndarray:
    """
    Linear SINR of every UE towards every cell, shape (cells, UEs).

    Parameters
    ----------
    p_tx_w : numpy.ndarray
        Transmit power per cell in W; 0 for a sleeping cell.
    gain : numpy.ndarray
        Linear channel gain, shape (cells, UEs).
    noise_w : float
        Receiver noise power over the system bandwidth.
    """
    rx = np.asarray(p_tx_w, dtype=float)[:, np.newaxis] * gain
    interference = np.maximum(rx.sum(axis=0)[np.newaxis, :] - rx, 0.0)
    return rx / (interference + noise_w)


def attach_all(sinr: np.ndarray, active: np.ndarray) -> np.ndarray:
    """Serving cell per UE: highest SINR over active cells, lowest cell id on ties."""
    n_ue = sinr.shape[1]
    if not np.any(active):
        return np.full(n_ue, UNATTACHED, dtype=np.int64)
    masked = np.where(np.asarray(active)[:, np.newaxis], sinr, -np.inf)
    return np.argmax(masked, axis=0).astype(np.int64)


def handover_check(serving: np.ndarray, sinr: np.ndarray, active: np.ndarray, hysteresis_db: float,
                   t_s: float = 0.0) -> Tuple[np.ndarray, List[HandoverEvent]]:
    """
    Re-evaluate attachment against the current SINR matrix.

    A UE moves to its best active cell k when SINR_k exceeds the serving SINR
    by more than `hysteresis_db`. UEs whose serving cell went to sleep (or that
    were unattached) move to the best active cell unconditionally.
    """
    best = attach_all(sinr, active)
    new = serving.copy()
    events: List[HandoverEvent] = []
    if len(serving) == 0:
        return new, events
    ue_ids = np.arange(len(serving))
    attached = serving != UNATTACHED
    serving_ok = np.zeros(len(serving), dtype=bool)
    serving_ok[attached] = np.asarray(active)[serving[attached]]

    forced = ~serving_ok & (best != serving)
    threshold = float(db_to_ratio(hysteresis_db))
    best_sinr = sinr[np.clip(best, 0, None), ue_ids]
    cur_sinr = sinr[np.clip(serving, 0, None), ue_ids]
    better = serving_ok & (best != serving) & (best_sinr > cur_sinr * threshold)

    for i in np.flatnonzero(forced | better):
        src = int(serving[i])
        dst = int(best[i])
        new[i] = dst
        events.append(HandoverEvent(
            t_s=t_s, ue_id=int(i),
            source=None if src == UNATTACHED else src,
            target=None if dst == UNATTACHED else dst,
            forced=bool(forced[i]),
        ))
    return new, events


# ------------------------------------------------------------------------ #
# Run record
# ------------------------------------------------------------------------ #
@dataclass
class RunRecord:
    """Everything a run produced."""
    cell_log: pd.DataFrame
    ue_log: Optional[pd.DataFrame]
    handovers: List[HandoverEvent]
    sets: Dict[str, SetMetrics]
    metadata: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        out = dict(self.metadata)
        out["sets"] = {name: m.as_dict() for name, m in self.sets.items()}
        return out

    def write(self, out_dir: Path) -> None:
        """Write cell_log.csv, run_summary.json and, if kept, ue_log.csv into `out_dir`."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.cell_log.to_csv(out_dir / "cell_log.csv", index=False)
        if self.ue_log is not None:
            self.ue_log.to_csv(out_dir / "ue_log.csv", index=False)
        with open(out_dir / "run_summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ------------------------------------------------------------------------ #
# Simulation
# ------------------------------------------------------------------------ #
class Sim:
    """
    One deterministic run of a scenario at a single K^v power level.

    Args:
        config: Validated run configuration.
        scenario: Which cells are variable; its grid and seeds are not used here.
        level_dbm: Power level applied to every K^v cell (-inf means sleep).
        seed: Seed of the UE drop.
        tables: Pre-loaded link tables; loaded from `config` when omitted.
        keep_ue_log: Override `config.run.keep_ue_log`.
    """

    def __init__(self, config: RunConfig, scenario: ScenarioSpec, level_dbm: float, seed: int,
                 tables: Optional[LinkTables] = None, keep_ue_log: Optional[bool] = None) -> None:
        net = config.network
        scenario.validate(net.n_bs, net.p_max_w)
        self.config = config
        self.scenario = scenario
        self.level_dbm = float(level_dbm)
        self.seed = int(seed)
        self.keep_ue_log = config.run.keep_ue_log if keep_ue_log is None else keep_ue_log
        self.empty_mean = EmptyCellMean(config.run.empty_cell_mean)

        self.env = simpy.Environment()
        self.clock = SimClock(config.run.interval_s, config.run.until_s)
        self.event_bus = EventBus()
        self.hooks: List[RicHook] = []

        self.radio = RadioContext(
            model=config.link.pathloss_model(),
            budget=config.link.budget(),
            tables=tables if tables is not None else config.link.load_tables(),
            carrier_freq_hz=net.carrier_freq_hz,
            bandwidth_hz=net.bandwidth_hz,
            cqi_mcs_map=config.link.mapping(),
        )

        # Topology and UE drop -----------------------------------------------
        self.plan: SitePlan = build_hex_grid(net)
        self.region = default_region(self.plan, net)
        self.ues = UEPopulation(place_ues(self.region, net.ue_density_per_km2, net.ue_height_m, self.seed,
                                          net.fixed_ue_count))

        # Cells at their scenario powers -------------------------------------
        variable = set(scenario.variable_cells)
        kv_power = level_to_watts(self.level_dbm, net.p_max_w)
        self.cells: List[CellState] = []
        for site in self.plan.sites:
            is_var = site.cell_id in variable
            p = kv_power if is_var else net.p_max_w
            self.cells.append(CellState(
                cell_id=site.cell_id,
                position=(site.x_m, site.y_m, site.z_m),
                p_max_w=net.p_max_w,
                p_tx_w=p,
                active=p > 0,
                group=CellGroup.VARIABLE if is_var else CellGroup.STATIC,
            ))

        self.gain = self.radio.gain_matrix(self.plan.xyz, self.ues.xyz)
        self.handovers: List[HandoverEvent] = []
        self._ue_rows: List[Dict[str, np.ndarray]] = []
        self._cell_rows: List[Dict[str, np.ndarray]] = []
        self._p_cons = self._cell_power()

        logging.info(f"Run {scenario.name} @ {level_label(self.level_dbm)} seed {self.seed}: "
                     f"{len(self.ues)} UEs over {self.region.area_km2:.3f} km²")
        log_cells(self.cells)

    # -------------------------------------------------------------------- #
    # Properties
    # -------------------------------------------------------------------- #
    @property
    def p_tx_w(self) -> np.ndarray:
        return np.array([c.p_tx_w for c in self.cells])

    @property
    def active(self) -> np.ndarray:
        return np.array([c.active for c in self.cells], dtype=bool)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def add_hook(self, hook: RicHook) -> None:
        hook.attach(self.event_bus)
        self.hooks.append(hook)

    def snapshot(self) -> NetworkSnapshot:
        return NetworkSnapshot.capture(self.clock.now_s, self.cells, self.ues, self._p_cons)

    # -------------------------------------------------------------------- #
    # Main loop
    # -------------------------------------------------------------------- #
    def run(self) -> RunRecord:
        """Run the clock to tau and return the complete record."""
        started = time.perf_counter()
        sinr = self._sinr()
        self.ues.serving = attach_all(sinr, self.active)
        self._update_links(sinr)

        self.env.process(self._loop())
        self.env.run()

        self.event_bus.publish(EventType.RUN_END, self.clock.until_s)
        for hook in self.hooks:
            hook.detach()
        record = self._record()
        logging.info(f"Run {self.scenario.name} @ {level_label(self.level_dbm)} seed {self.seed} done in "
                     f"{time.perf_counter() - started:.2f} s, {len(self.handovers)} handover(s)")
        return record

    def _loop(self):
        for k in range(self.clock.n_intervals):
            self.clock.now_s = self.clock.time_of(k)
            self.step()
            yield self.env.timeout(self.clock.interval_s)

    def step(self) -> None:
        """One interval at the current clock time."""
        t = self.clock.now_s
        self.event_bus.publish(EventType.INTERVAL_START, t)

        # (1) RIC hooks, then command application
        if self.hooks:
            snap = self.snapshot()
            for hook in self.hooks:
                for command in hook.on_interval(snap):
                    self.apply_command(command)

        # (2) handover on the current powers
        sinr = self._sinr()
        self.ues.serving, events = handover_check(self.ues.serving, sinr, self.active,
                                                  self.config.run.hysteresis_db, t)
        for ev in events:
            self.handovers.append(ev)
            self.event_bus.publish(EventType.HANDOVER, t, cell_id=ev.target, ue_id=ev.ue_id,
                                   source=ev.source, forced=ev.forced)

        # (3) link chain, (4) power, (5) log rows
        self._update_links(sinr)
        self._p_cons = self._cell_power()
        self._log_interval(t)

    # -------------------------------------------------------------------- #
    # Commands
    # -------------------------------------------------------------------- #
    def apply_command(self, command: Command) -> bool:
        """Validate and apply one RIC command; rejected commands leave the state untouched."""
        t = self.clock.now_s
        cell_id = getattr(command, "cell_id", None)
        if not isinstance(cell_id, (int, np.integer)) or not 0 <= cell_id < self.n_cells:
            return self._reject(command, f"unknown cell id {cell_id!r}")
        cell = self.cells[int(cell_id)]
        was_active = cell.active
        try:
            if isinstance(command, SetPower):
                cell.set_power(command.p_tx_w)
            elif isinstance(command, Sleep):
                cell.sleep()
            elif isinstance(command, Wake):
                cell.wake(command.p_tx_w)
            else:
                return self._reject(command, f"unsupported command type {type(command).__name__}")
        except ValueError as e:
            return self._reject(command, str(e))

        if was_active and not cell.active:
            self.event_bus.publish(EventType.CELL_SLEEP, t, cell_id=cell.cell_id)
        elif cell.active and not was_active:
            self.event_bus.publish(EventType.CELL_WAKE, t, cell_id=cell.cell_id, p_tx_w=cell.p_tx_w)
        self.event_bus.publish(EventType.POWER_CHANGED, t, cell_id=cell.cell_id, p_tx_w=cell.p_tx_w)
        return True

    def _reject(self, command: Command, reason: str) -> bool:
        logging.warning(f"t={self.clock.now_s}: rejected {command}: {reason}")
        self.event_bus.publish(EventType.COMMAND_REJECTED, self.clock.now_s,
                               cell_id=getattr(command, "cell_id", None), command=command, reason=reason)
        return False

    # -------------------------------------------------------------------- #
    # Helpers
    # -------------------------------------------------------------------- #
    def _sinr(self) -> np.ndarray:
        return sinr_matrix(self.p_tx_w, self.gain, self.radio.noise_w)

    def _update_links(self, sinr: np.ndarray) -> None:
        ues = self.ues
        attached = ues.serving != UNATTACHED
        serving_sinr = np.zeros(len(ues))
        serving_sinr[attached] = sinr[ues.serving[attached], np.flatnonzero(attached)]
        sinr_db, cqi, mcs, se = self.radio.link_chain(serving_sinr)
        ues.sinr_db = np.where(attached, sinr_db, -np.inf)
        ues.cqi, ues.mcs, ues.se = cqi, mcs, se

        bandwidth = np.full(len(ues), self.radio.bandwidth_hz)
        if self.config.link.share_bandwidth:
            counts = ues.attached_counts(self.n_cells)
            bandwidth[attached] = self.radio.bandwidth_hz / counts[ues.serving[attached]]
        ues.throughput_bps = np.asarray(ue_throughput(se, bandwidth), dtype=float).reshape(len(ues))

    def _cell_power(self) -> np.ndarray:
        return network_power_w(self.p_tx_w, self.active, self.config.energy, self.config.network.p_max_w)

    def _log_interval(self, t: float) -> None:
        ues = self.ues
        n = self.n_cells
        tp_mbps = ues.throughput_bps / 1e6
        if self.keep_ue_log:
            self._ue_rows.append({
                "t_s": np.full(len(ues), t),
                "ue_id": np.arange(len(ues)),
                "serving_cell": ues.serving.copy(),
                "sinr_db": ues.sinr_db.copy(),
                "cqi": ues.cqi.copy(),
                "mcs": ues.mcs.copy(),
                "se_bps_hz": ues.se.copy(),
                "throughput_mbps": tp_mbps,
            })
        self._cell_rows.append({
            "t_s": np.full(n, t),
            "cell_id": np.arange(n),
            "group": np.array([c.group.value for c in self.cells], dtype=object),
            "p_tx_dbm": np.array([c.p_tx_dbm for c in self.cells]),
            "p_cons_w": self._p_cons.copy(),
            "n_attached": ues.attached_counts(n),
            "mean_tp_mbps": per_cell_mean_throughput(ues.serving, tp_mbps, n, self.empty_mean),
        })

    def _frame(self, rows: List[Dict[str, np.ndarray]], columns: Sequence[str]) -> pd.DataFrame:
        if rows:
            data = {k: np.concatenate([r[k] for r in rows]) for k in rows[0]}
        else:
            data = {k: [] for k in columns if k not in ("seed", "scenario")}
        frame = pd.DataFrame(data)
        frame["seed"] = self.seed
        frame["scenario"] = self.scenario.name
        return frame[list(columns)]

    def _record(self) -> RunRecord:
        cell_log = self._frame(self._cell_rows, CELL_LOG_COLUMNS)
        ue_log = self._frame(self._ue_rows, UE_LOG_COLUMNS) if self.keep_ue_log else None
        sets = run_set_metrics(cell_log, self.radio.bandwidth_hz) if len(cell_log) else {}
        metadata = {
            "scenario": self.scenario.name,
            "variable_cells": list(self.scenario.variable_cells),
            "power_level": level_label(self.level_dbm),
            "p_tx_w": level_to_watts(self.level_dbm, self.config.network.p_max_w),
            "seed": self.seed,
            "n_ue": len(self.ues),
            "n_cells": self.n_cells,
            "until_s": self.clock.until_s,
            "interval_s": self.clock.interval_s,
            "bandwidth_hz": self.radio.bandwidth_hz,
            "empty_cell_mean": self.empty_mean.value,
            "n_handovers": len(self.handovers),
        }
        return RunRecord(cell_log=cell_log, ue_log=ue_log, handovers=list(self.handovers), sets=sets,
                         metadata=metadata)


def run(config: RunConfig, scenario: ScenarioSpec, level_dbm: float, seed: int,
        hooks: Sequence[RicHook] = (), tables: Optional[LinkTables] = None,
        keep_ue_log: Optional[bool] = None) -> RunRecord:
    """Build, run and return one simulation; deterministic for fixed inputs."""
    sim = Sim(config, scenario, level_dbm, seed, tables=tables, keep_ue_log=keep_ue_log)
    for hook in hooks:
        sim.add_hook(hook)
    return sim.run()
