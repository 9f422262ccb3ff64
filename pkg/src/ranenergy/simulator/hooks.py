"""hooks.py
Ready-made RIC hooks.

PowerScheduleHook replays a fixed timetable of commands. TorchPolicyHook lets
a torch model pick transmit powers from a per-cell observation; torch is only
imported when that hook is built (``pip install ranenergy[ml]``).
"""
from __future__ import annotations

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .events import Command, RicHook, SetPower, Sleep
from .nodes import CellGroup, NetworkSnapshot
from .topology import NetworkConfig


class PowerScheduleHook(RicHook):
    """Issue pre-planned commands at fixed times."""

    def __init__(self, schedule: Iterable[Tuple[float, Command]]):
        super().__init__()
        self._schedule: Dict[float, List[Command]] = {}
        for t_s, command in schedule:
            self._schedule.setdefault(float(t_s), []).append(command)

    def on_interval(self, snapshot: NetworkSnapshot) -> List[Command]:
        due: List[Command] = []
        for t_s, commands in self._schedule.items():
            if math.isclose(t_s, snapshot.t_s, rel_tol=0.0, abs_tol=1e-9):
                due.extend(commands)
        return due


# Features per cell fed to the policy, in this order.
OBSERVATION_FEATURES = ("p_tx_fraction", "active", "attached_share", "mean_tp_mbps")


def observe(snapshot: NetworkSnapshot) -> np.ndarray:
    """Per-cell observation matrix, shape (cells, len(OBSERVATION_FEATURES))."""
    n = snapshot.n_cells
    counts = snapshot.attached_counts()
    n_ue = max(len(snapshot.serving), 1)
    attached = snapshot.serving >= 0
    tp_sum = np.bincount(snapshot.serving[attached], weights=snapshot.throughput_bps[attached] / 1e6, minlength=n)
    mean_tp = np.divide(tp_sum, counts, out=np.zeros(n), where=counts > 0)
    return np.column_stack([
        [c.p_tx_w / c.p_max_w for c in snapshot.cells],
        [1.0 if c.active else 0.0 for c in snapshot.cells],
        counts / n_ue,
        mean_tp,
    ]).astype(np.float32)


class TorchPolicyHook(RicHook):
    """
    Drive cell powers from a torch module.

    The module receives a float32 tensor of shape (cells, 4) built by
    `observe` and must return one value per cell. Values are clamped to
    [0, 1] and read as a fraction of P_max; fractions below `sleep_below`
    put the cell to sleep. Only `cells` are steered, by default the
    variable-power group. Explicit ids must be distinct and below `n_cells`.
    """

    def __init__(self, module, cells: Optional[Sequence[int]] = None, sleep_below: float = 1e-3,
                 every_s: Optional[float] = None, n_cells: int = NetworkConfig.n_bs):
        super().__init__()
        self.n_cells = int(n_cells)
        self.cells = None if cells is None else _checked_cells(cells, self.n_cells)
        import torch  # optional dependency

        self._torch = torch
        self.module = module
        self.sleep_below = sleep_below
        self.every_s = every_s
        self.module.eval()

    def on_interval(self, snapshot: NetworkSnapshot) -> List[Command]:
        if self.every_s and not math.isclose(math.remainder(snapshot.t_s, self.every_s), 0.0, abs_tol=1e-9):
            return []
        torch = self._torch
        with torch.no_grad():
            obs = torch.from_numpy(observe(snapshot))
            out = self.module(obs).reshape(-1).clamp(0.0, 1.0).cpu().numpy()
        if len(out) != snapshot.n_cells or snapshot.n_cells != self.n_cells:
            logging.error(f"Policy returned {len(out)} values for {snapshot.n_cells} cells "
                          f"(hook built for {self.n_cells}); ignored")
            return []

        targets = self.cells
        if targets is None:
            targets = [c.cell_id for c in snapshot.cells if c.group is CellGroup.VARIABLE]
        commands: List[Command] = []
        for cell_id in targets:
            cell = snapshot.cells[cell_id]
            fraction = float(out[cell_id])
            if fraction < self.sleep_below:
                if cell.active:
                    commands.append(Sleep(cell_id))
            else:
                p = min(fraction * cell.p_max_w, cell.p_max_w)
                if not math.isclose(p, cell.p_tx_w, rel_tol=1e-9):
                    commands.append(SetPower(cell_id, p))
        return commands


def _checked_cells(cells: Sequence[int], n_cells: int) -> List[int]:
    ids = [int(c) for c in cells]
    bad = [c for c in ids if not 0 <= c < n_cells]
    if bad:
        raise ValueError(f"Cell ids {bad} outside 0..{n_cells - 1}")
    if len(set(ids)) != len(ids):
        raise ValueError(f"Duplicate cell ids in {ids}")
    return ids
