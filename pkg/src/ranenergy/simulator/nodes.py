"""nodes.py
Dynamic per-node state: cells (with sleep semantics) and the UE population.

Key points
----------
• A CellState is the only place transmit power lives. `active=False` always
  goes together with `p_tx_w == 0`.
• UEs are held column-wise in a UEPopulation so the engine can work on whole
  arrays; `UEPopulation.ue(i)` gives the per-UE view.
• NetworkSnapshot is what hooks see: copies, with arrays marked read-only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

# serving_cell value of a UE that no cell can serve
UNATTACHED = -1


class CellGroup(Enum):
    VARIABLE = "variable"  # K^v, power set by the scenario
    STATIC = "static"      # K^s, held at P_max


@dataclass
class CellState:
    """A macro cell with its current transmit power."""
    cell_id: int
    position: Tuple[float, float, float]
    p_max_w: float
    p_tx_w: float = 0.0
    active: bool = False
    group: CellGroup = CellGroup.STATIC

    def __post_init__(self) -> None:
        self.validate_power(self.p_tx_w)
        if self.active != (self.p_tx_w > 0):
            raise ValueError(f"Cell {self.cell_id}: active={self.active} with p_tx_w={self.p_tx_w}")

    def validate_power(self, p_tx_w: float) -> None:
        if math.isnan(p_tx_w) or p_tx_w < 0:
            raise ValueError(f"Cell {self.cell_id}: transmit power must be >= 0 W, got {p_tx_w}")
        if p_tx_w > self.p_max_w * (1.0 + 1e-12):
            raise ValueError(f"Cell {self.cell_id}: {p_tx_w} W exceeds P_max = {self.p_max_w} W")

    def set_power(self, p_tx_w: float) -> None:
        """Set a new transmit power; 0 W is the same as sleeping."""
        self.validate_power(p_tx_w)
        self.p_tx_w = float(p_tx_w)
        self.active = self.p_tx_w > 0

    def sleep(self) -> None:
        self.p_tx_w = 0.0
        self.active = False

    def wake(self, p_tx_w: float) -> None:
        if not p_tx_w > 0:
            raise ValueError(f"Cell {self.cell_id}: wake needs a positive power, got {p_tx_w}")
        self.set_power(p_tx_w)

    @property
    def p_tx_dbm(self) -> float:
        if not self.active:
            return -math.inf
        return 10.0 * math.log10(self.p_tx_w) + 30.0

    def __repr__(self) -> str:  # pragma: no cover
        state = f"{self.p_tx_dbm:.2f} dBm" if self.active else "asleep"
        return f"<Cell {self.cell_id} {self.group.value} {state}>"


@dataclass(frozen=True)
class UEState:
    """Link state of one UE at the current interval."""
    ue_id: int
    position: Tuple[float, float, float]
    serving_cell: Optional[int]
    sinr_db: float
    cqi: int
    mcs: int
    se_bps_hz: float
    throughput_bps: float


class UEPopulation:
    """Column store for every UE in a run; row index is the ue_id."""

    def __init__(self, xyz: np.ndarray) -> None:
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        n = len(xyz)
        self.xyz = xyz
        self.serving = np.full(n, UNATTACHED, dtype=np.int64)
        self.sinr_db = np.full(n, -np.inf)
        self.cqi = np.zeros(n, dtype=np.int64)
        self.mcs = np.full(n, -1, dtype=np.int64)
        self.se = np.zeros(n)
        self.throughput_bps = np.zeros(n)

    def __len__(self) -> int:
        return len(self.xyz)

    def ue(self, ue_id: int) -> UEState:
        serving = int(self.serving[ue_id])
        return UEState(
            ue_id=ue_id,
            position=tuple(float(c) for c in self.xyz[ue_id]),
            serving_cell=None if serving == UNATTACHED else serving,
            sinr_db=float(self.sinr_db[ue_id]),
            cqi=int(self.cqi[ue_id]),
            mcs=int(self.mcs[ue_id]),
            se_bps_hz=float(self.se[ue_id]),
            throughput_bps=float(self.throughput_bps[ue_id]),
        )

    def attached_counts(self, n_cells: int) -> np.ndarray:
        served = self.serving[self.serving != UNATTACHED]
        return np.bincount(served, minlength=n_cells)

    def attachment_matrix(self, n_cells: int) -> np.ndarray:
        """X[i, j] = 1 iff UE i is served by cell j."""
        x = np.zeros((len(self), n_cells), dtype=np.int8)
        rows = np.flatnonzero(self.serving != UNATTACHED)
        x[rows, self.serving[rows]] = 1
        return x


def _frozen(a: np.ndarray) -> np.ndarray:
    c = np.array(a, copy=True)
    c.setflags(write=False)
    return c


@dataclass(frozen=True)
class NetworkSnapshot:
    """Read-only copy of the network state handed to RIC hooks."""
    t_s: float
    cells: Tuple[CellState, ...]
    ue_xyz: np.ndarray
    serving: np.ndarray
    sinr_db: np.ndarray
    throughput_bps: np.ndarray
    p_cons_w: np.ndarray

    @classmethod
    def capture(cls, t_s: float, cells, ues: UEPopulation, p_cons_w: np.ndarray) -> "NetworkSnapshot":
        return cls(
            t_s=t_s,
            cells=tuple(replace(c) for c in cells),
            ue_xyz=_frozen(ues.xyz),
            serving=_frozen(ues.serving),
            sinr_db=_frozen(ues.sinr_db),
            throughput_bps=_frozen(ues.throughput_bps),
            p_cons_w=_frozen(p_cons_w),
        )

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def attached_counts(self) -> np.ndarray:
        served = self.serving[self.serving != UNATTACHED]
        return np.bincount(served, minlength=self.n_cells)


def log_cells(cells) -> None:
    logging.debug("Cells: " + ", ".join(repr(c) for c in cells))
