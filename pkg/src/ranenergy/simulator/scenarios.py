"""scenarios.py
Scenario definitions: which cells vary their power (K^v), the power grid they
sweep over, and the seeds each level is repeated for.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from .radio import dbm_to_w

SLEEP = -math.inf
SLEEP_LABEL = "sleep"

# a requested level this close to P_max in dBm means exactly P_max
NOMINAL_TOLERANCE_DB = 0.05


class ScenarioError(ValueError):
    """An invalid scenario: unknown name, cell id outside the plan, level above P_max."""


def default_power_grid() -> Tuple[float, ...]:
    """43, 40, ..., 4, 1 dBm followed by sleep: 16 levels."""
    return tuple(float(p) for p in range(43, 0, -3)) + (SLEEP,)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    variable_cells: Tuple[int, ...]
    power_grid_dbm: Tuple[float, ...] = field(default_factory=default_power_grid)
    seeds: Tuple[int, ...] = tuple(range(100))

    def __post_init__(self) -> None:
        if len(set(self.variable_cells)) != len(self.variable_cells):
            raise ScenarioError(f"Scenario {self.name!r}: duplicate cell ids {self.variable_cells}")
        if not self.seeds:
            raise ScenarioError(f"Scenario {self.name!r}: no seeds")
        if any(s < 0 or s >= 2 ** 64 for s in self.seeds):
            raise ScenarioError(f"Scenario {self.name!r}: seeds must be 64-bit non-negative integers")
        if not self.power_grid_dbm:
            raise ScenarioError(f"Scenario {self.name!r}: empty power grid")

    def validate(self, n_bs: int, p_max_w: float) -> None:
        """Check the scenario against a deployment; raises ScenarioError."""
        bad = [c for c in self.variable_cells if not 0 <= c < n_bs]
        if bad:
            raise ScenarioError(f"Scenario {self.name!r}: cell id(s) {bad} outside 0..{n_bs - 1}")
        for level in self.power_grid_dbm:
            level_to_watts(level, p_max_w)

    def static_cells(self, n_bs: int) -> Tuple[int, ...]:
        members = set(self.variable_cells)
        return tuple(c for c in range(n_bs) if c not in members)

    def with_grid(self, grid: Iterable[float]) -> "ScenarioSpec":
        return ScenarioSpec(self.name, self.variable_cells, tuple(grid), self.seeds)

    def with_seeds(self, seeds: Iterable[int]) -> "ScenarioSpec":
        return ScenarioSpec(self.name, self.variable_cells, self.power_grid_dbm, tuple(seeds))


BUILTIN_SCENARIOS: Dict[str, Tuple[int, ...]] = {
    "centre": (9,),
    "inner-ring-antipodal": (8, 10),
    "inner-ring-alternate": (4, 10, 13),
    "central-triad": (4, 8, 9),
}

# every cell at P_max; kept out of the Fig. 3 style sweep set
BASELINE = "baseline"


def resolve_scenario(name_or_ids: str) -> ScenarioSpec:
    """
    Look up a built-in scenario by name, or build one from a comma-separated
    list of cell ids (``"4,10,13"`` gives a scenario named ``cells-4-10-13``).
    """
    key = name_or_ids.strip()
    if key in BUILTIN_SCENARIOS:
        return ScenarioSpec(key, BUILTIN_SCENARIOS[key])
    if key == BASELINE:
        return ScenarioSpec(BASELINE, ())
    try:
        ids = tuple(int(tok) for tok in key.split(",") if tok.strip())
    except ValueError:
        known = ", ".join(list(BUILTIN_SCENARIOS) + [BASELINE])
        raise ScenarioError(f"Unknown scenario {name_or_ids!r} (known: {known}, or cell ids like 4,10,13)")
    if not ids:
        raise ScenarioError("Empty scenario cell list")
    if any(i < 0 for i in ids):
        raise ScenarioError(f"Negative cell id in {name_or_ids!r}")
    return ScenarioSpec("cells-" + "-".join(str(i) for i in ids), ids)


def builtin_scenarios() -> List[ScenarioSpec]:
    return [ScenarioSpec(name, cells) for name, cells in BUILTIN_SCENARIOS.items()]


# ------------------------------------------------------------------------ #
# Power levels
# ------------------------------------------------------------------------ #
def level_to_watts(level_dbm: float, p_max_w: float) -> float:
    """Grid level in dBm to transmit power in W; sleep is 0 W."""
    if level_dbm == SLEEP:
        return 0.0
    if math.isnan(level_dbm) or math.isinf(level_dbm):
        raise ScenarioError(f"Invalid power level {level_dbm}")
    p_max_dbm = 10.0 * math.log10(p_max_w) + 30.0
    if abs(level_dbm - p_max_dbm) <= NOMINAL_TOLERANCE_DB:
        return float(p_max_w)
    if level_dbm > p_max_dbm:
        raise ScenarioError(f"Power level {level_dbm} dBm exceeds P_max ({p_max_dbm:.2f} dBm)")
    return float(dbm_to_w(level_dbm))


def canonical_level(level_dbm: float, p_max_w: float) -> float:
    """Snap a level within the nominal tolerance of P_max onto P_max in dBm, rounded to 0.1 dB."""
    if level_dbm == SLEEP:
        return SLEEP
    p_max_dbm = 10.0 * math.log10(p_max_w) + 30.0
    if abs(level_dbm - p_max_dbm) <= NOMINAL_TOLERANCE_DB:
        return round(p_max_dbm, 1)
    return float(level_dbm)


def watts_to_level(p_tx_w: float, p_max_w: float) -> float:
    """Inverse of `level_to_watts`: 0 W is sleep."""
    if p_tx_w < 0:
        raise ScenarioError(f"Negative transmit power {p_tx_w} W")
    if p_tx_w == 0:
        return SLEEP
    return canonical_level(10.0 * math.log10(p_tx_w) + 30.0, p_max_w)


def level_label(level_dbm: float) -> str:
    """Directory / table label of a level: ``sleep``, ``43``, ``37.5``."""
    if level_dbm == SLEEP:
        return SLEEP_LABEL
    return f"{level_dbm:g}"


def parse_level(label: str) -> float:
    text = str(label).strip().lower()
    if text in (SLEEP_LABEL, "-inf"):
        return SLEEP
    try:
        return float(text)
    except ValueError:
        raise ScenarioError(f"Invalid power level {label!r}")


def parse_grid(text: str) -> Tuple[float, ...]:
    """Comma-separated levels, e.g. ``"43,37,sleep"``."""
    return tuple(parse_level(tok) for tok in text.split(",") if tok.strip())


def parse_seeds(text: str) -> Tuple[int, ...]:
    """``"7"`` or an inclusive range ``"0..99"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            if hi < lo:
                raise ScenarioError(f"Empty seed range {text!r}")
            return tuple(range(lo, hi + 1))
        return (int(text),)
    except ValueError:
        raise ScenarioError(f"Invalid seed specification {text!r}")


def sort_levels(levels: Sequence[float]) -> List[float]:
    """Ascending, sleep first: the order of the plot x-axis."""
    return sorted(levels)
