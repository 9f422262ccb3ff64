"""plot.py
SVG panels of a sweep summary: network throughput, power consumption, EE and
SE of the union set against the K^v power level, one series per scenario.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .simulator.scenarios import BUILTIN_SCENARIOS, SLEEP_LABEL, parse_level  # noqa: E402

SET_NAME = "union"


@dataclass(frozen=True)
class Panel:
    name: str
    metric: str
    ylabel: str
    error_bars: bool


PANELS = (
    Panel("throughput", "t_set_mbps", "Mean network throughput (Mb/s)", False),
    Panel("power", "pc_set_kw", "Mean network power consumption (kW)", False),
    Panel("ee", "ee_set", "Mean energy efficiency (Mb/J)", True),
    Panel("se", "se_set", "Mean spectrum efficiency (b/s/Hz)", True),
)


def setup_style() -> None:
    plt.rcParams["font.family"] = "serif"
    plt.rcParams["axes.grid"] = True
    plt.rcParams["grid.alpha"] = 0.3
    plt.rcParams["grid.linestyle"] = ":"
    plt.rcParams["legend.frameon"] = True
    plt.rcParams["legend.fancybox"] = False
    plt.rcParams["xtick.direction"] = "in"
    plt.rcParams["ytick.direction"] = "in"
    plt.rcParams["savefig.bbox"] = "tight"
    # fixed ids and no timestamp: identical input gives identical files
    plt.rcParams["svg.hashsalt"] = "ranenergy"


def load_summary(path: Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _level_axis(levels: Sequence[str]) -> Dict[str, float]:
    """x position per level label; sleep sits one grid step left of the lowest finite level."""
    finite = sorted(parse_level(lv) for lv in levels if lv != SLEEP_LABEL)
    step = (finite[1] - finite[0]) if len(finite) > 1 else 3.0
    sleep_x = (finite[0] - step) if finite else 0.0
    return {lv: (sleep_x if lv == SLEEP_LABEL else parse_level(lv)) for lv in levels}


def plot_summary(summary: dict, out_dir: Path, scenarios: Optional[Sequence[str]] = None) -> List[Path]:
    """
    Write one SVG per panel into `out_dir` and return their paths.

    `scenarios` lists the series expected on every panel (default: the
    built-in scenarios); a missing one is flagged by an annotation on the
    panel. An empty summary writes nothing and returns an empty list.
    """
    groups = [g for g in summary.get("groups", []) if SET_NAME in g.get("sets", {})]
    if not groups:
        logging.error("Summary holds no groups; nothing to plot")
        return []

    present = sorted({g["scenario"] for g in groups})
    wanted = list(scenarios) if scenarios is not None else list(BUILTIN_SCENARIOS)
    missing = [s for s in wanted if s not in present]
    order = [s for s in wanted if s in present] + [s for s in present if s not in wanted]
    for s in missing:
        logging.warning(f"Scenario {s!r} missing from summary")

    levels = sorted({g["power_level"] for g in groups}, key=parse_level)
    xpos = _level_axis(levels)

    setup_style()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    for panel in PANELS:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for scenario in order:
            series = sorted((g for g in groups if g["scenario"] == scenario),
                            key=lambda g: parse_level(g["power_level"]))
            x = [xpos[g["power_level"]] for g in series]
            y = [g["sets"][SET_NAME][panel.metric] for g in series]
            if panel.error_bars:
                err = [g["sets"][SET_NAME].get(f"{panel.metric}_std") or 0.0 for g in series]
                ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=scenario)
            else:
                ax.plot(x, y, marker="o", label=scenario)
        ax.set_xticks([xpos[lv] for lv in levels])
        ax.set_xticklabels(["sleep" if lv == SLEEP_LABEL else lv for lv in levels], rotation=45)
        ax.set_xlabel("K$^v$ transmit power (dBm)")
        ax.set_ylabel(panel.ylabel)
        ax.legend(loc="best")
        if missing:
            ax.annotate(f"warning: missing {', '.join(missing)}", xy=(0.01, 0.01), xycoords="axes fraction",
                        fontsize=8, color="red")
        path = out_dir / f"{panel.name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
        logging.info(f"Wrote {path}")
    return written
