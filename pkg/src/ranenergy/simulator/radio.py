"""radio.py
Pathloss, received power, SINR and the table-driven link chain
SINR -> CQI -> MCS -> spectral efficiency -> throughput.

Everything broadcasts over numpy arrays; scalars in give scalars out.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.constants import speed_of_light

ArrayLike = Union[float, np.ndarray]

# MCS value reported for CQI 0 (out of range, no transmission)
NO_TRANSMISSION = -1

CQI_TABLE_FILE = "cqi_thresholds.csv"
MCS_TABLE_FILE = "mcs_se.csv"
# top index of the default 256QAM MCS table
DEFAULT_MAX_MCS = 27


# ------------------------------------------------------------------------ #
# Unit helpers
# ------------------------------------------------------------------------ #
def dbm_to_w(dbm: ArrayLike) -> ArrayLike:
    return np.power(10.0, (np.asarray(dbm, dtype=float) - 30.0) / 10.0)[()]


def w_to_dbm(w: ArrayLike) -> ArrayLike:
    with np.errstate(divide="ignore"):
        return (10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0)[()]


def db_to_ratio(db: ArrayLike) -> ArrayLike:
    return np.power(10.0, np.asarray(db, dtype=float) / 10.0)[()]


def ratio_to_db(ratio: ArrayLike) -> ArrayLike:
    with np.errstate(divide="ignore"):
        return (10.0 * np.log10(np.asarray(ratio, dtype=float)))[()]


# ------------------------------------------------------------------------ #
# Pathloss
# ------------------------------------------------------------------------ #
class PathlossVariant(Enum):
    UMA_NLOS = "uma_nlos"
    UMA_LOS = "uma_los"
    UMI_NLOS = "umi_nlos"
    UMI_LOS = "umi_los"


@dataclass(frozen=True)
class PathlossModel:
    """TR 36.873 3D pathloss; `building_height_m` and `street_width_m` only affect UMa NLoS."""
    variant: PathlossVariant = PathlossVariant.UMA_NLOS
    building_height_m: float = 20.0
    street_width_m: float = 20.0

    MIN_DISTANCE_M = 10.0
    MAX_DISTANCE_M = 5000.0
    MIN_FREQ_HZ = 0.5e9
    MAX_FREQ_HZ = 6.0e9


def _los_db(d2d: np.ndarray, d3d: np.ndarray, h_bs: np.ndarray, h_ut: np.ndarray, fc_ghz: float) -> np.ndarray:
    # breakpoint uses effective antenna heights over a 1 m environment height
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc_ghz * 1e9 / speed_of_light
    near = 22.0 * np.log10(d3d) + 28.0 + 20.0 * np.log10(fc_ghz)
    with np.errstate(divide="ignore"):
        far = (40.0 * np.log10(d3d) + 28.0 + 20.0 * np.log10(fc_ghz)
               - 9.0 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2))
    return np.where(d2d <= d_bp, near, far)


def _uma_nlos_db(d3d: np.ndarray, h_bs: np.ndarray, h_ut: np.ndarray, fc_ghz: float,
                 h: float, w: float) -> np.ndarray:
    return (161.04 - 7.1 * np.log10(w) + 7.5 * np.log10(h)
            - (24.37 - 3.7 * (h / h_bs) ** 2) * np.log10(h_bs)
            + (43.42 - 3.1 * np.log10(h_bs)) * (np.log10(d3d) - 3.0)
            + 20.0 * np.log10(fc_ghz)
            - (3.2 * np.log10(17.625) ** 2 - 4.97)
            - 0.6 * (h_ut - 1.5))


def _umi_nlos_db(d3d: np.ndarray, h_ut: np.ndarray, fc_ghz: float) -> np.ndarray:
    return 36.7 * np.log10(d3d) + 22.7 + 26.0 * np.log10(fc_ghz) - 0.3 * (h_ut - 1.5)


def pathloss_db(model: PathlossModel, tx: np.ndarray, rx: np.ndarray, freq: float) -> ArrayLike:
    """
    Pathloss in dB between transmitter and receiver positions.

    `tx` and `rx` are (..., 3) arrays in metres that broadcast against each
    other. NLoS variants return max(PL_LoS, PL'_NLoS). Distances below 10 m,
    2-D distances above 5 km and frequencies outside 0.5 to 6 GHz are rejected.
    """
    if not model.MIN_FREQ_HZ <= freq <= model.MAX_FREQ_HZ:
        raise ValueError(f"Carrier frequency {freq} Hz outside 0.5 to 6 GHz")
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    delta = tx - rx
    d2d = np.hypot(delta[..., 0], delta[..., 1])
    d3d = np.sqrt(d2d ** 2 + delta[..., 2] ** 2)
    if np.any(d3d < model.MIN_DISTANCE_M):
        raise ValueError(f"3-D distance {float(np.min(d3d)):.3f} m below {model.MIN_DISTANCE_M} m")
    if np.any(d2d > model.MAX_DISTANCE_M):
        raise ValueError(f"2-D distance {float(np.max(d2d)):.1f} m above {model.MAX_DISTANCE_M} m")

    h_bs = np.broadcast_to(tx[..., 2], d3d.shape)
    h_ut = np.broadcast_to(rx[..., 2], d3d.shape)
    fc_ghz = freq / 1e9
    los = _los_db(d2d, d3d, h_bs, h_ut, fc_ghz)
    if model.variant in (PathlossVariant.UMA_LOS, PathlossVariant.UMI_LOS):
        return los[()]
    if model.variant is PathlossVariant.UMA_NLOS:
        nlos = _uma_nlos_db(d3d, h_bs, h_ut, fc_ghz, model.building_height_m, model.street_width_m)
    else:
        nlos = _umi_nlos_db(d3d, h_ut, fc_ghz)
    return np.maximum(los, nlos)[()]


# ------------------------------------------------------------------------ #
# Link budget, RSRP and SINR
# ------------------------------------------------------------------------ #
@dataclass(frozen=True)
class LinkBudget:
    g_mimo_db: float = 0.0
    g_ant_db: float = 0.0
    noise_figure_db: float = 9.0
    thermal_noise_density_dbm_hz: float = -174.0

    def noise_dbm(self, bandwidth_hz: float) -> float:
        return self.thermal_noise_density_dbm_hz + 10.0 * float(np.log10(bandwidth_hz)) + self.noise_figure_db

    def noise_w(self, bandwidth_hz: float) -> float:
        return float(dbm_to_w(self.noise_dbm(bandwidth_hz)))


def rsrp_dbm(p_tx_dbm: ArrayLike, budget: LinkBudget, pl_db: ArrayLike) -> ArrayLike:
    """RSRP = G_MIMO + G_ant + P_Tx - PL, all in dB units."""
    return (budget.g_mimo_db + budget.g_ant_db + np.asarray(p_tx_dbm, dtype=float)
            - np.asarray(pl_db, dtype=float))[()]


def sinr_linear(rx_w: ArrayLike, interference_w: ArrayLike, noise_w: ArrayLike) -> ArrayLike:
    """Serving received power over interference plus noise, linear units."""
    noise = np.asarray(noise_w, dtype=float)
    if np.any(noise <= 0):
        raise ValueError(f"Noise power must be > 0 W, got {noise_w}")
    rx = np.asarray(rx_w, dtype=float)
    interference = np.asarray(interference_w, dtype=float)
    if np.any(rx < 0) or np.any(interference < 0):
        raise ValueError("Received and interference powers must be >= 0 W")
    return (rx / (interference + noise))[()]


# ------------------------------------------------------------------------ #
# Link tables
# ------------------------------------------------------------------------ #
class McsTable(Enum):
    """The two TS 38.214 PDSCH MCS index tables, shipped verbatim."""
    QAM256 = "qam256"   # Table 5.1.3.1-2, MCS 0..27
    QAM64 = "qam64"     # Table 5.1.3.1-1, MCS 0..28

    @property
    def file_name(self) -> str:
        return MCS_TABLE_FILES[self]


MCS_TABLE_FILES = {McsTable.QAM256: MCS_TABLE_FILE, McsTable.QAM64: "mcs_se_qam64.csv"}


@dataclass(frozen=True)
class LinkTables:
    """
    SINR thresholds for CQI 1..15 and spectral efficiency per MCS index.

    With `modulation_order` given, SE only has to rise within each modulation
    order (the 64QAM table steps down by 0.004 bit/s/Hz where 16QAM hands over
    to 64QAM) and the highest MCS must carry the highest SE. Without it, SE
    must be strictly ascending over the whole table.
    """
    cqi_thresholds_db: np.ndarray = field(repr=False)
    mcs_se_table: np.ndarray = field(repr=False)
    modulation_order: Optional[np.ndarray] = field(default=None, repr=False)

    N_CQI = 15
    MIN_MCS_ENTRIES = 2
    MAX_SE = 9.6
    MODULATION_ORDERS = (2, 4, 6, 8)

    def __post_init__(self) -> None:
        thr = np.array(self.cqi_thresholds_db, dtype=float)
        se = np.array(self.mcs_se_table, dtype=float)
        if thr.shape != (self.N_CQI,):
            raise ValueError(f"Expected {self.N_CQI} CQI thresholds, got {thr.shape}")
        if se.ndim != 1 or se.size < self.MIN_MCS_ENTRIES:
            raise ValueError(f"Expected at least {self.MIN_MCS_ENTRIES} MCS entries, got {se.shape}")
        if np.any(np.diff(thr) <= 0):
            raise ValueError("CQI thresholds must be strictly ascending")
        if not (np.all(np.isfinite(se)) and se.min() > 0 and se.max() <= self.MAX_SE):
            raise ValueError(f"Spectral efficiencies must lie in (0, {self.MAX_SE}] bit/s/Hz")

        if self.modulation_order is None:
            qm = None
            if np.any(np.diff(se) <= 0):
                raise ValueError("Spectral efficiencies must be strictly ascending in MCS")
        else:
            qm = np.array(self.modulation_order, dtype=np.int64)
            if qm.shape != se.shape:
                raise ValueError(f"Expected {se.size} modulation orders, got {qm.shape}")
            if not set(qm.tolist()) <= set(self.MODULATION_ORDERS) or np.any(np.diff(qm) < 0):
                raise ValueError(f"Modulation orders must be non-decreasing values from {self.MODULATION_ORDERS}")
            same_qm = np.diff(qm) == 0
            if np.any(np.diff(se)[same_qm] <= 0):
                raise ValueError("Spectral efficiencies must be strictly ascending within a modulation order")
            if se[-1] != se.max():
                raise ValueError("The highest MCS must carry the highest spectral efficiency")
            qm.setflags(write=False)

        thr.setflags(write=False)
        se.setflags(write=False)
        object.__setattr__(self, "cqi_thresholds_db", thr)
        object.__setattr__(self, "mcs_se_table", se)
        object.__setattr__(self, "modulation_order", qm)

    @property
    def max_mcs(self) -> int:
        return int(self.mcs_se_table.size - 1)


def shipped_table_path(name: str) -> Path:
    return Path(str(resources.files("ranenergy") / "data" / name))


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def recorded_checksums() -> dict:
    """SHA-256 of each shipped data file, as listed in data/SHA256SUMS."""
    sums = {}
    for line in shipped_table_path("SHA256SUMS").read_text().splitlines():
        if line.strip():
            digest, name = line.split()
            sums[name.lstrip("*")] = digest
    return sums


def load_link_tables(cqi_path: Optional[Path] = None, mcs_path: Optional[Path] = None) -> LinkTables:
    """
    Load the two CSV tables; defaults are the files shipped in ranenergy/data.

    The MCS table needs `mcs` and `se_bits_per_hz` columns. When it also has
    `modulation_order` and `code_rate_x1024`, every row must satisfy
    SE = Qm * R / 1024 to the four decimals the tables are published with.
    """
    cqi_path = Path(cqi_path) if cqi_path else shipped_table_path(CQI_TABLE_FILE)
    mcs_path = Path(mcs_path) if mcs_path else shipped_table_path(MCS_TABLE_FILE)
    cqi = pd.read_csv(cqi_path, float_precision="round_trip").sort_values("cqi")
    mcs = pd.read_csv(mcs_path, float_precision="round_trip").sort_values("mcs")
    if list(cqi["cqi"]) != list(range(1, LinkTables.N_CQI + 1)):
        raise ValueError(f"{cqi_path}: expected cqi rows 1..{LinkTables.N_CQI}")
    if list(mcs["mcs"]) != list(range(len(mcs))):
        raise ValueError(f"{mcs_path}: expected mcs rows 0..{len(mcs) - 1}")

    se = mcs["se_bits_per_hz"].to_numpy(dtype=float)
    qm = None
    if "modulation_order" in mcs:
        qm = mcs["modulation_order"].to_numpy(dtype=np.int64)
        if "code_rate_x1024" in mcs:
            derived = qm * mcs["code_rate_x1024"].to_numpy(dtype=float) / 1024.0
            bad = mcs["mcs"].to_numpy()[~np.isclose(se, derived, rtol=0.0, atol=1e-4)]
            if bad.size:
                raise ValueError(f"{mcs_path}: SE differs from Qm * R / 1024 at mcs {bad.tolist()}")
    logging.debug(f"Loaded link tables from {cqi_path} and {mcs_path}")
    return LinkTables(cqi["min_sinr_db"].to_numpy(dtype=float), se, qm)


# ------------------------------------------------------------------------ #
# SINR -> CQI -> MCS -> SE -> throughput
# ------------------------------------------------------------------------ #
class CqiMcsMap(Enum):
    AFFINE = "affine"          # CQI 1..15 spread evenly onto MCS 0..max
    FLOOR = "floor"            # floor(max * cqi / 15)
    CQI_TABLE = "cqi_table"    # MCS 2 * cqi - 3, the 256QAM CQI table rows inside the 256QAM MCS table


def sinr_to_cqi(sinr_db: ArrayLike, tables: LinkTables) -> ArrayLike:
    """Largest CQI whose threshold is <= sinr_db; 0 below the first threshold."""
    sinr = np.asarray(sinr_db, dtype=float)
    return np.searchsorted(tables.cqi_thresholds_db, sinr, side="right").astype(np.int64)[()]


def cqi_to_mcs(cqi: ArrayLike, mapping: CqiMcsMap = CqiMcsMap.AFFINE, max_mcs: int = DEFAULT_MAX_MCS) -> ArrayLike:
    """
    MCS index chosen for each CQI; CQI 0 gives NO_TRANSMISSION.

    AFFINE is round((cqi - 1) * max_mcs / 14) with ties to even, so CQI 1 is
    MCS 0 and CQI 15 the top MCS. CQI_TABLE is clipped into 0..max_mcs.
    """
    c = np.asarray(cqi)
    if np.any(c < 0) or np.any(c > LinkTables.N_CQI):
        raise ValueError(f"CQI must lie in 0..{LinkTables.N_CQI}, got {cqi}")
    if max_mcs < 1:
        raise ValueError(f"max_mcs must be >= 1, got {max_mcs}")
    c = c.astype(np.int64)
    if mapping is CqiMcsMap.AFFINE:
        mcs = np.rint((c - 1) * max_mcs / (LinkTables.N_CQI - 1.0)).astype(np.int64)
    elif mapping is CqiMcsMap.FLOOR:
        mcs = np.floor(max_mcs * c / float(LinkTables.N_CQI)).astype(np.int64)
    else:
        mcs = np.clip(2 * c - 3, 0, max_mcs)
    return np.where(c == 0, NO_TRANSMISSION, mcs)[()]


def mcs_to_se(mcs: ArrayLike, tables: LinkTables) -> ArrayLike:
    m = np.asarray(mcs)
    if np.any(m < NO_TRANSMISSION) or np.any(m > tables.max_mcs):
        raise ValueError(f"MCS must lie in 0..{tables.max_mcs}, got {mcs}")
    m = m.astype(np.int64)
    se = tables.mcs_se_table[np.clip(m, 0, None)]
    return np.where(m == NO_TRANSMISSION, 0.0, se)[()]


def ue_throughput(se: ArrayLike, bandwidth: ArrayLike) -> ArrayLike:
    """Throughput in bit/s: T = SE x B."""
    return (np.asarray(se, dtype=float) * np.asarray(bandwidth, dtype=float))[()]


@dataclass(frozen=True)
class RadioContext:
    """Everything needed to turn geometry and transmit powers into link metrics."""
    model: PathlossModel
    budget: LinkBudget
    tables: LinkTables
    carrier_freq_hz: float
    bandwidth_hz: float
    cqi_mcs_map: CqiMcsMap = CqiMcsMap.AFFINE

    @property
    def noise_w(self) -> float:
        return self.budget.noise_w(self.bandwidth_hz)

    def gain_matrix(self, cells_xyz: np.ndarray, ues_xyz: np.ndarray) -> np.ndarray:
        """Linear channel gain including G_MIMO and G_ant, shape (cells, UEs)."""
        pl = pathloss_db(self.model, cells_xyz[:, np.newaxis, :], ues_xyz[np.newaxis, :, :],
                         self.carrier_freq_hz)
        return np.asarray(db_to_ratio(self.budget.g_mimo_db + self.budget.g_ant_db - np.asarray(pl)))

    def link_chain(self, sinr: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Linear SINR -> (sinr_db, cqi, mcs, se)."""
        sinr_db = np.asarray(ratio_to_db(sinr))
        cqi = np.asarray(sinr_to_cqi(sinr_db, self.tables))
        mcs = np.asarray(cqi_to_mcs(cqi, self.cqi_mcs_map, self.tables.max_mcs))
        se = np.asarray(mcs_to_se(mcs, self.tables))
        return sinr_db, cqi, mcs, se
