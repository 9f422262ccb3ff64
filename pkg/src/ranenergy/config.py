"""config.py
Run configuration: one JSON document with optional sections

    {"network": {...}, "energy": {...}, "link": {...}, "run": {...}}

Every key is optional and falls back to the reference deployment values.
Unknown sections or keys are rejected by name. An empty file means all
defaults.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field, fields
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .simulator.energy import PowerModelParams
from .simulator.metrics import EmptyCellMean
from .simulator.radio import (CQI_TABLE_FILE, MCS_TABLE_FILE, CqiMcsMap, LinkBudget, LinkTables, McsTable,
                              PathlossModel, PathlossVariant, file_sha256, load_link_tables, recorded_checksums,
                              shipped_table_path)
from .simulator.topology import NetworkConfig


class ConfigError(ValueError):
    """Base class of every configuration problem."""


class ConfigFileNotFound(ConfigError):
    pass


class ConfigSchemaError(ConfigError):
    """Unknown section or key, wrong type, or a value failing validation."""


class ChecksumMismatch(ConfigError):
    """A link-table file does not match its recorded SHA-256."""


@dataclass(frozen=True)
class LinkConfig:
    g_mimo_db: float = 0.0
    g_ant_db: float = 0.0
    noise_figure_db: float = 9.0
    thermal_noise_density_dbm_hz: float = -174.0
    pathloss: str = PathlossVariant.UMA_NLOS.value
    building_height_m: float = 20.0
    street_width_m: float = 20.0
    cqi_mcs_map: str = CqiMcsMap.AFFINE.value
    mcs_table: str = McsTable.QAM256.value
    share_bandwidth: bool = False
    cqi_thresholds_path: Optional[str] = None
    mcs_se_path: Optional[str] = None
    cqi_thresholds_sha256: Optional[str] = None
    mcs_se_sha256: Optional[str] = None

    def __post_init__(self) -> None:
        try:
            PathlossVariant(self.pathloss)
            CqiMcsMap(self.cqi_mcs_map)
            McsTable(self.mcs_table)
        except ValueError as e:
            raise ConfigSchemaError(f"link: {e}")
        if not (self.building_height_m > 0 and self.street_width_m > 0):
            raise ConfigSchemaError("link: building_height_m and street_width_m must be > 0")

    def budget(self) -> LinkBudget:
        return LinkBudget(self.g_mimo_db, self.g_ant_db, self.noise_figure_db, self.thermal_noise_density_dbm_hz)

    def pathloss_model(self) -> PathlossModel:
        return PathlossModel(PathlossVariant(self.pathloss), self.building_height_m, self.street_width_m)

    def mapping(self) -> CqiMcsMap:
        return CqiMcsMap(self.cqi_mcs_map)

    def table_paths(self) -> Dict[str, Path]:
        return {
            CQI_TABLE_FILE: Path(self.cqi_thresholds_path) if self.cqi_thresholds_path
            else shipped_table_path(CQI_TABLE_FILE),
            MCS_TABLE_FILE: Path(self.mcs_se_path) if self.mcs_se_path
            else shipped_table_path(McsTable(self.mcs_table).file_name),
        }

    def verify_tables(self) -> None:
        """Raise ConfigFileNotFound / ChecksumMismatch for the referenced table files."""
        recorded = recorded_checksums()
        wanted = {CQI_TABLE_FILE: (self.cqi_thresholds_path, self.cqi_thresholds_sha256),
                  MCS_TABLE_FILE: (self.mcs_se_path, self.mcs_se_sha256)}
        for name, path in self.table_paths().items():
            custom, expected = wanted[name]
            if not path.is_file():
                raise ConfigFileNotFound(f"Link table {path} does not exist")
            if expected is None and custom is None:
                expected = recorded.get(path.name)
            if expected is None:
                continue
            actual = file_sha256(path)
            if actual != expected.lower():
                raise ChecksumMismatch(f"{path}: SHA-256 {actual} does not match recorded {expected}")

    def load_tables(self) -> LinkTables:
        paths = self.table_paths()
        return _cached_tables(str(paths[CQI_TABLE_FILE]), str(paths[MCS_TABLE_FILE]))


@lru_cache(maxsize=8)
def _cached_tables(cqi_path: str, mcs_path: str) -> LinkTables:
    return load_link_tables(Path(cqi_path), Path(mcs_path))


@dataclass(frozen=True)
class RunSettings:
    until_s: float = 100.0
    interval_s: float = 1.0
    hysteresis_db: float = 0.0
    out_dir: str = "out"
    keep_ue_log: bool = True
    empty_cell_mean: str = EmptyCellMean.ZERO.value

    def __post_init__(self) -> None:
        if not 0 < self.interval_s <= self.until_s:
            raise ConfigSchemaError(f"run: need 0 < interval_s <= until_s, got {self.interval_s}, {self.until_s}")
        if self.hysteresis_db < 0:
            raise ConfigSchemaError(f"run: hysteresis_db must be >= 0, got {self.hysteresis_db}")
        try:
            EmptyCellMean(self.empty_cell_mean)
        except ValueError as e:
            raise ConfigSchemaError(f"run: {e}")


SECTIONS = {
    "network": NetworkConfig,
    "energy": PowerModelParams,
    "link": LinkConfig,
    "run": RunSettings,
}


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    energy: PowerModelParams = field(default_factory=PowerModelParams)
    link: LinkConfig = field(default_factory=LinkConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def replace(self, **sections: Dict[str, Any]) -> "RunConfig":
        """Copy with some keys overridden, e.g. ``cfg.replace(run={"until_s": 10})``."""
        updated = {}
        for name, overrides in sections.items():
            if name not in SECTIONS:
                raise ConfigSchemaError(f"Unknown config section {name!r}")
            current = getattr(self, name)
            updated[name] = _build_section(name, {**dataclasses.asdict(current), **overrides})
        return dataclasses.replace(self, **updated)

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}


def _type_ok(value: Any, annotation: str) -> bool:
    if value is None:
        return "Optional" in annotation
    if "bool" in annotation:
        return isinstance(value, bool)
    if "int" in annotation:
        return isinstance(value, int) and not isinstance(value, bool)
    if "float" in annotation:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if "str" in annotation:
        return isinstance(value, str)
    return True


def _build_section(name: str, values: Dict[str, Any]):
    cls = SECTIONS[name]
    known = {f.name: str(f.type) for f in fields(cls)}
    for key, value in values.items():
        if key not in known:
            raise ConfigSchemaError(f"Unknown key {name}.{key} (known: {', '.join(sorted(known))})")
        if not _type_ok(value, known[key]):
            raise ConfigSchemaError(f"{name}.{key}: expected {known[key]}, got {value!r}")
    try:
        return cls(**values)
    except ConfigSchemaError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigSchemaError(f"{name}: {e}")


def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigSchemaError("Config root must be a JSON object")
    for section in data:
        if section not in SECTIONS:
            raise ConfigSchemaError(f"Unknown config section {section!r} (known: {', '.join(SECTIONS)})")
    built = {}
    for name in SECTIONS:
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise ConfigSchemaError(f"Section {name!r} must be a JSON object")
        built[name] = _build_section(name, section)
    return RunConfig(**built)


def _reject_constant(name: str) -> Any:
    raise ConfigSchemaError(f"non-finite number {name} is not allowed")


def load_config(path: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Read and validate a configuration file.

    Args:
        path: JSON file; None gives the defaults.

    Raises:
        ConfigFileNotFound: `path` (or a referenced table file) does not exist.
        ConfigSchemaError: malformed JSON, unknown keys, wrong types, invalid values.
        ChecksumMismatch: a link table differs from its recorded checksum.
    """
    if path is None:
        config = RunConfig()
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigFileNotFound(f"Config file {path} does not exist")
        text = path.read_text()
        if not text.strip():
            config = RunConfig()
        else:
            try:
                data = json.loads(text, parse_constant=_reject_constant)
            except json.JSONDecodeError as e:
                raise ConfigSchemaError(f"{path}: invalid JSON: {e}")
            config = config_from_dict(data)
        logging.info(f"Loaded config from {path}")
    config.link.verify_tables()
    return config
