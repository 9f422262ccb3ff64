import json

import pytest

from ranenergy.config import (ChecksumMismatch, ConfigFileNotFound, ConfigSchemaError, RunConfig, config_from_dict,
                              load_config)
from ranenergy.simulator.radio import CQI_TABLE_FILE, MCS_TABLE_FILE, McsTable, PathlossVariant, shipped_table_path


def _write(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return path


def test_defaults(config):
    assert config.network.n_bs == 19
    assert config.energy.p0_w == 130.0
    assert config.link.noise_figure_db == 9.0
    assert config.link.pathloss_model().variant is PathlossVariant.UMA_NLOS
    assert config.run.until_s == 100.0
    assert config.run.interval_s == 1.0


def test_no_path_gives_defaults():
    assert load_config() == RunConfig()


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(_write(tmp_path, "  \n")) == RunConfig()


def test_partial_override(tmp_path):
    cfg = load_config(_write(tmp_path, {"network": {"isd_m": 750.0}, "run": {"until_s": 10}}))
    assert cfg.network.isd_m == 750.0
    assert cfg.network.n_bs == 19
    assert cfg.run.until_s == 10


def test_missing_file(tmp_path):
    with pytest.raises(ConfigFileNotFound):
        load_config(tmp_path / "nope.json")


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigSchemaError, match="network.isd"):
        load_config(_write(tmp_path, {"network": {"isd": 500}}))
    with pytest.raises(ConfigSchemaError, match="radio"):
        load_config(_write(tmp_path, {"radio": {}}))


def test_wrong_types():
    with pytest.raises(ConfigSchemaError, match="n_bs"):
        config_from_dict({"network": {"n_bs": 19.0}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"link": {"share_bandwidth": 1}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"run": []})
    with pytest.raises(ConfigSchemaError):
        config_from_dict([])


def test_invalid_values():
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"network": {"bandwidth_hz": 0}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"energy": {"eta_pa": 1.5}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"run": {"interval_s": 5, "until_s": 1}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"link": {"pathloss": "rma"}})
    with pytest.raises(ConfigSchemaError):
        config_from_dict({"run": {"empty_cell_mean": "skip"}})
    with pytest.raises(ConfigSchemaError, match="qam1024"):
        config_from_dict({"link": {"mcs_table": "qam1024"}})


def test_non_finite_numbers_rejected(tmp_path):
    for text in ('{"energy": {"p0_w": NaN}}', '{"energy": {"p_bb_w": Infinity}}',
                 '{"energy": {"p_rf_w": -Infinity}}'):
        with pytest.raises(ConfigSchemaError, match="non-finite"):
            load_config(_write(tmp_path, text))
    with pytest.raises(ConfigSchemaError, match="p0_w"):
        config_from_dict({"energy": {"p0_w": float("nan")}})


def test_invalid_json(tmp_path):
    with pytest.raises(ConfigSchemaError, match="invalid JSON"):
        load_config(_write(tmp_path, "{network:"))


def test_replace_keeps_other_keys(config):
    cfg = config.replace(run={"until_s": 7.0})
    assert cfg.run.until_s == 7.0
    assert cfg.run.interval_s == config.run.interval_s
    assert cfg.network == config.network
    with pytest.raises(ConfigSchemaError):
        config.replace(radio={})


def test_as_dict_round_trips(config):
    assert config_from_dict(config.as_dict()) == config


def test_shipped_tables_verify(config):
    config.link.verify_tables()
    assert config.link.load_tables().mcs_se_table[-1] == 7.4063


def test_custom_table_checksum(tmp_path):
    table = tmp_path / "mcs.csv"
    table.write_bytes(shipped_table_path(MCS_TABLE_FILE).read_bytes().replace(b"8,948,7.4063", b"8,960,7.5000"))
    cfg = config_from_dict({"link": {"mcs_se_path": str(table), "mcs_se_sha256": "0" * 64}})
    with pytest.raises(ChecksumMismatch):
        cfg.link.verify_tables()
    cfg = config_from_dict({"link": {"mcs_se_path": str(table)}})
    cfg.link.verify_tables()
    assert cfg.link.load_tables().mcs_se_table[-1] == 7.5


def test_missing_table_file(tmp_path):
    cfg = config_from_dict({"link": {"cqi_thresholds_path": str(tmp_path / "absent.csv")}})
    with pytest.raises(ConfigFileNotFound):
        cfg.link.verify_tables()


def test_table_paths_default_to_shipped(config):
    paths = config.link.table_paths()
    assert paths[CQI_TABLE_FILE] == shipped_table_path(CQI_TABLE_FILE)
    assert paths[MCS_TABLE_FILE] == shipped_table_path(MCS_TABLE_FILE)


def test_qam64_table_selectable():
    cfg = config_from_dict({"link": {"mcs_table": "qam64", "cqi_mcs_map": "floor"}})
    assert cfg.link.table_paths()[MCS_TABLE_FILE] == shipped_table_path(McsTable.QAM64.file_name)
    cfg.link.verify_tables()
    tables = cfg.link.load_tables()
    assert tables.max_mcs == 28
    assert tables.mcs_se_table[-1] == 5.5547


def test_mcs_se_path_overrides_mcs_table(tmp_path):
    table = tmp_path / "mcs.csv"
    table.write_bytes(shipped_table_path(MCS_TABLE_FILE).read_bytes())
    cfg = config_from_dict({"link": {"mcs_table": "qam64", "mcs_se_path": str(table)}})
    assert cfg.link.table_paths()[MCS_TABLE_FILE] == table
    assert cfg.link.load_tables().max_mcs == 27
