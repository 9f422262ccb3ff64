import math

import numpy as np
import pandas as pd
import pytest

from ranenergy.simulator.radio import (CQI_TABLE_FILE, DEFAULT_MAX_MCS, MCS_TABLE_FILE, NO_TRANSMISSION, CqiMcsMap,
                                       LinkBudget, LinkTables, McsTable, PathlossModel, PathlossVariant, RadioContext,
                                       cqi_to_mcs, db_to_ratio, dbm_to_w, file_sha256, load_link_tables, mcs_to_se,
                                       pathloss_db, ratio_to_db, recorded_checksums, rsrp_dbm, shipped_table_path,
                                       sinr_linear, sinr_to_cqi, ue_throughput, w_to_dbm)

TX = np.array([0.0, 0.0, 25.0])
RX_500 = np.array([500.0, 0.0, 1.5])
FC = 3.5e9


@pytest.fixture(scope="module")
def tables():
    return load_link_tables()


# ---- pathloss ---- #
def test_uma_nlos_regression_constant():
    assert pathloss_db(PathlossModel(), TX, RX_500, FC) == pytest.approx(129.937769473141, rel=1e-9)


def test_uma_los_below_breakpoint():
    # breakpoint 4 * 24 * 0.5 * 3.5e9 / c = 560.4 m, so 500 m is in the near branch
    model = PathlossModel(PathlossVariant.UMA_LOS)
    assert pathloss_db(model, TX, RX_500, FC) == pytest.approx(98.2692, abs=1e-3)


def test_nlos_never_below_los():
    d = np.linspace(50.0, 4000.0, 40)
    rx = np.column_stack([d, np.zeros_like(d), np.full_like(d, 1.5)])
    for nlos, los in ((PathlossVariant.UMA_NLOS, PathlossVariant.UMA_LOS),
                      (PathlossVariant.UMI_NLOS, PathlossVariant.UMI_LOS)):
        assert np.all(pathloss_db(PathlossModel(nlos), TX, rx, FC) >= pathloss_db(PathlossModel(los), TX, rx, FC))


def test_pathloss_monotone_in_distance():
    model = PathlossModel()
    d = np.linspace(20.0, 4900.0, 500)
    rx = np.column_stack([d, np.zeros_like(d), np.full_like(d, 1.5)])
    pl = pathloss_db(model, TX, rx, FC)
    assert np.all(np.diff(pl) >= 0)
    for dist in (100.0, 700.0, 2000.0):
        near = pathloss_db(model, TX, np.array([dist, 0.0, 1.5]), FC)
        far = pathloss_db(model, TX, np.array([2 * dist, 0.0, 1.5]), FC)
        assert far > near


def test_pathloss_monotone_in_frequency():
    model = PathlossModel()
    assert pathloss_db(model, TX, RX_500, 2.0e9) < pathloss_db(model, TX, RX_500, 3.5e9)


def test_pathloss_at_least_free_space():
    model = PathlossModel()
    for dist in (15.0, 100.0, 1000.0, 4500.0):
        rx = np.array([dist, 0.0, 1.5])
        d3d = math.hypot(dist, 23.5)
        fspl = 20 * math.log10(d3d) + 20 * math.log10(FC) - 147.55
        assert pathloss_db(model, TX, rx, FC) >= fspl


def test_pathloss_domain_errors():
    model = PathlossModel()
    with pytest.raises(ValueError, match="3-D distance"):
        pathloss_db(model, np.array([0.0, 0.0, 5.0]), np.array([1.0, 0.0, 1.5]), FC)
    with pytest.raises(ValueError, match="2-D distance"):
        pathloss_db(model, TX, np.array([6000.0, 0.0, 1.5]), FC)
    with pytest.raises(ValueError, match="frequency"):
        pathloss_db(model, TX, RX_500, 7e9)


def test_pathloss_broadcasts():
    cells = np.array([[0.0, 0.0, 25.0], [500.0, 0.0, 25.0], [0.0, 500.0, 25.0]])
    ues = np.array([[100.0, 100.0, 1.5], [300.0, -50.0, 1.5], [-200.0, 40.0, 1.5], [250.0, 250.0, 1.5]])
    pl = pathloss_db(PathlossModel(), cells[:, None, :], ues[None, :, :], FC)
    assert pl.shape == (3, 4)
    assert pl[1, 2] == pytest.approx(pathloss_db(PathlossModel(), cells[1], ues[2], FC))


# ---- RSRP / SINR ---- #
def test_rsrp_examples():
    assert rsrp_dbm(43.0, LinkBudget(), 0.0) == 43.0
    assert rsrp_dbm(43.0, LinkBudget(g_mimo_db=3.0, g_ant_db=2.0), 120.0) == pytest.approx(-72.0)
    assert rsrp_dbm(46.0, LinkBudget(), 120.0) - rsrp_dbm(43.0, LinkBudget(), 120.0) == pytest.approx(3.0)


def test_noise_power():
    assert LinkBudget().noise_dbm(10e6) == pytest.approx(-95.0)
    assert LinkBudget().noise_w(10e6) == pytest.approx(10 ** (-12.5))


def test_sinr_examples():
    assert sinr_linear(1e-10, 0.0, 1e-10) == 1.0
    assert sinr_linear(1e-9, 1e-10, 1e-10) == pytest.approx(5.0)
    assert sinr_linear(0.0, 1e-10, 1e-10) == 0.0
    for k in (0.5, 2.0, 17.0):
        assert sinr_linear(k * 3e-12, 0.0, 3e-12) == pytest.approx(k, rel=1e-15)


def test_sinr_rejects_bad_noise():
    with pytest.raises(ValueError):
        sinr_linear(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        sinr_linear(-1.0, 0.0, 1.0)


def test_unit_round_trip():
    dbm = np.linspace(-120.0, 50.0, 101)
    assert np.max(np.abs(w_to_dbm(dbm_to_w(dbm)) - dbm)) < 1e-10
    assert w_to_dbm(0.0) == -math.inf
    assert dbm_to_w(-math.inf) == 0.0
    assert ratio_to_db(db_to_ratio(3.0)) == pytest.approx(3.0)


# ---- link tables ---- #
# TS 38.214 Table 5.1.3.1-2 as (Qm, R x 1024, SE)
QAM256_TABLE = [
    (2, 120, 0.2344), (2, 193, 0.3770), (2, 308, 0.6016), (2, 449, 0.8770), (2, 602, 1.1758),
    (4, 378, 1.4766), (4, 434, 1.6953), (4, 490, 1.9141), (4, 553, 2.1602), (4, 616, 2.4063),
    (4, 658, 2.5703), (6, 466, 2.7305), (6, 517, 3.0293), (6, 567, 3.3223), (6, 616, 3.6094),
    (6, 666, 3.9023), (6, 719, 4.2129), (6, 772, 4.5234), (6, 822, 4.8164), (6, 873, 5.1152),
    (8, 682.5, 5.3320), (8, 711, 5.5547), (8, 754, 5.8906), (8, 797, 6.2266), (8, 841, 6.5703),
    (8, 885, 6.9141), (8, 916.5, 7.1602), (8, 948, 7.4063),
]
# TS 38.214 Table 5.1.3.1-1
QAM64_TABLE = [
    (2, 120, 0.2344), (2, 157, 0.3066), (2, 193, 0.3770), (2, 251, 0.4902), (2, 308, 0.6016),
    (2, 379, 0.7402), (2, 449, 0.8770), (2, 526, 1.0273), (2, 602, 1.1758), (2, 679, 1.3262),
    (4, 340, 1.3281), (4, 378, 1.4766), (4, 434, 1.6953), (4, 490, 1.9141), (4, 553, 2.1602),
    (4, 616, 2.4063), (4, 658, 2.5703), (6, 438, 2.5664), (6, 466, 2.7305), (6, 517, 3.0293),
    (6, 567, 3.3223), (6, 616, 3.6094), (6, 666, 3.9023), (6, 719, 4.2129), (6, 772, 4.5234),
    (6, 822, 4.8164), (6, 873, 5.1152), (6, 910, 5.3320), (6, 948, 5.5547),
]
# SE column of the 256QAM CQI table, TS 38.214 Table 5.2.2.1-3, CQI 2..15
CQI_TABLE_256_SE = [0.3770, 0.8770, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
                    6.2266, 6.9141, 7.4063]


@pytest.fixture(scope="module")
def qam64_tables():
    return load_link_tables(mcs_path=shipped_table_path(McsTable.QAM64.file_name))


def test_shipped_tables_valid(tables):
    assert tables.cqi_thresholds_db.shape == (15,)
    assert tables.mcs_se_table.shape == (28,)
    assert tables.max_mcs == 27 == DEFAULT_MAX_MCS
    assert np.all(np.diff(tables.cqi_thresholds_db) > 0)
    assert np.all(np.diff(tables.mcs_se_table) > 0)
    assert 0 < tables.mcs_se_table.min() and tables.mcs_se_table.max() <= 9.6


@pytest.mark.parametrize("table,published", [(McsTable.QAM256, QAM256_TABLE), (McsTable.QAM64, QAM64_TABLE)])
def test_shipped_mcs_tables_match_published(table, published):
    rows = pd.read_csv(shipped_table_path(table.file_name), float_precision="round_trip")
    assert list(rows["mcs"]) == list(range(len(published)))
    for row, (qm, rate, se) in zip(rows.itertuples(), published):
        assert (row.modulation_order, row.code_rate_x1024, row.se_bits_per_hz) == (qm, rate, se), f"mcs {row.mcs}"
        assert qm * rate / 1024 == pytest.approx(se, abs=1e-4)


def test_qam64_table(qam64_tables):
    assert qam64_tables.max_mcs == 28
    assert mcs_to_se(28, qam64_tables) == 5.5547
    # 16QAM at MCS 16 carries more than 64QAM at MCS 17
    assert qam64_tables.mcs_se_table[16] > qam64_tables.mcs_se_table[17]
    assert list(qam64_tables.modulation_order[15:19]) == [4, 4, 6, 6]
    with pytest.raises(ValueError, match="strictly ascending in MCS"):
        LinkTables(qam64_tables.cqi_thresholds_db, qam64_tables.mcs_se_table)


def test_shipped_checksums_recorded():
    sums = recorded_checksums()
    for name in (CQI_TABLE_FILE, MCS_TABLE_FILE, McsTable.QAM64.file_name):
        assert sums[name] == file_sha256(shipped_table_path(name))


def test_tables_reject_unsorted():
    thr = np.linspace(-2.0, 20.0, 15)
    se = np.linspace(0.2, 7.4, 28)
    with pytest.raises(ValueError):
        LinkTables(thr[::-1].copy(), se)
    with pytest.raises(ValueError):
        LinkTables(thr, np.linspace(0.2, 10.0, 28))
    with pytest.raises(ValueError):
        LinkTables(thr[:14], se)
    with pytest.raises(ValueError):
        LinkTables(thr, se[:1])


def test_tables_modulation_order_rules():
    thr = np.linspace(-2.0, 20.0, 15)
    se = np.array([0.5, 1.0, 0.9, 2.0])
    LinkTables(thr, se, np.array([2, 2, 4, 4]))
    with pytest.raises(ValueError, match="within a modulation order"):
        LinkTables(thr, se, np.array([2, 2, 2, 4]))
    with pytest.raises(ValueError, match="highest MCS"):
        LinkTables(thr, np.array([0.5, 1.0, 2.0, 1.5]), np.array([2, 2, 4, 6]))
    with pytest.raises(ValueError, match="Modulation orders"):
        LinkTables(thr, se, np.array([2, 2, 4, 3]))
    with pytest.raises(ValueError, match="modulation orders"):
        LinkTables(thr, se, np.array([2, 4]))


def test_tables_immutable(tables):
    with pytest.raises(ValueError):
        tables.mcs_se_table[0] = 1.0
    with pytest.raises(ValueError):
        tables.modulation_order[0] = 8


def test_load_custom_tables(tmp_path):
    (tmp_path / "cqi.csv").write_text("cqi,min_sinr_db\n" + "".join(f"{i},{i - 3}\n" for i in range(1, 16)))
    (tmp_path / "mcs.csv").write_text("mcs,se_bits_per_hz\n" + "".join(f"{i},{0.25 * (i + 1)}\n" for i in range(29)))
    t = load_link_tables(tmp_path / "cqi.csv", tmp_path / "mcs.csv")
    assert t.cqi_thresholds_db[0] == -2.0
    assert t.mcs_se_table[-1] == 7.25
    assert t.max_mcs == 28 and t.modulation_order is None


def test_load_rejects_se_off_code_rate(tmp_path):
    bad = tmp_path / "mcs.csv"
    bad.write_text(shipped_table_path(MCS_TABLE_FILE).read_text().replace("8,948,7.4063", "8,948,7.5000"))
    with pytest.raises(ValueError, match=r"mcs \[27\]"):
        load_link_tables(mcs_path=bad)
    gap = tmp_path / "gap.csv"
    gap.write_text("mcs,se_bits_per_hz\n0,0.5\n2,1.0\n")
    with pytest.raises(ValueError, match="expected mcs rows"):
        load_link_tables(mcs_path=gap)


# ---- SINR -> CQI -> MCS -> SE -> throughput ---- #
def test_cqi_edges(tables):
    assert sinr_to_cqi(-math.inf, tables) == 0
    assert sinr_to_cqi(tables.cqi_thresholds_db[0] - 1e-9, tables) == 0
    assert sinr_to_cqi(100.0, tables) == 15
    for k, thr in enumerate(tables.cqi_thresholds_db, start=1):
        assert sinr_to_cqi(thr, tables) == k


def test_cqi_matches_linear_scan(tables):
    sinr = np.random.default_rng(7).uniform(-10.0, 35.0, 1_000_000)
    fast = sinr_to_cqi(sinr, tables)
    scan = np.zeros(len(sinr), dtype=int)
    for k, thr in enumerate(tables.cqi_thresholds_db, start=1):
        scan[sinr >= thr] = k
    assert np.array_equal(fast, scan)


def test_cqi_to_mcs_affine():
    assert cqi_to_mcs(15) == 27
    assert cqi_to_mcs(1) == 0
    assert cqi_to_mcs(8) == 14
    assert cqi_to_mcs(0) == NO_TRANSMISSION
    assert list(cqi_to_mcs(np.arange(16))) == [NO_TRANSMISSION, 0, 2, 4, 6, 8, 10, 12, 14, 15, 17, 19, 21, 23, 25, 27]
    assert list(cqi_to_mcs(np.arange(1, 16), max_mcs=28)) == list(range(0, 29, 2))


def test_cqi_to_mcs_floor():
    assert cqi_to_mcs(15, CqiMcsMap.FLOOR) == 27
    assert cqi_to_mcs(1, CqiMcsMap.FLOOR) == 1
    assert cqi_to_mcs(0, CqiMcsMap.FLOOR) == NO_TRANSMISSION
    assert list(cqi_to_mcs(np.arange(1, 16), CqiMcsMap.FLOOR, max_mcs=28)) == [
        1, 3, 5, 7, 9, 11, 13, 14, 16, 18, 20, 22, 24, 26, 28]


def test_cqi_table_map_lands_on_cqi_table_efficiencies(tables):
    mcs = cqi_to_mcs(np.arange(1, 16), CqiMcsMap.CQI_TABLE)
    assert mcs[0] == 0 and mcs[-1] == 27
    assert list(mcs_to_se(mcs[1:], tables)) == CQI_TABLE_256_SE


@pytest.mark.parametrize("mapping", list(CqiMcsMap))
def test_every_map_is_monotone_on_both_tables(mapping, tables, qam64_tables):
    for t in (tables, qam64_tables):
        mcs = cqi_to_mcs(np.arange(1, 16), mapping, t.max_mcs)
        assert mcs.min() >= 0 and mcs.max() <= t.max_mcs
        assert np.all(np.diff(mcs_to_se(mcs, t)) > 0)


def test_cqi_to_mcs_range():
    with pytest.raises(ValueError):
        cqi_to_mcs(16)
    with pytest.raises(ValueError):
        cqi_to_mcs(-1)
    with pytest.raises(ValueError):
        cqi_to_mcs(3, max_mcs=0)


def test_mcs_to_se(tables):
    assert mcs_to_se(27, tables) == 7.4063
    assert mcs_to_se(0, tables) == 0.2344
    assert mcs_to_se(NO_TRANSMISSION, tables) == 0.0
    with pytest.raises(ValueError):
        mcs_to_se(28, tables)


def test_throughput():
    assert ue_throughput(7.4063, 10e6) == pytest.approx(74.063e6)
    assert ue_throughput(0.0, 10e6) == 0.0
    assert ue_throughput(2.0, 20e6) == 2 * ue_throughput(2.0, 10e6)


def test_throughput_monotone_in_received_power(tables):
    noise = 1e-12
    rx = np.logspace(-14, -8, 300)
    sinr_db = ratio_to_db(sinr_linear(rx, 0.0, noise))
    se = mcs_to_se(cqi_to_mcs(sinr_to_cqi(sinr_db, tables)), tables)
    assert np.all(np.diff(ue_throughput(se, 10e6)) >= 0)


def test_radio_context(tables):
    ctx = RadioContext(PathlossModel(), LinkBudget(g_mimo_db=3.0), tables, FC, 10e6)
    g = ctx.gain_matrix(TX[None, :], RX_500[None, :])
    assert g.shape == (1, 1)
    assert ratio_to_db(g[0, 0]) == pytest.approx(3.0 - 129.937769473141, rel=1e-9)
    sinr_db, cqi, mcs, se = ctx.link_chain(np.array([0.0, 1e4]))
    assert sinr_db[0] == -math.inf and cqi[0] == 0 and mcs[0] == NO_TRANSMISSION and se[0] == 0.0
    assert cqi[1] == 15 and mcs[1] == 27 and se[1] == 7.4063
