import math

import numpy as np
import pandas as pd
import pytest
from scipy.spatial.distance import pdist

from ranenergy.simulator.topology import (NetworkConfig, build_hex_grid, default_region, hex_ring_count, place_ues,
                                          write_region_csv, write_sites_csv, write_ues_csv)

HEX_AREA = 3 * math.sqrt(3) / 2


@pytest.fixture
def net():
    return NetworkConfig()


@pytest.fixture
def plan(net):
    return build_hex_grid(net)


def test_network_defaults(net):
    assert net.carrier_freq_hz == 3.5e9
    assert net.bandwidth_hz == 10e6
    assert net.n_bs == 19
    assert net.isd_m == 500.0
    assert abs(net.p_max_dbm - 43.0) < 0.05


def test_network_rejects_non_positive():
    with pytest.raises(ValueError, match="isd_m"):
        NetworkConfig(isd_m=0)
    with pytest.raises(ValueError, match="fixed_ue_count"):
        NetworkConfig(fixed_ue_count=-1)


def test_hex_ring_count():
    assert [hex_ring_count(n) for n in (1, 7, 19, 37)] == [0, 1, 2, 3]
    for bad in (2, 18, 20):
        with pytest.raises(ValueError):
            hex_ring_count(bad)


def test_grid_rows_and_centre(plan):
    assert len(plan) == 19
    assert plan.cell_ids == list(range(19))
    ys = plan.xyz[:, 1]
    rows = [int(np.sum(np.isclose(ys, y))) for y in sorted(set(np.round(ys, 6)))]
    assert rows == [3, 4, 5, 4, 3]
    centre = plan.sites[9]
    assert (centre.x_m, centre.y_m) == (0.0, 0.0)
    assert np.all(plan.xyz[:, 2] == 25.0)


def test_centre_neighbours(plan):
    d = np.linalg.norm(plan.xyz[:, :2] - plan.xyz[9, :2], axis=1)
    assert d[8] == 500.0 and d[10] == 500.0
    assert plan.neighbours(9) == [4, 5, 8, 10, 13, 14]


def test_min_pairwise_distance_is_isd(plan):
    assert pdist(plan.xyz[:, :2]).min() == pytest.approx(500.0, rel=1e-9)


def test_rings(plan):
    rings = [plan.ring(c) for c in plan.cell_ids]
    assert rings.count(0) == 1 and rings[9] == 0
    assert sorted(c for c in plan.cell_ids if rings[c] == 1) == [4, 5, 8, 10, 13, 14]
    assert rings.count(2) == 12


def test_seven_site_grid():
    plan = build_hex_grid(NetworkConfig(n_bs=7))
    assert len(plan) == 7
    assert (plan.sites[3].x_m, plan.sites[3].y_m) == (0.0, 0.0)
    assert len(plan.neighbours(3)) == 6


def test_invalid_site_count():
    with pytest.raises(ValueError, match="n_bs=18"):
        build_hex_grid(NetworkConfig(n_bs=18))


def test_default_region_area(plan, net):
    region = default_region(plan, net)
    # hexagon of sites (circumradius 1000 m) grown by a hexagon of circumradius 250 m
    expected = (HEX_AREA * (1000.0 ** 2 + 250.0 ** 2) + 6 * 1000.0 * 250.0) / 1e6
    assert region.area_km2 == pytest.approx(expected, rel=1e-9)
    assert region.area_km2 == pytest.approx(4.260455974562898, rel=1e-9)
    assert np.all(region.contains(plan.xyz))


def test_single_site_region():
    net = NetworkConfig(n_bs=1)
    plan = build_hex_grid(net)
    region = default_region(plan, net)
    assert len(region.vertices) == 6
    assert np.allclose(np.linalg.norm(region.vertices, axis=1), 250.0)
    assert region.area_km2 == pytest.approx(HEX_AREA * 250.0 ** 2 / 1e6, rel=1e-9)


def test_region_vertices_counter_clockwise(plan, net):
    v = default_region(plan, net).vertices
    signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
    assert signed > 0


def test_region_contains_rejects_outside(plan, net):
    region = default_region(plan, net)
    assert not region.contains(np.array([[5000.0, 0.0]]))[0]


def test_place_ues_deterministic(plan, net):
    region = default_region(plan, net)
    a = place_ues(region, 1256.0, 1.5, seed=42)
    b = place_ues(region, 1256.0, 1.5, seed=42)
    assert a.tobytes() == b.tobytes()
    assert np.all(a[:, 2] == 1.5)
    assert np.all(region.contains(a))
    assert not np.array_equal(a, place_ues(region, 1256.0, 1.5, seed=43))


def test_place_ues_fixed_count(plan, net):
    region = default_region(plan, net)
    assert place_ues(region, 1256.0, 1.5, seed=0, fixed_count=123).shape == (123, 3)


def test_place_ues_tiny_density(plan, net):
    region = default_region(plan, net)
    assert place_ues(region, 1e-9, 1.5, seed=0).shape == (0, 3)


def test_place_ues_rejects_bad_input(plan, net):
    region = default_region(plan, net)
    with pytest.raises(ValueError):
        place_ues(region, 0.0, 1.5, seed=0)


def test_poisson_mean_count(plan, net):
    region = default_region(plan, net)
    expected = 1256.0 * region.area_km2
    counts = [len(place_ues(region, 1256.0, 1.5, seed=s)) for s in range(300)]
    assert np.mean(counts) == pytest.approx(expected, rel=0.02)


@pytest.mark.slow
def test_poisson_mean_and_variance_agree(plan, net):
    region = default_region(plan, net)
    counts = np.array([len(place_ues(region, 1256.0, 1.5, seed=s)) for s in range(10_000)])
    assert counts.mean() == pytest.approx(1256.0 * region.area_km2, rel=0.02)
    assert counts.var(ddof=1) == pytest.approx(counts.mean(), rel=0.05)


def test_csv_exports(tmp_path, plan, net):
    region = default_region(plan, net)
    ues = place_ues(region, 1256.0, 1.5, seed=1, fixed_count=10)
    write_sites_csv(plan, tmp_path / "sites.csv")
    write_ues_csv(ues, tmp_path / "ues.csv")
    write_region_csv(region, tmp_path / "region.csv")

    sites = pd.read_csv(tmp_path / "sites.csv", float_precision="round_trip")
    assert list(sites.columns) == ["cell_id", "x_m", "y_m", "z_m"]
    assert sites["cell_id"].tolist() == list(range(19))
    assert np.array_equal(sites[["x_m", "y_m", "z_m"]].to_numpy(), plan.xyz)

    ue = pd.read_csv(tmp_path / "ues.csv", float_precision="round_trip")
    assert list(ue.columns) == ["ue_id", "x_m", "y_m", "z_m"]
    assert np.array_equal(ue[["x_m", "y_m", "z_m"]].to_numpy(), ues)
    assert list(pd.read_csv(tmp_path / "region.csv").columns) == ["vertex", "x_m", "y_m"]
