"""topology.py
Hexagonal macro-site layout, simulation region and UE placement.

Key points
----------
• Sites sit on a centred hexagonal lattice, rows of 3,4,5,4,3 for the 19-site
  plan, numbered bottom row first and left to right (see topology.txt).
• The region is the convex hull of the sites grown outward by a hexagon of
  circumradius D_isd/2.
• UEs follow a homogeneous Poisson point process drawn from a PCG64 stream
  seeded per run, so placements are reproducible bit for bit.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull


@dataclass(frozen=True)
class NetworkConfig:
    """Deployment parameters of the homogeneous macro network."""
    carrier_freq_hz: float = 3.5e9
    bandwidth_hz: float = 10e6
    n_bs: int = 19
    bs_height_m: float = 25.0
    p_max_w: float = 20.0
    isd_m: float = 500.0
    ue_density_per_km2: float = 1256.0
    ue_height_m: float = 1.5
    fixed_ue_count: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("carrier_freq_hz", "bandwidth_hz", "n_bs", "bs_height_m",
                     "p_max_w", "isd_m", "ue_density_per_km2", "ue_height_m"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.fixed_ue_count is not None and self.fixed_ue_count < 0:
            raise ValueError(f"fixed_ue_count must be >= 0, got {self.fixed_ue_count}")

    @property
    def p_max_dbm(self) -> float:
        return 10.0 * math.log10(self.p_max_w) + 30.0


@dataclass(frozen=True)
class Site:
    cell_id: int
    x_m: float
    y_m: float
    z_m: float


@dataclass(frozen=True)
class SitePlan:
    """Ordered list of macro sites; index in `sites` equals `cell_id`."""
    sites: Tuple[Site, ...]
    isd_m: float

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def xyz(self) -> np.ndarray:
        return np.array([(s.x_m, s.y_m, s.z_m) for s in self.sites], dtype=float)

    @property
    def cell_ids(self) -> List[int]:
        return [s.cell_id for s in self.sites]

    def neighbours(self, cell_id: int) -> List[int]:
        """Cells exactly one inter-site distance away from `cell_id`."""
        xy = self.xyz[:, :2]
        d = np.linalg.norm(xy - xy[cell_id], axis=1)
        return [int(j) for j in np.flatnonzero(np.isclose(d, self.isd_m, rtol=1e-9))]

    def ring(self, cell_id: int) -> int:
        """Hex ring index of `cell_id` counted from the centre site (ring 0)."""
        xy = self.xyz[:, :2] / self.isd_m
        centre = xy[len(self.sites) // 2]
        # axial coordinates on a lattice whose rows are horizontal
        dy = (xy[cell_id, 1] - centre[1]) / (math.sqrt(3.0) / 2.0)
        dx = xy[cell_id, 0] - centre[0] - dy / 2.0
        q, r = round(dx), round(dy)
        return int(max(abs(q), abs(r), abs(q + r)))


@dataclass(frozen=True)
class Region:
    """Convex simulation area, vertices counter-clockwise in metres."""
    vertices: np.ndarray = field(repr=False)
    area_km2: float

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorised inclusive containment test for (N, 2+) points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
        v = self.vertices
        edges = np.roll(v, -1, axis=0) - v
        rel = pts[:, np.newaxis, :] - v[np.newaxis, :, :]
        cross = edges[np.newaxis, :, 0] * rel[:, :, 1] - edges[np.newaxis, :, 1] * rel[:, :, 0]
        tol = 1e-9 * max(1.0, float(np.max(np.abs(v))))
        return np.all(cross >= -tol, axis=1)


def hex_ring_count(n_bs: int) -> int:
    """Number of rings k around the centre for a centred hex layout of n_bs sites."""
    k = 0
    while 1 + 3 * k * (k + 1) < n_bs:
        k += 1
    if 1 + 3 * k * (k + 1) != n_bs:
        raise ValueError(f"n_bs={n_bs} has no centred hexagonal layout (valid: 1, 7, 19, 37, ...)")
    return k


def build_hex_grid(config: NetworkConfig) -> SitePlan:
    """
    Place `config.n_bs` sites on a centred hexagonal grid.

    Rows are horizontal and `config.isd_m` apart along the lattice; row lengths
    grow from k+1 to 2k+1 and shrink back. Numbering runs row-major from the
    bottom row, which puts the centre at cell_id n_bs // 2 (9 for 19 sites).
    """
    k = hex_ring_count(config.n_bs)
    isd = config.isd_m
    row_pitch = isd * math.sqrt(3.0) / 2.0
    sites: List[Site] = []
    for row in range(2 * k + 1):
        offset = row - k
        n_in_row = 2 * k + 1 - abs(offset)
        y = offset * row_pitch
        for col in range(n_in_row):
            x = (col - (n_in_row - 1) / 2.0) * isd
            sites.append(Site(len(sites), x, y, config.bs_height_m))
    logging.debug(f"Built hex grid: {len(sites)} sites, {k} ring(s), ISD {isd} m")
    return SitePlan(tuple(sites), isd)


def _margin_hexagon(radius_m: float) -> np.ndarray:
    # vertices at 30°, 90°, ... so that faces point at the lattice neighbours
    angles = np.deg2rad(30.0 + 60.0 * np.arange(6))
    return radius_m * np.column_stack((np.cos(angles), np.sin(angles)))


def default_region(plan: SitePlan, config: NetworkConfig) -> Region:
    """Convex hull of the sites grown by a hexagon of circumradius D_isd/2."""
    if len(plan) == 0:
        raise ValueError("Cannot build a region for an empty site plan")
    xy = plan.xyz[:, :2]
    margin = _margin_hexagon(config.isd_m / 2.0)
    candidates = (xy[:, np.newaxis, :] + margin[np.newaxis, :, :]).reshape(-1, 2)
    hull = ConvexHull(candidates)
    # scipy returns 2-D hull vertices in counter-clockwise order
    vertices = candidates[hull.vertices]
    return Region(vertices=vertices, area_km2=float(hull.volume) / 1e6)


def _triangle_fan(vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = vertices[0]
    b = vertices[1:-1]
    c = vertices[2:]
    areas = 0.5 * np.abs((b[:, 0] - a[0]) * (c[:, 1] - a[1]) - (b[:, 1] - a[1]) * (c[:, 0] - a[0]))
    return np.stack([np.broadcast_to(a, b.shape), b, c], axis=1), areas


def place_ues(region: Region, density: float, height: float, seed: int,
              fixed_count: Optional[int] = None) -> np.ndarray:
    """
    Drop UEs by a homogeneous Poisson point process over `region`.

    Args:
        region: Convex simulation area.
        density: UEs per km².
        height: UE antenna height in metres (same for every UE).
        seed: Non-negative integer seeding a PCG64 stream.
        fixed_count: Bypass the Poisson draw with an exact UE count.

    Returns:
        Array of shape (N_UE, 3) with x, y, z in metres.
    """
    if not region.area_km2 > 0:
        raise ValueError(f"Region has zero area ({region.area_km2} km²)")
    if not density > 0:
        raise ValueError(f"UE density must be > 0, got {density}")

    rng = np.random.default_rng(seed)
    n = int(fixed_count) if fixed_count is not None else int(rng.poisson(density * region.area_km2))
    if n == 0:
        return np.empty((0, 3), dtype=float)

    # uniform over a convex polygon: pick a fan triangle by area, then a point in it
    triangles, areas = _triangle_fan(region.vertices)
    which = rng.choice(len(areas), size=n, p=areas / areas.sum())
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    tri = triangles[which]
    xy = tri[:, 0] + u[:, np.newaxis] * (tri[:, 1] - tri[:, 0]) + v[:, np.newaxis] * (tri[:, 2] - tri[:, 0])
    return np.column_stack((xy, np.full(n, float(height))))


# ------------------------------------------------------------------------ #
# CSV export
# ------------------------------------------------------------------------ #
def write_sites_csv(plan: SitePlan, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "x_m", "y_m", "z_m"])
        for s in plan.sites:
            writer.writerow([s.cell_id, repr(s.x_m), repr(s.y_m), repr(s.z_m)])


def write_ues_csv(ue_xyz: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ue_id", "x_m", "y_m", "z_m"])
        for i, (x, y, z) in enumerate(ue_xyz.tolist()):
            writer.writerow([i, repr(x), repr(y), repr(z)])


def write_region_csv(region: Region, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "x_m", "y_m"])
        for i, (x, y) in enumerate(region.vertices.tolist()):
            writer.writerow([i, repr(x), repr(y)])
