"""Raw simulator tables -> grid-aligned training samples.

Pipeline per region: optional UTM->lat/lon transform, one shared GridSpec
over the extent of every table, nearest-cell mapping with Manhattan-distance
conflict resolution, protected/unprotected proximity classification, and
assembly of the paired input/output grids.

Points use the convention x = easting/longitude, y = northing/latitude;
OLU boundary vertices are (lat, lon) pairs in degrees.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from floodcast.core import (
    EARTH_RADIUS_KM,
    GridSpec,
    InundationPoint,
    InundationTable,
    ProtectionScenario,
    RegionSpec,
    Sample,
    encode_scenario,
)


@dataclass(frozen=True)
class CellAssignment:
    """One point's grid cell, with a flag when conflict resolution moved it."""

    point_index: int
    cell: tuple[int, int]
    reassigned: bool = False


@dataclass(frozen=True)
class PointClass:
    """Proximity classification of one point: +1 ~ unprotected side."""

    c: int
    d_prot: float
    d_unprot: float


class CapacityError(ValueError):
    """More points than grid cells; a bijective assignment is impossible."""


def build_grid_spec(tables: Iterable[InundationTable], n: int) -> GridSpec:
    """Grid bounds = min/max over every point of every table.

    The spec is fixed once per region and reused for all of its samples.
    """
    xs: list[float] = []
    ys: list[float] = []
    for table in tables:
        for p in table.points:
            xs.append(p.x)
            ys.append(p.y)
    if not xs:
        raise ValueError("cannot build a grid spec from zero points")
    return GridSpec(n=n, x_min=min(xs), x_max=max(xs), y_min=min(ys), y_max=max(ys))


def map_to_cell(p: InundationPoint, spec: GridSpec) -> tuple[int, int]:
    """Nearest-cell index, clamped to the grid border for outside points."""
    n = spec.n
    i = math.floor((p.x - spec.x_min) / (spec.x_max - spec.x_min) * (n - 1))
    j = math.floor((p.y - spec.y_min) / (spec.y_max - spec.y_min) * (n - 1))
    return (max(0, min(n - 1, i)), max(0, min(n - 1, j)))


def _ring(i0: int, j0: int, r: int, n: int):
    """Cells at Chebyshev distance exactly r from (i0, j0), inside the grid."""
    for j in range(max(0, j0 - r), min(n - 1, j0 + r) + 1):
        if i0 - r >= 0:
            yield (i0 - r, j)
        if i0 + r <= n - 1:
            yield (i0 + r, j)
    for i in range(max(0, i0 - r + 1), min(n - 1, i0 + r - 1) + 1):
        if j0 - r >= 0:
            yield (i, j0 - r)
        if j0 + r <= n - 1:
            yield (i, j0 + r)


def _nearest_empty(cell: tuple[int, int], occupied: set, n: int) -> tuple[int, int]:
    """Empty cell with minimal Manhattan distance to ``cell``.

    Searches expanding Chebyshev rings; since Manhattan >= Chebyshev, once
    the best candidate's distance is <= the searched radius no unexplored
    cell can beat or tie it. Ties break on (smaller i', then smaller j').
    """
    i0, j0 = cell
    best: tuple[int, int, int] | None = None
    for r in range(1, 2 * n):
        for i, j in _ring(i0, j0, r, n):
            if (i, j) not in occupied:
                cand = (abs(i - i0) + abs(j - j0), i, j)
                if best is None or cand < best:
                    best = cand
        if best is not None and best[0] <= r:
            return (best[1], best[2])
    raise RuntimeError("no empty cell found; capacity precondition violated")


def resolve_conflicts(assignments: Sequence[CellAssignment], spec: GridSpec) -> list[CellAssignment]:
    """Make the point->cell mapping bijective.

    Points are processed in input order; the first occupant keeps its cell
    and each later conflicting point moves to the empty cell with minimal
    Manhattan distance (deterministic tie-break), as flagged ``reassigned``.
    """
    n = spec.n
    if len(assignments) > n * n:
        raise CapacityError(f"{len(assignments)} points cannot fill a {n}x{n} grid bijectively")
    occupied: set[tuple[int, int]] = set()
    resolved: list[CellAssignment] = []
    for a in assignments:
        if a.cell not in occupied:
            cell, moved = a.cell, False
        else:
            cell, moved = _nearest_empty(a.cell, occupied, n), True
        occupied.add(cell)
        resolved.append(CellAssignment(a.point_index, cell, moved))
    return resolved


def haversine_km(
    a: tuple[float, float],
    b: tuple[float, float],
    radius_km: float = EARTH_RADIUS_KM,
) -> float:
    """Great-circle distance between two (lat, lon) points in degrees."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2 * radius_km * math.asin(min(1.0, math.sqrt(s)))


def _boundary_vertices(region: RegionSpec) -> tuple[np.ndarray, np.ndarray]:
    """All boundary vertices stacked as radian arrays, plus their OLU index."""
    lats, lons, olus = [], [], []
    for k, poly in enumerate(region.olu_boundaries):
        for lat, lon in poly:
            lats.append(math.radians(lat))
            lons.append(math.radians(lon))
            olus.append(k)
    return np.column_stack([lats, lons]), np.asarray(olus)


def classify_points(
    lats: np.ndarray,
    lons: np.ndarray,
    scenario: ProtectionScenario,
    region: RegionSpec,
) -> list[PointClass]:
    """Vectorized proximity classification of many (lat, lon) points.

    d_prot / d_unprot are the minimum great-circle distances to any vertex
    of any protected / unprotected OLU boundary; an empty set contributes
    +inf so the other side decides. Exact ties classify as +1.
    """
    if scenario.olu_count != region.olu_count:
        raise ValueError(
            f"scenario has {scenario.olu_count} bits but region "
            f"{region.name!r} has {region.olu_count} OLUs"
        )
    verts, olu_idx = _boundary_vertices(region)
    if verts.size == 0:
        raise ValueError("region has no OLU boundary vertices to classify against")
    protected_mask = np.asarray([scenario.bits[k] == 1 for k in olu_idx])

    plat = np.radians(np.asarray(lats, dtype=np.float64))[:, None]
    plon = np.radians(np.asarray(lons, dtype=np.float64))[:, None]
    vlat = verts[:, 0][None, :]
    vlon = verts[:, 1][None, :]
    s = (
        np.sin((vlat - plat) / 2) ** 2
        + np.cos(plat) * np.cos(vlat) * np.sin((vlon - plon) / 2) ** 2
    )
    dist = 2 * region.earth_radius_km * np.arcsin(np.minimum(1.0, np.sqrt(s)))

    d_prot = dist[:, protected_mask].min(axis=1) if protected_mask.any() else np.full(len(dist), np.inf)
    d_unprot = dist[:, ~protected_mask].min(axis=1) if (~protected_mask).any() else np.full(len(dist), np.inf)
    return [
        PointClass(c=1 if du <= dp else -1, d_prot=float(dp), d_unprot=float(du))
        for dp, du in zip(d_prot, d_unprot)
    ]


def classify_point(
    p: InundationPoint,
    scenario: ProtectionScenario,
    region: RegionSpec,
) -> PointClass:
    """Classify one point already expressed as lon/lat (p.x = lon, p.y = lat)."""
    return classify_points(np.asarray([p.y]), np.asarray([p.x]), scenario, region)[0]


def build_sample(table: InundationTable, region: RegionSpec, spec: GridSpec) -> Sample:
    """Assemble the paired (classification, PWL) grids for one scenario.

    Cells carrying a mapped point get (c_i, z_i); all others stay (0, 0).
    """
    n = spec.n
    input_grid = np.zeros((n, n), dtype=np.float32)
    output_grid = np.zeros((n, n), dtype=np.float32)
    if table.points:
        raw = [CellAssignment(k, map_to_cell(p, spec)) for k, p in enumerate(table.points)]
        resolved = resolve_conflicts(raw, spec)
        lats = np.asarray([p.y for p in table.points])
        lons = np.asarray([p.x for p in table.points])
        classes = classify_points(lats, lons, table.scenario, region)
        for a in resolved:
            input_grid[a.cell] = classes[a.point_index].c
            output_grid[a.cell] = table.points[a.point_index].pwl
    return Sample(
        input_grid=input_grid,
        slr_m=table.scenario.slr_m,
        output_grid=output_grid,
        scenario_id=encode_scenario(table.scenario),
    )


@dataclass(frozen=True)
class HistogramRecord:
    """Normalized PWL distribution with the zero bin broken out."""

    zero_mass: float
    bin_edges: tuple[float, ...]
    bin_masses: tuple[float, ...]
    n_cells: int

    @property
    def masses(self) -> tuple[float, ...]:
        return (self.zero_mass,) + self.bin_masses


def pwl_histogram(samples: Sequence[Sample], bins: int = 20) -> HistogramRecord:
    """Distribution of output-grid values across samples, zero bin included."""
    if not samples:
        raise ValueError("need at least one sample")
    values = np.concatenate([s.output_grid.ravel() for s in samples])
    positives = values[values > 0]
    hi = float(positives.max()) if positives.size else 1.0
    counts, edges = np.histogram(positives, bins=bins, range=(0.0, hi))
    total = values.size
    return HistogramRecord(
        zero_mass=float((values == 0).sum() / total),
        bin_edges=tuple(float(e) for e in edges),
        bin_masses=tuple(float(c / total) for c in counts),
        n_cells=int(total),
    )


# WGS 84 ellipsoid and transverse-Mercator series (Krueger, 6th order in
# the third flattening); accurate to well under a millimeter in-zone.
_WGS84_A = 6378137.0
_WGS84_F = 1 / 298.257223563
_K0 = 0.9996
_FALSE_EASTING = 500000.0
_FALSE_NORTHING_SOUTH = 10000000.0

_N = _WGS84_F / (2 - _WGS84_F)
_E = math.sqrt(_WGS84_F * (2 - _WGS84_F))
_A_BAR = _WGS84_A / (1 + _N) * (1 + _N**2 / 4 + _N**4 / 64 + _N**6 / 256)

_ALPHA = (
    _N / 2 - 2 * _N**2 / 3 + 5 * _N**3 / 16 + 41 * _N**4 / 180 - 127 * _N**5 / 288 + 7891 * _N**6 / 37800,
    13 * _N**2 / 48 - 3 * _N**3 / 5 + 557 * _N**4 / 1440 + 281 * _N**5 / 630 - 1983433 * _N**6 / 1935360,
    61 * _N**3 / 240 - 103 * _N**4 / 140 + 15061 * _N**5 / 26880 + 167603 * _N**6 / 181440,
    49561 * _N**4 / 161280 - 179 * _N**5 / 168 + 6601661 * _N**6 / 7257600,
    34729 * _N**5 / 80640 - 3418889 * _N**6 / 1995840,
    212378941 * _N**6 / 319334400,
)
_BETA = (
    _N / 2 - 2 * _N**2 / 3 + 37 * _N**3 / 96 - _N**4 / 360 - 81 * _N**5 / 512 + 96199 * _N**6 / 604800,
    _N**2 / 48 + _N**3 / 15 - 437 * _N**4 / 1440 + 46 * _N**5 / 105 - 1118711 * _N**6 / 3870720,
    17 * _N**3 / 480 - 37 * _N**4 / 840 - 209 * _N**5 / 4480 + 5569 * _N**6 / 90720,
    4397 * _N**4 / 161280 - 11 * _N**5 / 504 - 830251 * _N**6 / 7257600,
    4583 * _N**5 / 161280 - 108847 * _N**6 / 3991680,
    20648693 * _N**6 / 638668800,
)


def _zone_central_meridian_deg(zone: int) -> float:
    return -183.0 + 6.0 * zone


def _check_zone(zone: int) -> None:
    if not 1 <= zone <= 60:
        raise ValueError(f"UTM zone must be in 1..60, got {zone}")


def latlon_to_utm(lat: float, lon: float, zone: int) -> tuple[float, float]:
    """Forward transverse-Mercator projection into the given UTM zone.

    Returns (easting, northing) with the northern-hemisphere northing
    convention (no false northing for southern latitudes applied here).
    """
    _check_zone(zone)
    phi = math.radians(lat)
    dlon = math.radians(lon - _zone_central_meridian_deg(zone))
    sin_phi = math.sin(phi)
    t = math.sinh(math.atanh(sin_phi) - _E * math.atanh(_E * sin_phi))
    xi = math.atan2(t, math.cos(dlon))
    eta = math.asinh(math.sin(dlon) / math.hypot(t, math.cos(dlon)))
    xi_s, eta_s = xi, eta
    for j, alpha in enumerate(_ALPHA, start=1):
        xi_s += alpha * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_s += alpha * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    easting = _FALSE_EASTING + _K0 * _A_BAR * eta_s
    northing = _K0 * _A_BAR * xi_s
    return easting, northing


def utm_to_latlon(
    x: float,
    y: float,
    zone: int,
    northern: bool = True,
    passthrough: bool = False,
) -> tuple[float, float]:
    """Inverse UTM projection to (lat, lon) degrees.

    With ``passthrough=True`` the input is returned unchanged, for data
    already in lat/lon (x is then interpreted as lat, y as lon).
    """
    if passthrough:
        return x, y
    _check_zone(zone)
    northing = y if northern else y - _FALSE_NORTHING_SOUTH
    xi = northing / (_K0 * _A_BAR)
    eta = (x - _FALSE_EASTING) / (_K0 * _A_BAR)
    xi_p, eta_p = xi, eta
    for j, beta in enumerate(_BETA, start=1):
        xi_p -= beta * math.sin(2 * j * xi) * math.cosh(2 * j * eta)
        eta_p -= beta * math.cos(2 * j * xi) * math.sinh(2 * j * eta)
    # Newton-solve the conformal-to-geographic latitude relation.
    tau_p = math.sin(xi_p) / math.hypot(math.sinh(eta_p), math.cos(xi_p))
    tau = tau_p
    for _ in range(8):
        sigma = math.sinh(_E * math.atanh(_E * tau / math.hypot(1.0, tau)))
        f_tau = tau * math.hypot(1.0, sigma) - sigma * math.hypot(1.0, tau) - tau_p
        d_tau = (
            (math.hypot(1.0, sigma) * math.hypot(1.0, tau) - sigma * tau)
            * (1 - _E**2)
            * math.hypot(1.0, tau)
            / (1 + (1 - _E**2) * tau**2)
        )
        tau -= f_tau / d_tau
    lat = math.degrees(math.atan(tau))
    lon = _zone_central_meridian_deg(zone) + math.degrees(
        math.atan2(math.sinh(eta_p), math.cos(xi_p))
    )
    return lat, lon


def load_region_json(path: str | Path) -> RegionSpec:
    """Read a region boundary file: {"name": ..., "olu_boundaries": [[[lat, lon], ...], ...]}."""
    data = json.loads(Path(path).read_text())
    return RegionSpec(
        name=data["name"],
        olu_boundaries=tuple(tuple((v[0], v[1]) for v in poly) for poly in data["olu_boundaries"]),
    )


def load_table_csv(path: str | Path, scenario: ProtectionScenario) -> InundationTable:
    """Read one per-scenario table (columns x, y, pwl; header optional)."""
    points = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("x", "# x", "#x"):
                continue
            x, y, pwl = (float(v) for v in row[:3])
            points.append(InundationPoint(x=x, y=y, pwl=pwl))
    return InundationTable(scenario=scenario, points=tuple(points))
