"""Shared test fixtures and independent oracles.

The line-of-sight oracle here deliberately re-implements sampling and
geometry from scratch (angles instead of tangents, dense uniform sampling,
its own bilinear interpolation) so engine bugs cannot hide behind shared
code.
"""

from __future__ import annotations

import math

import numpy as np

from mars_coloc.raster import Dem, GeoTransform

# ---------------------------------------------------------------------------
# DEM builders
# ---------------------------------------------------------------------------


def make_dem(array, origin_e=0.0, origin_n=None, pixel=1.0, nodata=None) -> Dem:
    array = np.asarray(array, dtype=float)
    rows, cols = array.shape
    if origin_n is None:
        origin_n = rows * pixel
    transform = GeoTransform(origin_easting=origin_e, origin_northing=origin_n,
                             pixel_size_m=pixel, rows=rows, cols=cols)
    return Dem(transform=transform, elevations=array, nodata=nodata)


def flat_dem(rows=64, cols=64, value=0.0, pixel=1.0) -> Dem:
    return make_dem(np.full((rows, cols), value), pixel=pixel)


def wall_dem(rows=64, cols=64, wall_col=40, wall_height=10.0) -> Dem:
    """Flat ground with one full-height column of raised cells."""
    grid = np.zeros((rows, cols))
    grid[:, wall_col] = wall_height
    return make_dem(grid)


def smooth_dem(seed: int, rows=128, cols=128, n_bumps=6,
               amplitude=8.0, pixel=1.0) -> Dem:
    """Sum of random Gaussian bumps; deterministic per seed.

    Values are quantized to 1/65536 m so adding round constants like +100
    stays exact in floating point (sub-micrometre quantization, invisible
    to every geometric tolerance in the suite).
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(float)
    grid = np.zeros((rows, cols))
    for _ in range(n_bumps):
        cy = rng.uniform(0, rows)
        cx = rng.uniform(0, cols)
        sigma = rng.uniform(6.0, 20.0)
        height = rng.uniform(-amplitude, amplitude)
        grid += height * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2)
                                / (2.0 * sigma * sigma))
    grid = np.round(grid * 65536.0) / 65536.0
    return make_dem(grid, pixel=pixel)


def dem_cell_center(dem: Dem, row: int, col: int):
    t = dem.transform
    return (t.origin_easting + (col + 0.5) * t.pixel_size_m,
            t.origin_northing - (row + 0.5) * t.pixel_size_m)


# ---------------------------------------------------------------------------
# Independent line-of-sight oracle
# ---------------------------------------------------------------------------


def oracle_bilinear(dem: Dem, easting: float, northing: float) -> float:
    """Straightforward 4-neighbor bilinear between cell centers."""
    t = dem.transform
    x = (easting - t.origin_easting) / t.pixel_size_m - 0.5
    y = (t.origin_northing - northing) / t.pixel_size_m - 0.5
    x = min(max(x, 0.0), t.cols - 1.0)
    y = min(max(y, 0.0), t.rows - 1.0)
    c0 = min(int(math.floor(x)), t.cols - 2) if t.cols > 1 else 0
    r0 = min(int(math.floor(y)), t.rows - 2) if t.rows > 1 else 0
    c1 = min(c0 + 1, t.cols - 1)
    r1 = min(r0 + 1, t.rows - 1)
    fx = x - c0
    fy = y - r0
    e = dem.elevations
    return ((1 - fx) * (1 - fy) * e[r0, c0] + fx * (1 - fy) * e[r0, c1]
            + (1 - fx) * fy * e[r1, c0] + fx * fy * e[r1, c1])


def oracle_los(dem: Dem, eye_e: float, eye_n: float, eye_height: float,
               target_e: float, target_n: float, target_height: float = 0.0,
               samples: int = 2048) -> bool:
    """Dense-sampling occlusion test: target visible iff every interior
    sample's vertical angle stays strictly below the target's."""
    eye_z = oracle_bilinear(dem, eye_e, eye_n) + eye_height
    dist = math.hypot(target_e - eye_e, target_n - eye_n)
    if dist == 0.0:
        return True
    target_z = oracle_bilinear(dem, target_e, target_n) + target_height
    target_angle = math.atan2(target_z - eye_z, dist)
    fractions = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    for f in fractions:
        pe = eye_e + f * (target_e - eye_e)
        pn = eye_n + f * (target_n - eye_n)
        terrain_angle = math.atan2(oracle_bilinear(dem, pe, pn) - eye_z,
                                   f * dist)
        if terrain_angle >= target_angle:
            return False
    return True


def oracle_bilinear_vec(dem: Dem, easting: np.ndarray,
                        northing: np.ndarray) -> np.ndarray:
    """Vectorized twin of :func:`oracle_bilinear` (still test-local code)."""
    t = dem.transform
    x = (easting - t.origin_easting) / t.pixel_size_m - 0.5
    y = (t.origin_northing - northing) / t.pixel_size_m - 0.5
    x = np.clip(x, 0.0, t.cols - 1.0)
    y = np.clip(y, 0.0, t.rows - 1.0)
    c0 = np.minimum(np.floor(x).astype(int), max(t.cols - 2, 0))
    r0 = np.minimum(np.floor(y).astype(int), max(t.rows - 2, 0))
    c1 = np.minimum(c0 + 1, t.cols - 1)
    r1 = np.minimum(r0 + 1, t.rows - 1)
    fx = x - c0
    fy = y - r0
    e = dem.elevations
    return ((1 - fx) * (1 - fy) * e[r0, c0] + fx * (1 - fy) * e[r0, c1]
            + (1 - fx) * fy * e[r1, c0] + fx * fy * e[r1, c1])


def oracle_los_vec(dem: Dem, eye_e: float, eye_n: float, eye_height: float,
                   target_e: float, target_n: float,
                   target_height: float = 0.0, samples: int = 512) -> bool:
    """Dense-sampling LOS oracle with numpy-vectorized interior samples."""
    eye_z = oracle_bilinear(dem, eye_e, eye_n) + eye_height
    dist = math.hypot(target_e - eye_e, target_n - eye_n)
    if dist == 0.0:
        return True
    target_z = oracle_bilinear(dem, target_e, target_n) + target_height
    target_angle = math.atan2(target_z - eye_z, dist)
    fractions = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    pe = eye_e + fractions * (target_e - eye_e)
    pn = eye_n + fractions * (target_n - eye_n)
    terrain_angles = np.arctan2(oracle_bilinear_vec(dem, pe, pn) - eye_z,
                                fractions * dist)
    return bool((terrain_angles < target_angle).all())


def oracle_azimuth(de: float, dn: float) -> float:
    return math.degrees(math.atan2(de, dn)) % 360.0


def oracle_in_arc(left: float, right: float, azimuth: float) -> bool:
    width = (right - left) % 360.0
    return (azimuth - left) % 360.0 <= width


# ---------------------------------------------------------------------------
# Label fixtures
# ---------------------------------------------------------------------------

# Counter excerpt as it appears in real MSL Mastcam labels.
RMC_EXCERPT_PVL = """\
ROVER_MOTION_COUNTER_NAME = ("SITE", "DRIVE", "POSE",
                             "ARM", "CHIMRA", "DRILL",
                             "RSM", "HGA",
                             "DRT", "IC")
ROVER_MOTION_COUNTER      = (56, 1632,
                             8, 0,
                             0, 0,
                             142, 90,
                             0, 0 )
"""

FULL_PDS3_LABEL = """\
PDS_VERSION_ID = PDS3

/* identification data elements */

PRODUCT_ID = "1429MR0070680170702598E01_DRCL"
INSTRUMENT_HOST_NAME = "MARS SCIENCE LABORATORY"

""" + RMC_EXCERPT_PVL + """
GROUP = SITE_DERIVED_GEOMETRY_PARMS
  FIXED_INSTRUMENT_AZIMUTH = 93.5 <deg>
  FIXED_INSTRUMENT_ELEVATION = -8.5 <deg>
END_GROUP = SITE_DERIVED_GEOMETRY_PARMS

GROUP = INSTRUMENT_STATE_PARMS
  HORIZONTAL_FOV = 20.0 <deg>
  VERTICAL_FOV = 15.0 <deg>
END_GROUP = INSTRUMENT_STATE_PARMS
END
"""

# Coordinate-space excerpt as it appears in real MastcamZ labels, wrapped in
# a root element so the document is well-formed.
RMC_EXCERPT_PDS4 = """\
<excerpt xmlns:geom="http://pds.nasa.gov/pds4/geom/v1">
<geom:coordinate_space_frame_type>
    ROVER_NAV_FRAME
</geom:coordinate_space_frame_type>
<geom:Coordinate_Space_Index>
    <geom:index_id>SITE</geom:index_id>
    <geom:index_value_number>4</geom:index_value_number>
</geom:Coordinate_Space_Index>
<geom:Coordinate_Space_Index>
    <geom:index_id>DRIVE</geom:index_id>
    <geom:index_value_number>48</geom:index_value_number>
</geom:Coordinate_Space_Index>
</excerpt>
"""

FULL_PDS4_LABEL = """\
<?xml version="1.0" encoding="UTF-8"?>
<Product_Observational xmlns="http://pds.nasa.gov/pds4/pds/v1"
                       xmlns:geom="http://pds.nasa.gov/pds4/geom/v1">
  <Identification_Area>
    <logical_identifier>urn:nasa:pds:mars2020_mastcamz_ops_calibrated:data:ZLF_TEST_0001</logical_identifier>
  </Identification_Area>
  <Observation_Area>
    <Discipline_Area>
      <geom:Geometry>
        <geom:coordinate_space_frame_type>ROVER_NAV_FRAME</geom:coordinate_space_frame_type>
        <geom:Coordinate_Space_Index>
          <geom:index_id>SITE</geom:index_id>
          <geom:index_value_number>4</geom:index_value_number>
        </geom:Coordinate_Space_Index>
        <geom:Coordinate_Space_Index>
          <geom:index_id>DRIVE</geom:index_id>
          <geom:index_value_number>48</geom:index_value_number>
        </geom:Coordinate_Space_Index>
        <geom:instrument_azimuth unit="deg">141.25</geom:instrument_azimuth>
        <geom:instrument_elevation unit="deg">-12.0</geom:instrument_elevation>
        <geom:horizontal_fov unit="deg">18.0</geom:horizontal_fov>
        <geom:vertical_fov unit="deg">13.5</geom:vertical_fov>
      </geom:Geometry>
    </Discipline_Area>
  </Observation_Area>
</Product_Observational>
"""
