"""Shared fixtures for pipeline-level tests."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import make_dem  # noqa: E402

from mars_coloc.raster import format_ascii_grid  # noqa: E402


def _label_text(product_id="TESTPRODUCT_0001", azimuth=45.0, elevation=0.0,
                hfov=90.0, vfov=180.0, site=56, drive=1632):
    return f"""\
PDS_VERSION_ID = PDS3
PRODUCT_ID = "{product_id}"
ROVER_MOTION_COUNTER_NAME = ("SITE", "DRIVE", "POSE", "ARM")
ROVER_MOTION_COUNTER = ({site}, {drive}, 8, 0)
GROUP = SITE_DERIVED_GEOMETRY_PARMS
  FIXED_INSTRUMENT_AZIMUTH = {azimuth} <deg>
  FIXED_INSTRUMENT_ELEVATION = {elevation} <deg>
END_GROUP = SITE_DERIVED_GEOMETRY_PARMS
GROUP = INSTRUMENT_STATE_PARMS
  HORIZONTAL_FOV = {hfov} <deg>
  VERTICAL_FOV = {vfov} <deg>
END_GROUP = INSTRUMENT_STATE_PARMS
END
"""


@pytest.fixture
def label_factory(tmp_path):
    """Write a PDS3-style label file and return its path."""
    def write(name="label.lbl", **kwargs):
        path = tmp_path / name
        path.write_text(_label_text(**kwargs), encoding="utf-8")
        return path
    return write


@pytest.fixture
def flat_dem_file(tmp_path):
    """64x64 flat DEM on disk; observer cell (32, 32) center is (32.5, 31.5)."""
    dem = make_dem(np.zeros((64, 64)))
    path = tmp_path / "dem.asc"
    path.write_text(format_ascii_grid(dem.transform, dem.elevations, -9999.0),
                    encoding="utf-8")
    return path


@pytest.fixture
def places_csv_file(tmp_path):
    """Localization table placing RMC (56, 1632) at the DEM center cell."""
    path = tmp_path / "places.csv"
    path.write_text(
        "site,drive,easting,northing,elevation\n"
        "56,1632,32.5,31.5,0.0\n"
        "56,1700,10.5,10.5,0.0\n",
        encoding="utf-8")
    return path
