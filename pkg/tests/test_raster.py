"""Raster model tests: transforms, sampling, codecs, polygonization."""

import json
import struct

import numpy as np
import pytest

from mars_coloc.errors import (
    AllNodataError,
    NodataNeighborhoodError,
    OutOfBoundsError,
    RasterFormatError,
)
from mars_coloc.raster import (
    ASCII_GRID,
    GEOTIFF,
    HIDDEN,
    VIS_NODATA,
    VISIBLE,
    Dem,
    GeoTransform,
    VisibilityRaster,
    format_ascii_grid,
    load_dem,
    map_to_pixel,
    parse_ascii_grid,
    pixel_to_map,
    polygonize,
    read_visibility,
    sample_elevation,
    write_visibility,
)

from helpers import flat_dem, make_dem


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

def _transform(oe=0.0, on=100.0, px=1.0, rows=100, cols=100):
    return GeoTransform(origin_easting=oe, origin_northing=on,
                        pixel_size_m=px, rows=rows, cols=cols)


def test_origin_maps_to_pixel_zero():
    assert map_to_pixel(_transform(), 0.0, 100.0) == (0.0, 0.0)


def test_linear_map():
    assert map_to_pixel(_transform(), 2.5, 97.5) == (2.5, 2.5)


def test_transform_roundtrip_property():
    rng = np.random.default_rng(42)
    t = _transform(oe=-4141.0, on=9580.25, px=0.3, rows=512, cols=768)
    cols = rng.uniform(-100.0, 900.0, 1000)
    rows = rng.uniform(-100.0, 700.0, 1000)
    easting, northing = pixel_to_map(t, cols, rows)
    back_c, back_r = map_to_pixel(t, easting, northing)
    assert np.max(np.abs(back_c - cols)) < 1e-9
    assert np.max(np.abs(back_r - rows)) < 1e-9


def test_transform_validation():
    with pytest.raises(RasterFormatError):
        GeoTransform(0.0, 0.0, 0.0, 4, 4)
    with pytest.raises(RasterFormatError):
        GeoTransform(0.0, 0.0, 1.0, 0, 4)


# ---------------------------------------------------------------------------
# Elevation sampling
# ---------------------------------------------------------------------------

def test_constant_dem_interior_sampling():
    dem = flat_dem(8, 8, value=10.0)
    rng = np.random.default_rng(3)
    for _ in range(50):
        e = rng.uniform(0.5, 7.5)
        n = rng.uniform(0.5, 7.5)
        assert sample_elevation(dem, e, n) == pytest.approx(10.0)


def test_linear_midpoint():
    grid = np.zeros((2, 2))
    grid[:, 1] = 1.0  # east column raised; centers one pixel apart
    dem = make_dem(grid)
    # halfway between the two cell centers of the top row
    value = sample_elevation(dem, 1.0, 1.5)
    assert value == pytest.approx(0.5)


def test_sampling_at_cell_centers_equals_stored():
    rng = np.random.default_rng(11)
    grid = rng.uniform(-50.0, 50.0, (9, 7))
    dem = make_dem(grid)
    for r in range(9):
        for c in range(7):
            e = c + 0.5
            n = 9 - (r + 0.5)
            assert sample_elevation(dem, e, n) == pytest.approx(grid[r, c],
                                                                abs=1e-12)


def test_bilinear_bounded_by_neighbors_property():
    rng = np.random.default_rng(99)
    grid = rng.uniform(-5.0, 5.0, (16, 16))
    dem = make_dem(grid)
    for _ in range(1000):
        e = rng.uniform(0.5, 15.5)
        n = rng.uniform(0.5, 15.5)
        value = sample_elevation(dem, e, n)
        c0 = min(int(e - 0.5), 14)
        r0 = min(int(16 - n - 0.5), 14)
        corners = grid[r0:r0 + 2, c0:c0 + 2]
        assert corners.min() - 1e-12 <= value <= corners.max() + 1e-12


def test_out_of_bounds():
    dem = flat_dem(4, 4)
    with pytest.raises(OutOfBoundsError):
        sample_elevation(dem, -0.5, 2.0)


def test_nodata_fallback_and_error():
    grid = np.array([[1.0, -9999.0], [3.0, 4.0]])
    dem = make_dem(grid, nodata=-9999.0)
    # Query near the nodata corner: falls back to nearest valid neighbor.
    value = sample_elevation(dem, 1.4, 1.6)
    assert value in (1.0, 3.0, 4.0)
    all_bad = np.full((2, 2), -9999.0)
    all_bad[0, 0] = 5.0  # keep the DEM loadable
    dem2 = make_dem(all_bad, nodata=-9999.0)
    # Bottom-right corner has its 2x2 neighborhood... still includes (0,0).
    grid3 = np.array([[5.0, -9999.0, -9999.0],
                      [-9999.0, -9999.0, -9999.0],
                      [-9999.0, -9999.0, -9999.0]])
    dem3 = make_dem(grid3, nodata=-9999.0)
    with pytest.raises(NodataNeighborhoodError):
        sample_elevation(dem3, 2.4, 0.4)


def test_all_nodata_dem_rejected():
    with pytest.raises(AllNodataError):
        make_dem(np.full((3, 3), -9999.0), nodata=-9999.0)


# ---------------------------------------------------------------------------
# ASCII grid codec
# ---------------------------------------------------------------------------

ASCII_FIXTURE = """\
ncols 4
nrows 3
xllcorner 10.0
yllcorner 20.0
cellsize 1.0
NODATA_value -9999
1 2 3 4
5 6 7 8
9 10 11 -9999
"""


def test_ascii_grid_decode():
    transform, grid, nodata = parse_ascii_grid(ASCII_FIXTURE)
    assert (transform.rows, transform.cols) == (3, 4)
    assert transform.origin_easting == 10.0
    assert transform.origin_northing == 23.0  # yllcorner + nrows * cellsize
    assert nodata == -9999.0
    assert grid[0, 0] == 1.0 and grid[2, 2] == 11.0


def test_ascii_grid_roundtrip(tmp_path):
    transform, grid, nodata = parse_ascii_grid(ASCII_FIXTURE)
    text = format_ascii_grid(transform, grid, nodata)
    transform2, grid2, nodata2 = parse_ascii_grid(text)
    assert transform2 == transform
    assert np.array_equal(grid2, grid)
    assert nodata2 == nodata


def test_load_dem_ascii(tmp_path):
    path = tmp_path / "dem.asc"
    path.write_text(ASCII_FIXTURE)
    dem = load_dem(path)
    assert dem.elevations.shape == (3, 4)
    assert dem.nodata_mask[2, 3]


def test_ascii_grid_error_cases():
    with pytest.raises(RasterFormatError, match="missing ASCII grid header"):
        parse_ascii_grid("ncols 4\nnrows 3\n1 2 3\n")
    with pytest.raises(RasterFormatError, match="expected 12 cell values"):
        parse_ascii_grid("ncols 4\nnrows 3\nxllcorner 0\nyllcorner 0\n"
                         "cellsize 1\n1 2 3\n")


def test_load_dem_missing_file(tmp_path):
    with pytest.raises(RasterFormatError, match="no such file"):
        load_dem(tmp_path / "absent.asc")


# ---------------------------------------------------------------------------
# GeoTIFF codec (independent byte-level fixture as the oracle)
# ---------------------------------------------------------------------------

def _craft_geotiff(grid: np.ndarray, origin_e: float, origin_n: float,
                   pixel: float, nodata=None) -> bytes:
    """Hand-rolled little-endian TIFF writer, independent of the library."""
    rows, cols = grid.shape
    pixels = grid.astype("<f4").tobytes()

    def entry(tag, ftype, count, value_bytes):
        return struct.pack("<HHI", tag, ftype, count) + value_bytes

    # Fixed layout: header (8) + ifd + doubles + ascii + pixels
    n_entries = 13 if nodata is not None else 12
    ifd_bytes = 2 + n_entries * 12 + 4
    scale_off = 8 + ifd_bytes
    tie_off = scale_off + 24
    nodata_text = b""
    nodata_off = tie_off + 48
    if nodata is not None:
        nodata_text = str(nodata).encode() + b"\x00"
    strip_off = nodata_off + len(nodata_text)
    if strip_off % 2:
        strip_off += 1

    entries = [
        entry(256, 4, 1, struct.pack("<I", cols)),
        entry(257, 4, 1, struct.pack("<I", rows)),
        entry(258, 3, 1, struct.pack("<HH", 32, 0)),
        entry(259, 3, 1, struct.pack("<HH", 1, 0)),
        entry(262, 3, 1, struct.pack("<HH", 1, 0)),
        entry(273, 4, 1, struct.pack("<I", strip_off)),
        entry(277, 3, 1, struct.pack("<HH", 1, 0)),
        entry(278, 4, 1, struct.pack("<I", rows)),
        entry(279, 4, 1, struct.pack("<I", len(pixels))),
        entry(339, 3, 1, struct.pack("<HH", 3, 0)),
        entry(33550, 12, 3, struct.pack("<I", scale_off)),
        entry(33922, 12, 6, struct.pack("<I", tie_off)),
    ]
    if nodata is not None:
        entries.append(entry(42113, 2, len(nodata_text),
                             struct.pack("<I", nodata_off)))
    entries.sort(key=lambda e: struct.unpack("<H", e[:2])[0])

    blob = bytearray()
    blob += b"II" + struct.pack("<HI", 42, 8)
    blob += struct.pack("<H", len(entries))
    for e in entries:
        blob += e
    blob += struct.pack("<I", 0)
    assert len(blob) == scale_off
    blob += struct.pack("<ddd", pixel, pixel, 0.0)
    blob += struct.pack("<dddddd", 0.0, 0.0, 0.0, origin_e, origin_n, 0.0)
    blob += nodata_text
    while len(blob) < strip_off:
        blob += b"\x00"
    blob += pixels
    return bytes(blob)


def test_geotiff_fixture_decodes_to_written_values(tmp_path):
    rng = np.random.default_rng(5)
    grid = rng.uniform(-100.0, 100.0, (5, 7)).astype(np.float32)
    path = tmp_path / "fixture.tif"
    path.write_bytes(_craft_geotiff(grid, origin_e=500.0, origin_n=800.0,
                                    pixel=0.3, nodata=-9999))
    dem = load_dem(path)
    t = dem.transform
    assert (t.rows, t.cols) == (5, 7)
    assert t.origin_easting == 500.0
    assert t.origin_northing == 800.0
    assert t.pixel_size_m == pytest.approx(0.3)
    assert dem.nodata == -9999.0
    #

    for r, c in [(0, 0), (0, 6), (4, 0), (4, 6), (2, 3)]:
        assert dem.elevations[r, c] == pytest.approx(float(grid[r, c]))


def test_geotiff_rejects_nonsquare(tmp_path):
    grid = np.zeros((2, 2), dtype=np.float32)
    blob = bytearray(_craft_geotiff(grid, 0.0, 10.0, 1.0))
    # Patch the y pixel scale double to a different value.
    idx = blob.find(struct.pack("<ddd", 1.0, 1.0, 0.0))
    blob[idx:idx + 24] = struct.pack("<ddd", 1.0, 2.0, 0.0)
    path = tmp_path / "bad.tif"
    path.write_bytes(bytes(blob))
    with pytest.raises(RasterFormatError, match="non-square"):
        load_dem(path)


def test_geotiff_visibility_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    for trial in range(5):
        cells = rng.choice([VISIBLE, HIDDEN, VIS_NODATA], size=(9, 11),
                           p=[0.5, 0.4, 0.1]).astype(np.uint8)
        t = GeoTransform(origin_easting=-3.0, origin_northing=44.0,
                         pixel_size_m=0.5, rows=9, cols=11)
        vs = VisibilityRaster(transform=t, cells=cells, provenance="trial")
        path = tmp_path / f"vis{trial}.tif"
        write_visibility(vs, path, format=GEOTIFF)
        loaded = read_visibility(path)
        assert loaded.transform == t
        assert np.array_equal(loaded.cells, cells)


def test_ascii_visibility_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    for trial in range(5):
        cells = rng.choice([VISIBLE, HIDDEN, VIS_NODATA], size=(6, 5),
                           p=[0.5, 0.4, 0.1]).astype(np.uint8)
        t = GeoTransform(origin_easting=2.0, origin_northing=8.0,
                         pixel_size_m=1.0, rows=6, cols=5)
        vs = VisibilityRaster(transform=t, cells=cells)
        path = tmp_path / f"vis{trial}.asc"
        write_visibility(vs, path, format=ASCII_GRID)
        loaded = read_visibility(path)
        assert loaded.transform == t
        assert np.array_equal(loaded.cells, cells)


def test_all_visible_ascii_body(tmp_path):
    t = GeoTransform(origin_easting=0.0, origin_northing=2.0,
                     pixel_size_m=1.0, rows=2, cols=2)
    vs = VisibilityRaster(transform=t, cells=np.ones((2, 2), dtype=np.uint8))
    path = tmp_path / "v.asc"
    write_visibility(vs, path, format=ASCII_GRID)
    body = path.read_text().splitlines()[-2:]
    assert body == ["1 1", "1 1"]
    hidden = VisibilityRaster(transform=t, cells=np.zeros((2, 2), dtype=np.uint8))
    write_visibility(hidden, path, format=ASCII_GRID)
    assert path.read_text().splitlines()[-2:] == ["0 0", "0 0"]


# ---------------------------------------------------------------------------
# Polygonize
# ---------------------------------------------------------------------------

def _shoelace(ring):
    total = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        total += x0 * y1 - x1 * y0
    return total / 2.0


def _collection_area(collection):
    total = 0.0
    for feature in collection["features"]:
        for ring in feature["geometry"]["coordinates"]:
            total += _shoelace(ring)
    return total


def test_single_cell_polygon():
    t = GeoTransform(origin_easting=0.0, origin_northing=10.0,
                     pixel_size_m=1.0, rows=4, cols=4)
    cells = np.zeros((4, 4), dtype=np.uint8)
    cells[0, 0] = VISIBLE
    collection = polygonize(VisibilityRaster(transform=t, cells=cells))
    assert len(collection["features"]) == 1
    rings = collection["features"][0]["geometry"]["coordinates"]
    assert len(rings) == 1
    assert _shoelace(rings[0]) == pytest.approx(1.0)
    assert rings[0][0] == rings[0][-1]
    corners = {tuple(p) for p in rings[0]}
    assert corners == {(0.0, 10.0), (1.0, 10.0), (1.0, 9.0), (0.0, 9.0)}


def test_empty_raster_gives_empty_collection():
    t = GeoTransform(origin_easting=0.0, origin_northing=4.0,
                     pixel_size_m=1.0, rows=4, cols=4)
    collection = polygonize(VisibilityRaster(
        transform=t, cells=np.zeros((4, 4), dtype=np.uint8)))
    assert collection["type"] == "FeatureCollection"
    assert collection["features"] == []
    assert "crs_note" in collection


def test_polygon_with_hole():
    t = GeoTransform(origin_easting=0.0, origin_northing=5.0,
                     pixel_size_m=1.0, rows=5, cols=5)
    cells = np.ones((5, 5), dtype=np.uint8)
    cells[2, 2] = HIDDEN
    collection = polygonize(VisibilityRaster(transform=t, cells=cells))
    assert len(collection["features"]) == 1
    rings = collection["features"][0]["geometry"]["coordinates"]
    assert len(rings) == 2
    assert _shoelace(rings[0]) == pytest.approx(25.0)   # exterior, CCW
    assert _shoelace(rings[1]) == pytest.approx(-1.0)   # hole, CW
    assert _collection_area(collection) == pytest.approx(24.0)


def test_area_conservation_on_random_blobs():
    rng = np.random.default_rng(17)
    for trial in range(20):
        rows = int(rng.integers(3, 24))
        cols = int(rng.integers(3, 24))
        px = float(rng.choice([0.3, 0.5, 1.0, 2.0]))
        cells = (rng.random((rows, cols)) < rng.uniform(0.2, 0.8))
        t = GeoTransform(origin_easting=float(rng.uniform(-100, 100)),
                         origin_northing=float(rng.uniform(-100, 100)),
                         pixel_size_m=px, rows=rows, cols=cols)
        vs = VisibilityRaster(transform=t,
                              cells=cells.astype(np.uint8))
        collection = polygonize(vs)
        expected = cells.sum() * px * px
        if expected == 0:
            assert collection["features"] == []
            continue
        assert _collection_area(collection) == pytest.approx(
            expected, rel=1e-6)
        # Per-feature area must match its reported cell count too.
        for feature in collection["features"]:
            props = feature["properties"]
            assert props["area_m2"] == pytest.approx(
                props["cell_count"] * px * px, rel=1e-9)


def test_geojson_structure_is_serializable(tmp_path):
    t = GeoTransform(origin_easting=0.0, origin_northing=3.0,
                     pixel_size_m=1.0, rows=3, cols=3)
    cells = np.zeros((3, 3), dtype=np.uint8)
    cells[1, 1] = VISIBLE
    collection = polygonize(VisibilityRaster(transform=t, cells=cells,
                                             provenance="unit"))
    text = json.dumps(collection)
    assert json.loads(text)["features"][0]["geometry"]["type"] == "Polygon"
