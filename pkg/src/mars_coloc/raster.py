"""Georeferenced grid model: DEM ingestion, pixel/map transforms, elevation
sampling, visibility-raster output and polygonization.

All rasters are north-up with square pixels; the affine transform is held as
an origin (outer corner of pixel (0, 0)) plus pixel size. Northing decreases
as the row index increases. Two on-disk formats are supported: ESRI ASCII
grids (the fixture format) and single-band uncompressed GeoTIFF.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from . import geotiff
from .errors import (
    AllNodataError,
    GridMismatchError,
    NodataNeighborhoodError,
    OutOfBoundsError,
    RasterFormatError,
)

VISIBLE = 1
HIDDEN = 0
VIS_NODATA = 255

ASCII_GRID = "ascii_grid"
GEOTIFF = "geotiff"

_ASCII_EXTENSIONS = {".asc", ".agr", ".grd", ".txt"}
_TIFF_EXTENSIONS = {".tif", ".tiff"}


@dataclass(frozen=True)
class GeoTransform:
    """North-up, square-pixel affine between pixel and map coordinates.

    ``origin_easting``/``origin_northing`` locate the outer (north-west)
    corner of pixel (0, 0). Fractional pixel coordinates are corner-based:
    (col, row) = (0, 0) is that corner and cell (r, c) has its center at
    (c + 0.5, r + 0.5).
    """

    origin_easting: float
    origin_northing: float
    pixel_size_m: float
    rows: int
    cols: int

    def __post_init__(self):
        if self.pixel_size_m <= 0:
            raise RasterFormatError(f"pixel size must be > 0, got {self.pixel_size_m}")
        if self.rows <= 0 or self.cols <= 0:
            raise RasterFormatError(f"raster must be non-empty, got "
                                    f"{self.rows}x{self.cols}")


def map_to_pixel(t: GeoTransform, easting, northing):
    """Map coordinates -> fractional (col, row); out-of-bounds allowed."""
    col = (np.asarray(easting, dtype=float) - t.origin_easting) / t.pixel_size_m
    row = (t.origin_northing - np.asarray(northing, dtype=float)) / t.pixel_size_m
    if np.ndim(col) == 0:
        return float(col), float(row)
    return col, row


def pixel_to_map(t: GeoTransform, col, row):
    """Fractional (col, row) -> map coordinates; exact inverse of map_to_pixel."""
    easting = t.origin_easting + np.asarray(col, dtype=float) * t.pixel_size_m
    northing = t.origin_northing - np.asarray(row, dtype=float) * t.pixel_size_m
    if np.ndim(easting) == 0:
        return float(easting), float(northing)
    return easting, northing


def cell_center(t: GeoTransform, row, col):
    """Map coordinates of the center of cell (row, col)."""
    return pixel_to_map(t, np.asarray(col) + 0.5, np.asarray(row) + 0.5)


def contains_point(t: GeoTransform, easting: float, northing: float) -> bool:
    col, row = map_to_pixel(t, easting, northing)
    return 0.0 <= col <= t.cols and 0.0 <= row <= t.rows


def grid_aligned(a: GeoTransform, b: GeoTransform, tol: float = 1e-6) -> bool:
    """Same pixel size and an integer cell offset between origins."""
    if abs(a.pixel_size_m - b.pixel_size_m) > tol * a.pixel_size_m:
        return False
    doff_col = (b.origin_easting - a.origin_easting) / a.pixel_size_m
    doff_row = (a.origin_northing - b.origin_northing) / a.pixel_size_m
    return (abs(doff_col - round(doff_col)) <= tol
            and abs(doff_row - round(doff_row)) <= tol)


@dataclass
class Dem:
    """Elevation grid plus transform; nodata cells carried as a mask."""

    transform: GeoTransform
    elevations: np.ndarray
    nodata: Optional[float] = None
    nodata_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.elevations = np.asarray(self.elevations, dtype=np.float64)
        if self.elevations.shape != (self.transform.rows, self.transform.cols):
            raise RasterFormatError(
                f"grid shape {self.elevations.shape} does not match transform "
                f"{self.transform.rows}x{self.transform.cols}")
        mask = ~np.isfinite(self.elevations)
        if self.nodata is not None:
            mask |= self.elevations == self.nodata
        self.nodata_mask = mask
        if mask.all():
            raise AllNodataError("DEM contains no valid elevation cells")


@dataclass
class VisibilityRaster:
    """Per-cell visibility grid sharing (a window of) the DEM's georeference.

    Cell values: 1 visible, 0 hidden, 255 nodata.
    """

    transform: GeoTransform
    cells: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.uint8)
        if self.cells.shape != (self.transform.rows, self.transform.cols):
            raise RasterFormatError(
                f"cell grid {self.cells.shape} does not match transform "
                f"{self.transform.rows}x{self.transform.cols}")

    @property
    def visible_count(self) -> int:
        return int((self.cells == VISIBLE).sum())

    @property
    def visible_area_m2(self) -> float:
        return self.visible_count * self.transform.pixel_size_m ** 2


# ---------------------------------------------------------------------------
# Bilinear sampling
# ---------------------------------------------------------------------------

def bilinear_grid(values: np.ndarray, nodata_mask: Optional[np.ndarray],
                  cols_f: np.ndarray, rows_f: np.ndarray):
    """Vectorized bilinear interpolation between cell centers.

    ``cols_f``/``rows_f`` are corner-based fractional pixel coordinates.
    Points in the outer half-pixel margin are clamped (edge continuation).
    Returns (interpolated values, contaminated mask) where a sample is
    contaminated when any positive-weight contributor is nodata; pass
    ``nodata_mask=None`` for grids known to be fully valid (the mask is then
    returned as None).
    """
    rows, cols = values.shape
    u = np.clip(np.asarray(cols_f) - 0.5, 0.0, cols - 1.0)
    v = np.clip(np.asarray(rows_f) - 0.5, 0.0, rows - 1.0)
    # Keep fractional math in the caller's dtype (the sweep runs float32).
    c0f = np.minimum(np.floor(u), max(cols - 2, 0))
    r0f = np.minimum(np.floor(v), max(rows - 2, 0))
    c0 = c0f.astype(np.intp)
    r0 = r0f.astype(np.intp)
    c1 = np.minimum(c0 + 1, cols - 1)
    r1 = np.minimum(r0 + 1, rows - 1)
    fu = u - c0f
    fv = v - r0f

    w00 = (1.0 - fu) * (1.0 - fv)
    w01 = fu * (1.0 - fv)
    w10 = (1.0 - fu) * fv
    w11 = fu * fv

    if nodata_mask is None:
        out = (w00 * values[r0, c0] + w01 * values[r0, c1]
               + w10 * values[r1, c0] + w11 * values[r1, c1])
        return out, None

    safe = np.where(nodata_mask, 0.0, values)
    out = (w00 * safe[r0, c0] + w01 * safe[r0, c1]
           + w10 * safe[r1, c0] + w11 * safe[r1, c1])
    contaminated = ((w00 > 0) & nodata_mask[r0, c0]
                    | (w01 > 0) & nodata_mask[r0, c1]
                    | (w10 > 0) & nodata_mask[r1, c0]
                    | (w11 > 0) & nodata_mask[r1, c1])
    return out, contaminated


def sample_values(values: np.ndarray, nodata_mask: np.ndarray,
                  transform: GeoTransform, easting: float,
                  northing: float) -> float:
    """Bilinear sample of an arbitrary grid sharing the DEM georeference.

    If any of the four surrounding cells is nodata the sample falls back to
    the nearest non-nodata one of the four; when all four are nodata a
    :class:`NodataNeighborhoodError` is raised.
    """
    if not contains_point(transform, easting, northing):
        raise OutOfBoundsError(f"point ({easting}, {northing}) outside DEM extent")
    col_f, row_f = map_to_pixel(transform, easting, northing)
    rows, cols = values.shape
    u = min(max(col_f - 0.5, 0.0), cols - 1.0)
    v = min(max(row_f - 0.5, 0.0), rows - 1.0)
    c0 = min(int(u), max(cols - 2, 0))
    r0 = min(int(v), max(rows - 2, 0))
    c1 = min(c0 + 1, cols - 1)
    r1 = min(r0 + 1, rows - 1)
    corners = [(r0, c0), (r0, c1), (r1, c0), (r1, c1)]
    if any(nodata_mask[r, c] for r, c in corners):
        valid = [(r, c) for r, c in corners if not nodata_mask[r, c]]
        if not valid:
            raise NodataNeighborhoodError(
                f"all cells around ({easting}, {northing}) are nodata")
        # Nearest by center distance; ties resolved by (row, col) order.
        best = min(valid, key=lambda rc: ((rc[1] + 0.5 - col_f) ** 2
                                          + (rc[0] + 0.5 - row_f) ** 2, rc))
        return float(values[best])
    fu = u - c0
    fv = v - r0
    return float((1 - fu) * (1 - fv) * values[r0, c0]
                 + fu * (1 - fv) * values[r0, c1]
                 + (1 - fu) * fv * values[r1, c0] + fu * fv * values[r1, c1])


def sample_elevation(dem: Dem, easting: float, northing: float) -> float:
    """Bilinear elevation at a map point (see :func:`sample_values`)."""
    return sample_values(dem.elevations, dem.nodata_mask, dem.transform,
                         easting, northing)


# ---------------------------------------------------------------------------
# ESRI ASCII grid codec
# ---------------------------------------------------------------------------

def parse_ascii_grid(text: str, source: str = "<ascii>"):
    """Decode an ESRI ASCII grid into (GeoTransform, array, nodata)."""
    tokens = text.split()
    header: dict[str, float] = {}
    pos = 0
    keys = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize",
            "nodata_value"}
    while pos + 1 < len(tokens) and tokens[pos].lower() in keys:
        header[tokens[pos].lower()] = float(tokens[pos + 1])
        pos += 2
    for required in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if required not in header:
            raise RasterFormatError(f"{source}: missing ASCII grid header "
                                    f"key {required!r}")
    cols = int(header["ncols"])
    rows = int(header["nrows"])
    nodata = header.get("nodata_value")
    data = tokens[pos:]
    if len(data) != rows * cols:
        raise RasterFormatError(
            f"{source}: expected {rows * cols} cell values, found {len(data)}")
    try:
        values = np.array([float(v) for v in data], dtype=np.float64)
    except ValueError as exc:
        raise RasterFormatError(f"{source}: non-numeric cell value: {exc}") from exc
    grid = values.reshape(rows, cols)
    transform = GeoTransform(
        origin_easting=header["xllcorner"],
        origin_northing=header["yllcorner"] + rows * header["cellsize"],
        pixel_size_m=header["cellsize"],
        rows=rows,
        cols=cols,
    )
    return transform, grid, nodata


def format_ascii_grid(transform: GeoTransform, grid: np.ndarray,
                      nodata: Optional[float], integer: bool = False) -> str:
    """Encode a grid as deterministic ESRI ASCII text."""
    def fmt(x: float) -> str:
        if integer or float(x).is_integer():
            return str(int(x))
        return repr(float(x))

    yllcorner = transform.origin_northing - transform.rows * transform.pixel_size_m
    lines = [
        f"ncols {transform.cols}",
        f"nrows {transform.rows}",
        f"xllcorner {fmt(transform.origin_easting)}",
        f"yllcorner {fmt(yllcorner)}",
        f"cellsize {fmt(transform.pixel_size_m)}",
    ]
    if nodata is not None:
        lines.append(f"NODATA_value {fmt(nodata)}")
    for row in np.asarray(grid):
        lines.append(" ".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Load / store
# ---------------------------------------------------------------------------

def _looks_like_tiff(head: bytes) -> bool:
    return head[:4] in (b"II*\x00", b"MM\x00*")


def load_dem(path: Union[str, Path]) -> Dem:
    """Read a DEM from an ESRI ASCII grid or single-band GeoTIFF file."""
    path = Path(path)
    if not path.is_file():
        raise RasterFormatError(f"{path}: no such file")
    head = path.read_bytes()[:8]
    if path.suffix.lower() in _TIFF_EXTENSIONS or _looks_like_tiff(head):
        transform, grid, nodata = geotiff.read_geotiff(path)
    else:
        transform, grid, nodata = parse_ascii_grid(
            path.read_text(encoding="utf-8"), source=str(path))
    return Dem(transform=transform, elevations=grid, nodata=nodata)


def write_visibility(vs: VisibilityRaster, path: Union[str, Path],
                     format: str = ASCII_GRID) -> None:
    """Write a visibility raster; 1 visible, 0 hidden, 255 nodata."""
    path = Path(path)
    if format == ASCII_GRID:
        text = format_ascii_grid(vs.transform, vs.cells, VIS_NODATA, integer=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    elif format == GEOTIFF:
        geotiff.write_geotiff(path, vs.transform, vs.cells, nodata=VIS_NODATA)
    else:
        raise ValueError(f"unknown raster format {format!r}")


def read_visibility(path: Union[str, Path]) -> VisibilityRaster:
    """Load a visibility raster written by :func:`write_visibility`."""
    path = Path(path)
    if not path.is_file():
        raise RasterFormatError(f"{path}: no such file")
    head = path.read_bytes()[:8]
    if path.suffix.lower() in _TIFF_EXTENSIONS or _looks_like_tiff(head):
        transform, grid, _ = geotiff.read_geotiff(path)
    else:
        transform, grid, _ = parse_ascii_grid(
            path.read_text(encoding="utf-8"), source=str(path))
    cells = grid.astype(np.uint8)
    if not np.isin(cells, (VISIBLE, HIDDEN, VIS_NODATA)).all():
        raise RasterFormatError(f"{path}: values outside {{0, 1, 255}}")
    return VisibilityRaster(transform=transform, cells=cells,
                            provenance=f"loaded:{path.name}")


# ---------------------------------------------------------------------------
# Polygonization
# ---------------------------------------------------------------------------

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=int)

# Outgoing direction preference: sharpest left turn first, never reverse.
_LEFT_OF = {(0, 1): (-1, 0), (-1, 0): (0, -1), (0, -1): (1, 0), (1, 0): (0, 1)}
_RIGHT_OF = {v: k for k, v in _LEFT_OF.items()}


def _trace_rings(edges: set) -> list:
    """Stitch directed corner-to-corner edges into closed rings.

    Edges carry the region on their left, so exteriors come out
    counter-clockwise in map orientation and holes clockwise. At pinch
    corners the sharpest left turn is preferred, keeping rings simple.
    """
    outgoing: dict[tuple, list] = {}
    for start, end in edges:
        outgoing.setdefault(start, []).append(end)
    rings = []
    remaining = set(edges)
    while remaining:
        start, current = next(iter(remaining))
        remaining.discard((start, current))
        ring = [start, current]
        prev_dir = (current[0] - start[0], current[1] - start[1])
        while current != start:
            choices = [end for end in outgoing.get(current, ())
                       if (current, end) in remaining]
            if not choices:
                raise RuntimeError("open boundary ring (corrupt raster mask)")
            if len(choices) == 1:
                nxt = choices[0]
            else:
                for preferred in (_LEFT_OF[prev_dir], prev_dir, _RIGHT_OF[prev_dir]):
                    candidate = (current[0] + preferred[0], current[1] + preferred[1])
                    if candidate in choices:
                        nxt = candidate
                        break
                else:
                    nxt = choices[0]
            remaining.discard((current, nxt))
            ring.append(nxt)
            prev_dir = (nxt[0] - current[0], nxt[1] - current[1])
            current = nxt
        rings.append(ring)
    return rings


def _ring_to_coords(ring: list, t: GeoTransform) -> list:
    coords = []
    for i, j in ring:
        easting = t.origin_easting + j * t.pixel_size_m
        northing = t.origin_northing - i * t.pixel_size_m
        coords.append([easting, northing])
    return coords


def _signed_area(coords: list) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(coords, coords[1:]):
        total += x0 * y1 - x1 * y0
    return total / 2.0


def polygonize(vs: VisibilityRaster) -> dict:
    """Trace 4-connected visible regions into a GeoJSON FeatureCollection.

    Ring vertices follow cell edges in map coordinates; the signed areas of a
    polygon's rings sum to its visible-cell area exactly.
    """
    visible = vs.cells == VISIBLE
    labels, count = ndimage.label(visible, structure=_FOUR_CONNECTED)
    features = []
    for region in range(1, count + 1):
        mask = labels == region
        padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
        padded[1:-1, 1:-1] = mask
        edges = set()
        rs, cs = np.nonzero(mask)
        for r, c in zip(rs.tolist(), cs.tolist()):
            pr, pc = r + 1, c + 1
            if not padded[pr + 1, pc]:  # south neighbor outside
                edges.add(((r + 1, c), (r + 1, c + 1)))
            if not padded[pr, pc + 1]:  # east
                edges.add(((r + 1, c + 1), (r, c + 1)))
            if not padded[pr - 1, pc]:  # north
                edges.add(((r, c + 1), (r, c)))
            if not padded[pr, pc - 1]:  # west
                edges.add(((r, c), (r + 1, c)))
        rings = [_ring_to_coords(ring, vs.transform)
                 for ring in _trace_rings(edges)]
        rings.sort(key=lambda coords: -abs(_signed_area(coords)))
        area = sum(_signed_area(coords) for coords in rings)
        features.append({
            "type": "Feature",
            "properties": {
                "region_id": region,
                "cell_count": int(mask.sum()),
                "area_m2": area,
            },
            "geometry": {"type": "Polygon", "coordinates": rings},
        })
    collection = {
        "type": "FeatureCollection",
        "crs_note": ("coordinates are map-frame easting/northing in meters, "
                     "matching the source DEM georeference"),
        "features": features,
    }
    if vs.provenance:
        collection["provenance"] = vs.provenance
    return collection


def write_geojson(collection: dict, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(collection, indent=2, sort_keys=False) + "\n",
                          encoding="utf-8", newline="\n")
