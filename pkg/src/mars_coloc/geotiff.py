"""Minimal single-band GeoTIFF codec (uncompressed, strip-based).

Covers exactly what the rest of the package needs: north-up, square-pixel,
one-band rasters of uint8/float32/float64 with the ModelPixelScale and
ModelTiepoint geo tags plus the GDAL nodata convention. Anything fancier
(compression, tiles, rotation, multiple bands) is rejected with a clear
error rather than guessed at.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import RasterFormatError

_TAG_WIDTH = 256
_TAG_LENGTH = 257
_TAG_BITS = 258
_TAG_COMPRESSION = 259
_TAG_PHOTOMETRIC = 262
_TAG_STRIP_OFFSETS = 273
_TAG_SAMPLES_PER_PIXEL = 277
_TAG_ROWS_PER_STRIP = 278
_TAG_STRIP_COUNTS = 279
_TAG_PLANAR = 284
_TAG_SAMPLE_FORMAT = 339
_TAG_MODEL_PIXEL_SCALE = 33550
_TAG_MODEL_TIEPOINT = 33922
_TAG_MODEL_TRANSFORMATION = 34264
_TAG_GEO_KEYS = 34735
_TAG_GDAL_NODATA = 42113

_TYPE_BYTE = 1
_TYPE_ASCII = 2
_TYPE_SHORT = 3
_TYPE_LONG = 4
_TYPE_DOUBLE = 12

_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 11: 4, 12: 8}

_SAMPLE_UNSIGNED = 1
_SAMPLE_FLOAT = 3


def _dtype_for(bits: int, sample_format: int, little_endian: bool):
    order = "<" if little_endian else ">"
    if sample_format == _SAMPLE_UNSIGNED and bits == 8:
        return np.dtype(order + "u1")
    if sample_format == _SAMPLE_FLOAT and bits == 32:
        return np.dtype(order + "f4")
    if sample_format == _SAMPLE_FLOAT and bits == 64:
        return np.dtype(order + "f8")
    raise RasterFormatError(
        f"unsupported sample layout: {bits}-bit, format {sample_format}")


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------

def _read_ifd_values(data: bytes, entry: bytes, order: str):
    tag, ftype, count = struct.unpack(order + "HHI", entry[:8])
    size = _TYPE_SIZES.get(ftype)
    if size is None:
        return tag, None
    total = size * count
    if total <= 4:
        raw = entry[8:8 + total]
    else:
        offset, = struct.unpack(order + "I", entry[8:12])
        raw = data[offset:offset + total]
    if ftype == _TYPE_ASCII:
        return tag, raw.split(b"\x00", 1)[0].decode("ascii", errors="replace")
    fmt = {_TYPE_BYTE: "B", _TYPE_SHORT: "H", _TYPE_LONG: "I",
           _TYPE_DOUBLE: "d", 5: "II", 11: "f"}.get(ftype)
    if fmt is None:
        return tag, None
    values = struct.unpack(order + fmt * count, raw)
    return tag, list(values)


def read_geotiff(path: Union[str, Path]):
    """Decode a GeoTIFF into (GeoTransform, float array, nodata)."""
    from .raster import GeoTransform  # local import to avoid cycle

    data = Path(path).read_bytes()
    if len(data) < 8:
        raise RasterFormatError(f"{path}: truncated TIFF")
    if data[:2] == b"II":
        order = "<"
    elif data[:2] == b"MM":
        order = ">"
    else:
        raise RasterFormatError(f"{path}: not a TIFF file")
    magic, ifd_offset = struct.unpack(order + "HI", data[2:8])
    if magic != 42:
        raise RasterFormatError(f"{path}: bad TIFF magic {magic}")

    n_entries, = struct.unpack(order + "H", data[ifd_offset:ifd_offset + 2])
    tags: dict[int, object] = {}
    base = ifd_offset + 2
    for i in range(n_entries):
        entry = data[base + 12 * i: base + 12 * (i + 1)]
        tag, values = _read_ifd_values(data, entry, order)
        tags[tag] = values

    def one(tag: int, default=None):
        values = tags.get(tag)
        if values is None:
            return default
        return values[0] if isinstance(values, list) else values

    cols = int(one(_TAG_WIDTH, 0))
    rows = int(one(_TAG_LENGTH, 0))
    if rows <= 0 or cols <= 0:
        raise RasterFormatError(f"{path}: missing image dimensions")
    if int(one(_TAG_COMPRESSION, 1)) != 1:
        raise RasterFormatError(f"{path}: compressed TIFFs are not supported")
    if int(one(_TAG_SAMPLES_PER_PIXEL, 1)) != 1:
        raise RasterFormatError(f"{path}: only single-band rasters supported")
    bits = int(one(_TAG_BITS, 8))
    sample_format = int(one(_TAG_SAMPLE_FORMAT, _SAMPLE_UNSIGNED))
    dtype = _dtype_for(bits, sample_format, order == "<")

    offsets = tags.get(_TAG_STRIP_OFFSETS)
    counts = tags.get(_TAG_STRIP_COUNTS)
    if not offsets or not counts:
        raise RasterFormatError(f"{path}: missing strip layout")
    raw = b"".join(data[int(o):int(o) + int(c)] for o, c in zip(offsets, counts))
    expected = rows * cols * dtype.itemsize
    if len(raw) < expected:
        raise RasterFormatError(f"{path}: pixel data truncated "
                                f"({len(raw)} < {expected} bytes)")
    grid = np.frombuffer(raw[:expected], dtype=dtype).reshape(rows, cols)
    grid = grid.astype(np.float64)

    if _TAG_MODEL_TRANSFORMATION in tags:
        m = tags[_TAG_MODEL_TRANSFORMATION]
        if not isinstance(m, list) or len(m) < 16:
            raise RasterFormatError(f"{path}: malformed transformation matrix")
        if m[1] != 0.0 or m[4] != 0.0:
            raise RasterFormatError(f"{path}: rotated rasters are not supported")
        sx, sy = m[0], -m[5]
        origin_e, origin_n = m[3], m[7]
    else:
        scale = tags.get(_TAG_MODEL_PIXEL_SCALE)
        tie = tags.get(_TAG_MODEL_TIEPOINT)
        if not scale or not tie or len(scale) < 2 or len(tie) < 6:
            raise RasterFormatError(f"{path}: missing georeferencing tags")
        sx, sy = float(scale[0]), float(scale[1])
        # Tiepoint maps raster (I, J) to model (X, Y) at the pixel corner.
        origin_e = float(tie[3]) - float(tie[0]) * sx
        origin_n = float(tie[4]) + float(tie[1]) * sy
    if sx <= 0 or sy <= 0:
        raise RasterFormatError(f"{path}: non north-up raster (negative scale)")
    if abs(sx - sy) > 1e-9 * max(sx, sy):
        raise RasterFormatError(f"{path}: non-square pixels ({sx} x {sy})")

    nodata = None
    nodata_text = tags.get(_TAG_GDAL_NODATA)
    if isinstance(nodata_text, str) and nodata_text.strip():
        try:
            nodata = float(nodata_text.strip())
        except ValueError:
            raise RasterFormatError(
                f"{path}: unparsable nodata value {nodata_text!r}") from None

    transform = GeoTransform(origin_easting=origin_e, origin_northing=origin_n,
                             pixel_size_m=sx, rows=rows, cols=cols)
    return transform, grid, nodata


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def write_geotiff(path: Union[str, Path], transform, grid: np.ndarray,
                  nodata: Optional[float] = None) -> None:
    """Encode a single-band raster as an uncompressed little-endian GeoTIFF."""
    grid = np.asarray(grid)
    if grid.dtype == np.uint8:
        bits, sample_format = 8, _SAMPLE_UNSIGNED
        payload = grid.astype("<u1")
    elif grid.dtype == np.float32:
        bits, sample_format = 32, _SAMPLE_FLOAT
        payload = grid.astype("<f4")
    else:
        bits, sample_format = 64, _SAMPLE_FLOAT
        payload = grid.astype("<f8")
    rows, cols = grid.shape
    pixel_bytes = payload.tobytes()

    entries = []  # (tag, type, count, packed values or None for inline int)
    extra: list[bytes] = []

    def add(tag: int, ftype: int, values) -> None:
        entries.append((tag, ftype, values))

    add(_TAG_WIDTH, _TYPE_LONG, [cols])
    add(_TAG_LENGTH, _TYPE_LONG, [rows])
    add(_TAG_BITS, _TYPE_SHORT, [bits])
    add(_TAG_COMPRESSION, _TYPE_SHORT, [1])
    add(_TAG_PHOTOMETRIC, _TYPE_SHORT, [1])
    add(_TAG_STRIP_OFFSETS, _TYPE_LONG, ["STRIP"])  # patched below
    add(_TAG_SAMPLES_PER_PIXEL, _TYPE_SHORT, [1])
    add(_TAG_ROWS_PER_STRIP, _TYPE_LONG, [rows])
    add(_TAG_STRIP_COUNTS, _TYPE_LONG, [len(pixel_bytes)])
    add(_TAG_PLANAR, _TYPE_SHORT, [1])
    add(_TAG_SAMPLE_FORMAT, _TYPE_SHORT, [sample_format])
    add(_TAG_MODEL_PIXEL_SCALE, _TYPE_DOUBLE,
        [transform.pixel_size_m, transform.pixel_size_m, 0.0])
    add(_TAG_MODEL_TIEPOINT, _TYPE_DOUBLE,
        [0.0, 0.0, 0.0, transform.origin_easting, transform.origin_northing, 0.0])
    # Minimal key directory: projected model, pixel-is-area raster convention.
    add(_TAG_GEO_KEYS, _TYPE_SHORT,
        [1, 1, 0, 2, 1024, 0, 1, 1, 1025, 0, 1, 1])
    if nodata is not None:
        text = (f"{int(nodata)}" if float(nodata).is_integer()
                else repr(float(nodata)))
        add(_TAG_GDAL_NODATA, _TYPE_ASCII, text.encode("ascii") + b"\x00")

    entries.sort(key=lambda item: item[0])
    header_size = 8
    ifd_size = 2 + 12 * len(entries) + 4
    extra_offset = header_size + ifd_size

    packed_entries = []
    for tag, ftype, values in entries:
        if values == ["STRIP"]:
            values = [extra_offset]  # placeholder; fixed after sizing extras
            packed_entries.append([tag, ftype, 1, None])
            continue
        if ftype == _TYPE_ASCII:
            raw = values
            count = len(raw)
        else:
            fmt = {_TYPE_SHORT: "H", _TYPE_LONG: "I", _TYPE_DOUBLE: "d"}[ftype]
            count = len(values)
            raw = struct.pack("<" + fmt * count, *values)
        if len(raw) <= 4:
            packed_entries.append([tag, ftype, count, raw.ljust(4, b"\x00")])
        else:
            packed_entries.append([tag, ftype, count, ("EXTRA", len(extra), raw)])
            extra.append(raw)

    # Lay out: header, IFD, out-of-line values, pixel strip.
    extra_offsets = []
    cursor = extra_offset
    for raw in extra:
        if cursor % 2:
            cursor += 1
        extra_offsets.append(cursor)
        cursor += len(raw)
    if cursor % 2:
        cursor += 1
    strip_offset = cursor

    out = bytearray()
    out += b"II" + struct.pack("<HI", 42, header_size)
    out += struct.pack("<H", len(packed_entries))
    for tag, ftype, count, raw in packed_entries:
        if raw is None:  # strip offsets entry
            out += struct.pack("<HHI", tag, ftype, count)
            out += struct.pack("<I", strip_offset)
        elif isinstance(raw, tuple):
            out += struct.pack("<HHI", tag, ftype, count)
            out += struct.pack("<I", extra_offsets[raw[1]])
        else:
            out += struct.pack("<HHI", tag, ftype, count)
            out += raw
    out += struct.pack("<I", 0)  # no next IFD
    for raw, offset in zip(extra, extra_offsets):
        if len(out) % 2:
            out += b"\x00"
        assert len(out) == offset
        out += raw
    if len(out) % 2:
        out += b"\x00"
    assert len(out) == strip_offset
    out += pixel_bytes
    Path(path).write_bytes(bytes(out))
