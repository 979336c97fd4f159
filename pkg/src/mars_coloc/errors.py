"""Exception and warning types shared across the package."""

from __future__ import annotations


class MarsColocError(Exception):
    """Base class for all errors raised by this package."""


# --- label parsing / extraction ---------------------------------------------

class PvlSyntaxError(MarsColocError):
    """Malformed PVL text; carries 1-based line/column of the offence."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class LabelError(MarsColocError):
    """A structurally valid label that cannot be mapped to image metadata."""


class MissingFieldError(LabelError):
    """A required logical field could not be resolved in the label."""

    def __init__(self, field: str, detail: str = ""):
        msg = f"missing field '{field}'" + (f": {detail}" if detail else "")
        super().__init__(msg)
        self.field = field


class UnitMismatchError(LabelError):
    """A label value carries a unit other than the one the profile expects."""


class UnrecognizedFormatError(MarsColocError):
    """Input file is neither PDS3 PVL text nor a PDS4 XML label."""


# --- localization ------------------------------------------------------------

class TableError(MarsColocError):
    """Problems loading a localization CSV."""


class MissingColumnError(TableError):
    pass


class DuplicateKeyError(TableError):
    pass


class PoseNotFoundError(MarsColocError):
    """No localization row matches the queried (site, drive)."""


# --- geometry ----------------------------------------------------------------

class GeometryError(MarsColocError):
    """Invalid pointing or viewpoint parameters."""


# --- rasters -----------------------------------------------------------------

class RasterError(MarsColocError):
    """Base for raster decode/encode and sampling failures."""


class RasterFormatError(RasterError):
    pass


class AllNodataError(RasterError):
    pass


class OutOfBoundsError(RasterError):
    pass


class NodataNeighborhoodError(RasterError):
    """All four bilinear contributors around a sample point are nodata."""


class GridMismatchError(RasterError):
    """Two rasters are not on the same grid (pixel size / integer offset)."""


# --- viewshed ----------------------------------------------------------------

class NodataObserverError(MarsColocError):
    """The observer sits on a nodata DEM cell."""


class EmptySectorError(MarsColocError):
    """The requested sector has zero angular extent after clamping."""


# --- pipeline / fetch --------------------------------------------------------

class ConfigError(MarsColocError):
    pass


class EmptyInputError(MarsColocError):
    pass


class FetchError(MarsColocError):
    """HTTP-level failure while retrieving a product."""

    def __init__(self, message: str, url: str, status: int | None = None):
        super().__init__(message)
        self.url = url
        self.status = status


class ProductNotFoundError(FetchError):
    pass


# --- warnings ----------------------------------------------------------------

class MarsColocWarning(UserWarning):
    """Base class for non-fatal conditions worth surfacing to callers."""


class DuplicateKeywordWarning(MarsColocWarning):
    """A PVL keyword appeared more than once at the same nesting level."""


class ElevationClampWarning(MarsColocWarning):
    """A field-of-view elevation bound was clamped to the [-90, 90] range."""


class OddDriveWarning(MarsColocWarning):
    """An odd DRIVE index was queried (rover in motion during capture)."""


class ApproximatePoseWarning(MarsColocWarning):
    """Pose resolved by nearest-preceding fallback rather than exact match."""
