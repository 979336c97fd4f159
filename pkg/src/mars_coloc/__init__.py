"""Co-locate Mars rover mast-camera images with orbital maps.

The package parses PDS3/PDS4 image labels, resolves rover positions from
PLACES localization tables, converts mast pointing into absolute angular
bounds and computes terrain-occluded viewsheds over a DEM, with exports to
ESRI ASCII grid / GeoTIFF rasters, GeoJSON polygons and viewpoint CSVs.
"""

from .errors import MarsColocError
from .labels import (
    BUILTIN_PROFILES,
    CameraPointing,
    ExtractionProfile,
    ImageMetadata,
    RmcIndex,
    detect_format,
    extract_pds3,
    extract_pds4,
)
from .localization import (
    BUILTIN_SCHEMAS,
    CsvSchema,
    LocalizationTable,
    RoverPose,
    load_table,
    lookup_pose,
)
from .pointing import FovSector, Viewpoint, build_viewpoint, fov_bounds, normalize_azimuth
from .pvl import LabelTree, parse_pvl
from .raster import (
    Dem,
    GeoTransform,
    VisibilityRaster,
    load_dem,
    map_to_pixel,
    pixel_to_map,
    polygonize,
    sample_elevation,
    write_visibility,
)
from .viewshed import (
    OverlapReport,
    ViewshedParams,
    compute_viewshed,
    in_sector,
    line_of_sight,
    overlap,
)
from .pipeline import (
    ColocationResult,
    PipelineConfig,
    colocate,
    export_viewpoint_csv,
    read_viewpoint_csv,
)
from .fetch import fetch_product

__version__ = "0.1.0"

__all__ = [
    "MarsColocError",
    "BUILTIN_PROFILES",
    "CameraPointing",
    "ExtractionProfile",
    "ImageMetadata",
    "RmcIndex",
    "detect_format",
    "extract_pds3",
    "extract_pds4",
    "BUILTIN_SCHEMAS",
    "CsvSchema",
    "LocalizationTable",
    "RoverPose",
    "load_table",
    "lookup_pose",
    "FovSector",
    "Viewpoint",
    "build_viewpoint",
    "fov_bounds",
    "normalize_azimuth",
    "LabelTree",
    "parse_pvl",
    "Dem",
    "GeoTransform",
    "VisibilityRaster",
    "load_dem",
    "map_to_pixel",
    "pixel_to_map",
    "polygonize",
    "sample_elevation",
    "write_visibility",
    "OverlapReport",
    "ViewshedParams",
    "compute_viewshed",
    "in_sector",
    "line_of_sight",
    "overlap",
    "ColocationResult",
    "PipelineConfig",
    "colocate",
    "export_viewpoint_csv",
    "read_viewpoint_csv",
    "fetch_product",
    "__version__",
]
