"""End-to-end orchestration: config handling, the label -> viewshed batch
pipeline, and viewpoint CSV import/export.

The viewpoint CSV is the hand-off format between the geometry stages and the
viewshed engine; its column set and 6-decimal fixed-point formatting are a
stable interface.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
import warnings as _warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from . import report
from .errors import ConfigError, EmptyInputError, MarsColocError
from .labels import (
    BUILTIN_PROFILES,
    ExtractionProfile,
    ImageMetadata,
    detect_format,
    extract_metadata,
)
from .localization import (
    BUILTIN_SCHEMAS,
    CsvSchema,
    LocalizationTable,
    load_table_file,
    lookup_pose,
)
from .pointing import FovSector, Viewpoint, build_viewpoint
from .raster import ASCII_GRID, GEOTIFF, Dem, load_dem, polygonize, write_geojson, write_visibility
from .localization import RoverPose
from .viewshed import MARS_RADIUS_M, OverlapReport, ViewshedParams, compute_viewshed, overlap

VIEWPOINT_CSV_HEADER = ("image_id,easting_m,northing_m,observer_height_m,"
                        "radius_m,azimuth_left_deg,azimuth_right_deg,"
                        "elevation_lower_deg,elevation_upper_deg")

_FORMAT_TOKENS = {"ascii": ASCII_GRID, "geotiff": GEOTIFF}
_FORMAT_SUFFIX = {ASCII_GRID: ".asc", GEOTIFF: ".tif"}

_MISSION_SCHEMAS = {
    "curiosity": "msl_localized_interp",
    "perseverance": "m2020_best_interp",
}

CACHE_ENV_VAR = "MARS_COLOC_CACHE"


@dataclass(frozen=True)
class PipelineConfig:
    """All run-scoped knobs; built-in defaults < config file < CLI flags."""

    mission: str = "curiosity"
    dem: Optional[str] = None
    places_csv: Optional[str] = None
    cache_dir: str = "~/.cache/mars-coloc"
    observer_height_m: float = 2.0
    radius_m: float = 1000.0
    mode: str = "exact"
    curvature: str = "off"
    planet_radius_m: float = MARS_RADIUS_M
    target_height_m: float = 0.0
    fallback: str = "exact"
    out_dir: str = "out"
    formats: tuple = ("ascii",)
    plot: bool = True
    schema_name: Optional[str] = None
    profile_overrides: dict = field(default_factory=dict)
    schema_overrides: dict = field(default_factory=dict)
    fetch_base_urls: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.observer_height_m < 0:
            raise ConfigError("observer_height_m must be >= 0")
        if self.radius_m <= 0:
            raise ConfigError("radius_m must be positive")
        for token in self.formats:
            if token not in _FORMAT_TOKENS:
                raise ConfigError(f"unknown output format {token!r} "
                                  f"(expected ascii or geotiff)")

    def profile(self) -> ExtractionProfile:
        base = BUILTIN_PROFILES.get(self.mission)
        overrides = self.profile_overrides.get(self.mission, {})
        if base is None:
            if not overrides:
                raise ConfigError(f"no extraction profile for mission "
                                  f"{self.mission!r}")
            return ExtractionProfile(mission=self.mission, **overrides)
        return base.replace(**overrides) if overrides else base

    def schema(self) -> CsvSchema:
        name = self.schema_name or _MISSION_SCHEMAS.get(self.mission)
        if name is None:
            raise ConfigError(f"no CSV schema known for mission {self.mission!r}")
        overrides = self.schema_overrides.get(name, {})
        base = BUILTIN_SCHEMAS.get(name)
        if base is None:
            if not overrides:
                raise ConfigError(f"unknown CSV schema {name!r}")
            return CsvSchema(**overrides)
        return replace(base, **overrides) if overrides else base

    def resolved_cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV_VAR)
        return Path(env or self.cache_dir).expanduser()


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[dict] = None) -> PipelineConfig:
    """Build a config from defaults, an optional JSON file and CLI overrides."""
    values: dict = {}
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a JSON object")
        known = set(PipelineConfig.__dataclass_fields__)
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if "formats" in values and not isinstance(values["formats"], tuple):
        values["formats"] = tuple(values["formats"])
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Viewpoint CSV
# ---------------------------------------------------------------------------

def export_viewpoint_csv(viewpoints: Sequence[Viewpoint],
                         path: Union[str, Path]) -> None:
    """Write viewpoints with the fixed header, 6-decimal numbers and LF EOLs."""
    if not viewpoints:
        raise EmptyInputError("no viewpoints to export")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(VIEWPOINT_CSV_HEADER.split(","))
    for vp in viewpoints:
        writer.writerow(format_viewpoint_row(vp))
    Path(path).write_text(buffer.getvalue(), encoding="utf-8", newline="")


def format_viewpoint_row(vp: Viewpoint) -> list:
    return [
        vp.image_id,
        f"{vp.pose.easting:.6f}",
        f"{vp.pose.northing:.6f}",
        f"{vp.observer_height_m:.6f}",
        f"{vp.radius_m:.6f}",
        f"{vp.sector.azimuth_left_deg:.6f}",
        f"{vp.sector.azimuth_right_deg:.6f}",
        f"{vp.sector.elevation_lower_deg:.6f}",
        f"{vp.sector.elevation_upper_deg:.6f}",
    ]


def read_viewpoint_csv(path: Union[str, Path]) -> list:
    """Parse a viewpoint CSV back into :class:`Viewpoint` records.

    A zero azimuth width (left == right mod 360) denotes a full-circle
    sector, matching how hFOV = 360 exports.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError(f"{path}: empty viewpoint CSV") from None
    expected = VIEWPOINT_CSV_HEADER.split(",")
    if [h.strip() for h in header] != expected:
        raise MarsColocError(f"{path}: unexpected viewpoint CSV header {header}")
    viewpoints = []
    for row_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(expected):
            raise MarsColocError(f"{path}: row {row_number} has {len(row)} "
                                 f"columns, expected {len(expected)}")
        image_id = row[0]
        try:
            (easting, northing, height, radius,
             left, right, elev_lo, elev_hi) = map(float, row[1:])
        except ValueError as exc:
            raise MarsColocError(f"{path}: row {row_number}: {exc}") from exc
        sector = FovSector(
            azimuth_left_deg=left,
            azimuth_right_deg=right,
            elevation_upper_deg=elev_hi,
            elevation_lower_deg=elev_lo,
            full_circle=((right - left) % 360.0 == 0.0),
        )
        viewpoints.append(Viewpoint(
            pose=RoverPose(easting=easting, northing=northing),
            sector=sector,
            observer_height_m=height,
            radius_m=radius,
            image_id=image_id,
        ))
    if not viewpoints:
        raise EmptyInputError(f"{path}: viewpoint CSV has no data rows")
    return viewpoints


# ---------------------------------------------------------------------------
# Co-location batch
# ---------------------------------------------------------------------------

@dataclass
class ColocationResult:
    """Outcome for one label in a batch; failures carry ``error`` instead of
    output paths."""

    image_id: str
    label_path: str
    viewpoint: Optional[Viewpoint] = None
    raster_paths: list = field(default_factory=list)
    geojson_path: Optional[str] = None
    figure_path: Optional[str] = None
    csv_row: Optional[list] = None
    warnings: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _safe_stem(image_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", image_id)


def build_viewpoint_for_label(label_path: Union[str, Path],
                              config: PipelineConfig,
                              table: LocalizationTable):
    """Label file -> (metadata, viewpoint, warnings). Raises on failure."""
    label_path = Path(label_path)
    collected: list[str] = []
    data = label_path.read_bytes()
    fmt = detect_format(label_path.name, data[:256])
    metadata: ImageMetadata = extract_metadata(data, fmt, config.profile())
    pose = lookup_pose(table, metadata.rmc, fallback=config.fallback)
    collected.extend(pose.warnings)
    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        viewpoint = build_viewpoint(
            pose=pose,
            pointing=metadata.pointing,
            observer_height_m=config.observer_height_m,
            radius_m=config.radius_m,
            image_id=metadata.product_id,
        )
    collected.extend(str(w.message) for w in caught)
    return metadata, viewpoint, collected


def colocate(config: PipelineConfig,
             label_paths: Sequence[Union[str, Path]]) -> list:
    """Run the full label -> viewshed pipeline over a batch.

    Per-label failures are isolated: they are reported in the corresponding
    result and do not disturb other labels' outputs. Config-level problems
    (missing DEM, unreadable table) abort.
    """
    if not label_paths:
        raise EmptyInputError("no label files given")
    if config.dem is None:
        raise ConfigError("no DEM configured (--dem or config 'dem')")
    if config.places_csv is None:
        raise ConfigError("no localization CSV configured (--places-csv)")
    dem = load_dem(config.dem)
    table = load_table_file(config.places_csv, config.schema())
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results: list[ColocationResult] = []
    for label_path in label_paths:
        label_path = Path(label_path)
        result = ColocationResult(image_id=label_path.stem,
                                  label_path=str(label_path))
        results.append(result)
        try:
            metadata, viewpoint, warn = build_viewpoint_for_label(
                label_path, config, table)
            result.image_id = metadata.product_id
            result.warnings.extend(warn)
            result.viewpoint = viewpoint
            params = ViewshedParams(
                viewpoint=viewpoint,
                mode=config.mode,
                target_height_m=config.target_height_m,
                curvature=config.curvature,
                planet_radius_m=config.planet_radius_m,
            )
            raster = compute_viewshed(dem, params)
            stem = _safe_stem(metadata.product_id)
            for token in config.formats:
                fmt = _FORMAT_TOKENS[token]
                raster_path = out_dir / f"{stem}_viewshed{_FORMAT_SUFFIX[fmt]}"
                write_visibility(raster, raster_path, format=fmt)
                result.raster_paths.append(str(raster_path))
            geojson_path = out_dir / f"{stem}_viewshed.geojson"
            write_geojson(polygonize(raster), geojson_path)
            result.geojson_path = str(geojson_path)
            if config.plot:
                figure_path = out_dir / f"{stem}_viewshed.png"
                report.render_viewshed_figure(dem, raster, viewpoint, figure_path)
                result.figure_path = str(figure_path)
            result.csv_row = format_viewpoint_row(viewpoint)
        except (MarsColocError, OSError, ValueError) as exc:
            result.error = f"{type(exc).__name__}: {exc}"

    succeeded = [r.viewpoint for r in results if r.ok and r.viewpoint]
    if succeeded:
        export_viewpoint_csv(succeeded, out_dir / "viewpoints.csv")
    return results


def overlap_report_from_files(path_a: Union[str, Path],
                              path_b: Union[str, Path]) -> OverlapReport:
    """Load two visibility rasters from disk and compute their overlap."""
    from .raster import read_visibility
    return overlap(read_visibility(path_a), read_visibility(path_b))
