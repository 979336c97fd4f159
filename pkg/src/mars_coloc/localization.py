"""PLACES localization tables: CSV ingestion and (site, drive) -> pose lookup."""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import DuplicateKeyError, MissingColumnError, PoseNotFoundError, TableError
from .labels import RmcIndex

EXACT = "exact"
NEAREST_PRECEDING = "nearest_preceding"


@dataclass(frozen=True)
class CsvSchema:
    """Column-name mapping from one mission's PLACES CSV to logical fields."""

    site: str = "site"
    drive: str = "drive"
    easting: str = "easting"
    northing: str = "northing"
    elevation: Optional[str] = "elevation"
    header_required: bool = True

    def __post_init__(self):
        required = [self.site, self.drive, self.easting, self.northing]
        names = required + ([self.elevation] if self.elevation else [])
        if len(set(names)) != len(names):
            raise ValueError(f"schema column names must be unique: {names}")


# Shipped defaults for the two missions' localization products. The upstream
# column names are not fixed by any public contract, so both are plain
# configuration overridable from the pipeline config file.
MSL_LOCALIZED_INTERP = CsvSchema()
M2020_BEST_INTERP = CsvSchema()

BUILTIN_SCHEMAS: dict[str, CsvSchema] = {
    "msl_localized_interp": MSL_LOCALIZED_INTERP,
    "m2020_best_interp": M2020_BEST_INTERP,
}


@dataclass(frozen=True)
class RoverPose:
    """Map-frame rover position resolved for one RMC query.

    ``rmc`` echoes the key actually matched; poses re-read from an exported
    viewpoint CSV carry no RMC.
    """

    easting: float
    northing: float
    rmc: Optional[RmcIndex] = None
    elevation: Optional[float] = None
    approximate: bool = False
    warnings: tuple = ()

    def __post_init__(self):
        if not (math.isfinite(self.easting) and math.isfinite(self.northing)):
            raise ValueError("pose coordinates must be finite")


@dataclass
class LocalizationTable:
    """Immutable-after-load in-memory index over a PLACES CSV."""

    rows: dict[tuple[int, int], tuple]  # (site, drive) -> (e, n, elev|None)
    source_name: str
    drives_by_site: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        by_site: dict[int, list[int]] = {}
        for site, drive in self.rows:
            by_site.setdefault(site, []).append(drive)
        for drives in by_site.values():
            drives.sort()
        self.drives_by_site = by_site

    def __len__(self) -> int:
        return len(self.rows)


def load_table(csv_text: str, schema: CsvSchema,
               source_name: str = "<csv>") -> LocalizationTable:
    """Parse a PLACES-style CSV into a keyed localization table.

    Rows with unparsable numerics are rejected with their 1-based data-row
    number; a duplicate (site, drive) key or an empty table is an error.
    """
    reader = csv.DictReader(io.StringIO(csv_text))
    if reader.fieldnames is None:
        raise TableError(f"{source_name}: empty input")
    header = [name.strip() for name in reader.fieldnames]
    needed = [schema.site, schema.drive, schema.easting, schema.northing]
    for column in needed:
        if column not in header:
            raise MissingColumnError(
                f"{source_name}: column {column!r} not in header {header}")
    have_elev = schema.elevation is not None and schema.elevation in header

    rows: dict[tuple[int, int], tuple] = {}
    for number, raw in enumerate(reader, start=1):
        record = {(k or "").strip(): (v or "").strip() for k, v in raw.items()}
        try:
            site = int(record[schema.site])
            drive = int(record[schema.drive])
            easting = float(record[schema.easting])
            northing = float(record[schema.northing])
            elevation = float(record[schema.elevation]) if have_elev and record.get(schema.elevation) else None
        except (ValueError, KeyError) as exc:
            raise TableError(f"{source_name}: bad numeric value in data row "
                             f"{number}: {exc}") from exc
        if not (math.isfinite(easting) and math.isfinite(northing)):
            raise TableError(f"{source_name}: non-finite coordinates in data "
                             f"row {number}")
        key = (site, drive)
        if key in rows:
            raise DuplicateKeyError(f"{source_name}: duplicate (site, drive) "
                                    f"key {key} at data row {number}")
        rows[key] = (easting, northing, elevation)
    if not rows:
        raise TableError(f"{source_name}: table has no data rows")
    return LocalizationTable(rows=rows, source_name=source_name)


def load_table_file(path, schema: CsvSchema) -> LocalizationTable:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return load_table(handle.read(), schema, source_name=str(path))


def lookup_pose(table: LocalizationTable, rmc: RmcIndex,
                fallback: str = EXACT) -> RoverPose:
    """Resolve an RMC to a pose.

    ``exact`` requires the precise (site, drive) row. ``nearest_preceding``
    accepts the greatest drive <= the query within the same site and flags
    the pose as approximate. Misses raise so callers never silently
    co-locate against the wrong stop.
    """
    if fallback not in (EXACT, NEAREST_PRECEDING):
        raise ValueError(f"unknown fallback mode {fallback!r}")
    warnings: list[str] = []
    if rmc.drive % 2 == 1:
        warnings.append(f"drive {rmc.drive} is odd: rover was moving during capture")

    key = (rmc.site, rmc.drive)
    matched = rmc
    approximate = False
    if key not in table.rows:
        if fallback == EXACT:
            raise PoseNotFoundError(
                f"no row for site {rmc.site}, drive {rmc.drive} in "
                f"{table.source_name}")
        drives = table.drives_by_site.get(rmc.site)
        if not drives:
            raise PoseNotFoundError(
                f"site {rmc.site} absent from {table.source_name}")
        idx = bisect.bisect_right(drives, rmc.drive) - 1
        if idx < 0:
            raise PoseNotFoundError(
                f"no drive <= {rmc.drive} for site {rmc.site} in "
                f"{table.source_name}")
        matched = RmcIndex(rmc.site, drives[idx])
        key = (matched.site, matched.drive)
        approximate = True
        warnings.append(f"nearest-preceding match: requested drive {rmc.drive}, "
                        f"matched drive {matched.drive}")
    easting, northing, elevation = table.rows[key]
    return RoverPose(easting=easting, northing=northing, rmc=matched,
                     elevation=elevation, approximate=approximate,
                     warnings=tuple(warnings))
