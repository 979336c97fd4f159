"""Image-label metadata extraction for Curiosity (PDS3) and Perseverance (PDS4).

Each mission ships an :class:`ExtractionProfile` naming where in the label the
logical fields live. Profiles are configuration: users may override any path
via the pipeline config file, which is how additional missions are supported.
"""

from __future__ import annotations

import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .errors import (
    LabelError,
    MissingFieldError,
    UnitMismatchError,
    UnrecognizedFormatError,
)
from .pvl import LabelTree, Scalar, Sequence, parse_pvl

PDS3_PVL = "pds3_pvl"
PDS4_XML = "pds4_xml"

# Rule prefix selecting rover-motion-counter alignment instead of a direct path.
_RMC_RULE = "rmc:"


@dataclass(frozen=True)
class RmcIndex:
    """Rover Motion Counter (SITE, DRIVE) pair identifying one rover stop."""

    site: int
    drive: int

    def __post_init__(self):
        if self.site < 0 or self.drive < 0:
            raise ValueError(f"RMC indices must be non-negative, got {self}")

    @property
    def stationary(self) -> bool:
        # Even drive: image taken while parked; odd: rover in motion.
        return self.drive % 2 == 0


@dataclass(frozen=True)
class CameraPointing:
    """Mast pointing plus rectangular field of view, all in degrees.

    Azimuth is clockwise-positive with 0 at north and is normalized to
    [0, 360) on construction; elevation is 0 at the horizon, positive up.
    """

    azimuth_deg: float
    elevation_deg: float
    hfov_deg: float
    vfov_deg: float

    def __post_init__(self):
        for name in ("azimuth_deg", "elevation_deg", "hfov_deg", "vfov_deg"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "azimuth_deg", self.azimuth_deg % 360.0)
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise ValueError(f"elevation_deg out of [-90, 90]: {self.elevation_deg}")
        if not 0.0 < self.hfov_deg <= 360.0:
            raise ValueError(f"hfov_deg out of (0, 360]: {self.hfov_deg}")
        if not 0.0 < self.vfov_deg <= 180.0:
            raise ValueError(f"vfov_deg out of (0, 180]: {self.vfov_deg}")


@dataclass(frozen=True)
class ImageMetadata:
    """Per-image bundle consumed by the localization and geometry stages."""

    product_id: str
    mission: str
    rmc: RmcIndex
    pointing: CameraPointing
    frame: Optional[str] = None

    def __post_init__(self):
        if not self.product_id:
            raise ValueError("product_id must be non-empty")


@dataclass(frozen=True)
class ExtractionProfile:
    """Lookup paths for every logical field of one mission's labels.

    PDS3 paths are dotted PVL keyword paths; PDS4 paths are ElementTree
    find() expressions using the prefixes in ``namespaces``. The special rule
    ``rmc:SITE`` / ``rmc:DRIVE`` selects rover-motion-counter alignment:
    name/value sequence pairing for PDS3, Coordinate_Space_Index scanning for
    PDS4.
    """

    mission: str
    label_format: str
    site: str
    drive: str
    azimuth_deg: str
    elevation_deg: str
    hfov_deg: str
    vfov_deg: str
    product_id: str
    angle_unit: str = "deg"
    rmc_names: Optional[str] = None   # PDS3 name-sequence path
    rmc_values: Optional[str] = None  # PDS3 value-sequence path
    frame: Optional[str] = None
    namespaces: Mapping[str, str] = field(default_factory=dict)

    def replace(self, **overrides) -> "ExtractionProfile":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(overrides)
        return ExtractionProfile(**values)


CURIOSITY_PROFILE = ExtractionProfile(
    mission="curiosity",
    label_format=PDS3_PVL,
    site=_RMC_RULE + "SITE",
    drive=_RMC_RULE + "DRIVE",
    rmc_names="ROVER_MOTION_COUNTER_NAME",
    rmc_values="ROVER_MOTION_COUNTER",
    azimuth_deg="SITE_DERIVED_GEOMETRY_PARMS.FIXED_INSTRUMENT_AZIMUTH",
    elevation_deg="SITE_DERIVED_GEOMETRY_PARMS.FIXED_INSTRUMENT_ELEVATION",
    hfov_deg="INSTRUMENT_STATE_PARMS.HORIZONTAL_FOV",
    vfov_deg="INSTRUMENT_STATE_PARMS.VERTICAL_FOV",
    product_id="PRODUCT_ID",
)

PERSEVERANCE_PROFILE = ExtractionProfile(
    mission="perseverance",
    label_format=PDS4_XML,
    site=_RMC_RULE + "SITE",
    drive=_RMC_RULE + "DRIVE",
    azimuth_deg=".//geom:instrument_azimuth",
    elevation_deg=".//geom:instrument_elevation",
    hfov_deg=".//geom:horizontal_fov",
    vfov_deg=".//geom:vertical_fov",
    product_id=".//pds:logical_identifier",
    frame=".//geom:coordinate_space_frame_type",
    namespaces={
        "pds": "http://pds.nasa.gov/pds4/pds/v1",
        "geom": "http://pds.nasa.gov/pds4/geom/v1",
    },
)

BUILTIN_PROFILES: dict[str, ExtractionProfile] = {
    "curiosity": CURIOSITY_PROFILE,
    "perseverance": PERSEVERANCE_PROFILE,
}


# ---------------------------------------------------------------------------
# Format detection
# ---------------------------------------------------------------------------

_KEY_EQ_RE = re.compile(r"^\s*\^?[A-Za-z][A-Za-z0-9_:]*\s*=")


def detect_format(filename: str, head: bytes) -> str:
    """Classify a label file as PDS3 PVL text or PDS4 XML.

    ``head`` should hold at least the first 256 bytes of the file (or all of
    it when shorter).
    """
    if filename.lower().endswith(".xml"):
        return PDS4_XML
    text = head.decode("utf-8", errors="replace").lstrip("﻿ \t\r\n")
    if text.startswith("<?xml"):
        return PDS4_XML
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("/*"):
            continue
        if _KEY_EQ_RE.match(stripped):
            return PDS3_PVL
        break
    raise UnrecognizedFormatError(
        f"{filename}: neither a PDS3 PVL label nor a PDS4 XML label")


# ---------------------------------------------------------------------------
# PDS3 extraction
# ---------------------------------------------------------------------------

def _pvl_scalar(tree: LabelTree, path: str, fieldname: str) -> Scalar:
    entry = tree.get(path)
    if entry is None:
        raise MissingFieldError(fieldname, f"no keyword at path {path!r}")
    if not isinstance(entry, Scalar):
        raise LabelError(f"field {fieldname!r} at {path!r} is not a scalar value")
    return entry


def _pvl_angle(tree: LabelTree, path: str, fieldname: str, expected_unit: str) -> float:
    scalar = _pvl_scalar(tree, path, fieldname)
    if not isinstance(scalar.value, (int, float)) or isinstance(scalar.value, bool):
        raise LabelError(f"field {fieldname!r} at {path!r} is not numeric: "
                         f"{scalar.value!r}")
    if scalar.unit is not None and scalar.unit.lower() != expected_unit.lower():
        raise UnitMismatchError(
            f"field {fieldname!r} has unit {scalar.unit!r}, expected {expected_unit!r}")
    return float(scalar.value)


def extract_rmc_pds3(tree: LabelTree, profile: ExtractionProfile = CURIOSITY_PROFILE) -> RmcIndex:
    """Align the counter name/value sequences and pull SITE and DRIVE."""
    names_entry = tree.get(profile.rmc_names or "")
    values_entry = tree.get(profile.rmc_values or "")
    if not isinstance(names_entry, Sequence):
        raise MissingFieldError("site", f"no sequence at {profile.rmc_names!r}")
    if not isinstance(values_entry, Sequence):
        raise MissingFieldError("site", f"no sequence at {profile.rmc_values!r}")
    if len(names_entry.items) != len(values_entry.items):
        raise LabelError(
            f"counter name/value length mismatch: {len(names_entry.items)} names "
            f"vs {len(values_entry.items)} values")
    by_name: dict[str, int] = {}
    for name_scalar, value_scalar in zip(names_entry.items, values_entry.items):
        if not isinstance(name_scalar, Scalar) or not isinstance(value_scalar, Scalar):
            raise LabelError("counter sequences must contain scalar values")
        key = str(name_scalar.value).upper()
        if not isinstance(value_scalar.value, int):
            raise LabelError(f"counter value for {key} is not an integer: "
                             f"{value_scalar.value!r}")
        by_name[key] = value_scalar.value
    indices = {}
    for fieldname, rule in (("site", profile.site), ("drive", profile.drive)):
        counter = rule[len(_RMC_RULE):] if rule.startswith(_RMC_RULE) else rule
        if counter not in by_name:
            raise MissingFieldError(fieldname, f"counter {counter!r} not present")
        indices[fieldname] = by_name[counter]
    return RmcIndex(site=indices["site"], drive=indices["drive"])


def extract_pds3(tree: LabelTree, profile: ExtractionProfile = CURIOSITY_PROFILE) -> ImageMetadata:
    """Map a parsed PDS3 label to :class:`ImageMetadata` via ``profile``."""
    rmc = extract_rmc_pds3(tree, profile)
    pointing = CameraPointing(
        azimuth_deg=_pvl_angle(tree, profile.azimuth_deg, "azimuth_deg", profile.angle_unit),
        elevation_deg=_pvl_angle(tree, profile.elevation_deg, "elevation_deg", profile.angle_unit),
        hfov_deg=_pvl_angle(tree, profile.hfov_deg, "hfov_deg", profile.angle_unit),
        vfov_deg=_pvl_angle(tree, profile.vfov_deg, "vfov_deg", profile.angle_unit),
    )
    product = _pvl_scalar(tree, profile.product_id, "product_id")
    return ImageMetadata(
        product_id=str(product.value),
        mission=profile.mission,
        rmc=rmc,
        pointing=pointing,
    )


# ---------------------------------------------------------------------------
# PDS4 extraction
# ---------------------------------------------------------------------------

def _consistent(values: list, fieldname: str, path: str):
    if not values:
        raise MissingFieldError(fieldname, f"no element matches {path!r}")
    first = values[0]
    if any(v != first for v in values[1:]):
        raise LabelError(
            f"field {fieldname!r}: {len(values)} elements match {path!r} "
            f"with differing values")
    return first


def _xml_text(root: ET.Element, profile: ExtractionProfile, path: str,
              fieldname: str) -> str:
    found = [(el.text or "").strip()
             for el in root.iterfind(path, dict(profile.namespaces))]
    return _consistent(found, fieldname, path)


def _xml_angle(root: ET.Element, profile: ExtractionProfile, path: str,
               fieldname: str) -> float:
    elements = list(root.iterfind(path, dict(profile.namespaces)))
    if not elements:
        raise MissingFieldError(fieldname, f"no element matches {path!r}")
    values = []
    for el in elements:
        unit = el.get("unit")
        if unit is not None and unit.lower() != profile.angle_unit.lower():
            raise UnitMismatchError(
                f"field {fieldname!r} has unit {unit!r}, expected "
                f"{profile.angle_unit!r}")
        text = (el.text or "").strip()
        try:
            values.append(float(text))
        except ValueError:
            raise LabelError(f"field {fieldname!r} is not numeric: {text!r}") from None
    return _consistent(values, fieldname, path)


def _xml_rmc(root: ET.Element, profile: ExtractionProfile) -> RmcIndex:
    ns = dict(profile.namespaces)
    indices: dict[str, list[int]] = {}
    for entry in root.iterfind(".//geom:Coordinate_Space_Index", ns):
        id_el = entry.find("geom:index_id", ns)
        value_el = entry.find("geom:index_value_number", ns)
        if id_el is None:
            continue
        index_id = (id_el.text or "").strip().upper()
        if value_el is None:
            raise LabelError(f"index_id {index_id!r} lacks index_value_number")
        text = (value_el.text or "").strip()
        try:
            number = int(text)
        except ValueError:
            raise LabelError(
                f"index_value_number for {index_id!r} is not an integer: "
                f"{text!r}") from None
        indices.setdefault(index_id, []).append(number)
    resolved = {}
    for fieldname, rule in (("site", profile.site), ("drive", profile.drive)):
        counter = rule[len(_RMC_RULE):] if rule.startswith(_RMC_RULE) else rule
        values = indices.get(counter.upper(), [])
        resolved[fieldname] = _consistent(values, fieldname,
                                          f"Coordinate_Space_Index[{counter}]")
    return RmcIndex(site=resolved["site"], drive=resolved["drive"])


def extract_pds4(xml_text: str, profile: ExtractionProfile = PERSEVERANCE_PROFILE) -> ImageMetadata:
    """Map a PDS4 XML label document to :class:`ImageMetadata`."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise LabelError(f"malformed XML: {exc}") from exc
    rmc = _xml_rmc(root, profile)
    pointing = CameraPointing(
        azimuth_deg=_xml_angle(root, profile, profile.azimuth_deg, "azimuth_deg"),
        elevation_deg=_xml_angle(root, profile, profile.elevation_deg, "elevation_deg"),
        hfov_deg=_xml_angle(root, profile, profile.hfov_deg, "hfov_deg"),
        vfov_deg=_xml_angle(root, profile, profile.vfov_deg, "vfov_deg"),
    )
    product_id = _xml_text(root, profile, profile.product_id, "product_id")
    frame = None
    if profile.frame:
        try:
            frame = _xml_text(root, profile, profile.frame, "frame")
        except MissingFieldError:
            frame = None
    return ImageMetadata(
        product_id=product_id,
        mission=profile.mission,
        rmc=rmc,
        pointing=pointing,
        frame=frame,
    )


def extract_metadata(text: Union[str, bytes], fmt: str,
                     profile: ExtractionProfile) -> ImageMetadata:
    """Dispatch on detected label format."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    if fmt == PDS3_PVL:
        return extract_pds3(parse_pvl(text), profile)
    if fmt == PDS4_XML:
        return extract_pds4(text, profile)
    raise UnrecognizedFormatError(f"unknown label format {fmt!r}")
