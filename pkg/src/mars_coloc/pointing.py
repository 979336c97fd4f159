"""Absolute angular field-of-view bounds and viewpoint assembly.

Converts a mast pointing (azimuth/elevation plus rectangular FOV) into the
absolute sector the camera swept: azimuth bounds are the pointing +- half the
horizontal FOV (mod 360), elevation bounds the pointing +- half the vertical
FOV, clamped to [-90, 90].
"""

from __future__ import annotations

import math
import warnings as _warnings
from dataclasses import dataclass

from .errors import ElevationClampWarning, GeometryError
from .labels import CameraPointing
from .localization import RoverPose


def normalize_azimuth(deg: float) -> float:
    """Reduce an azimuth to [0, 360); rejects non-finite input."""
    if not math.isfinite(deg):
        raise GeometryError(f"azimuth must be finite, got {deg!r}")
    return deg % 360.0


@dataclass(frozen=True)
class FovSector:
    """Absolute angular bounds of a camera view.

    The horizontal extent is the clockwise arc from ``azimuth_left_deg`` to
    ``azimuth_right_deg``; when ``full_circle`` is set consumers ignore the
    azimuth bounds entirely.
    """

    azimuth_left_deg: float
    azimuth_right_deg: float
    elevation_upper_deg: float
    elevation_lower_deg: float
    full_circle: bool = False

    def __post_init__(self):
        if self.elevation_lower_deg > self.elevation_upper_deg:
            raise GeometryError("elevation_lower_deg exceeds elevation_upper_deg")
        for value in (self.elevation_lower_deg, self.elevation_upper_deg):
            if not -90.0 <= value <= 90.0:
                raise GeometryError(f"elevation bound out of [-90, 90]: {value}")

    @property
    def width_deg(self) -> float:
        if self.full_circle:
            return 360.0
        return (self.azimuth_right_deg - self.azimuth_left_deg) % 360.0


@dataclass(frozen=True)
class Viewpoint:
    """Everything the viewshed engine needs about one image's vantage."""

    pose: RoverPose
    sector: FovSector
    observer_height_m: float
    radius_m: float
    image_id: str

    def __post_init__(self):
        if not self.radius_m > 0:
            raise GeometryError(f"radius_m must be positive, got {self.radius_m}")
        if self.observer_height_m < 0:
            raise GeometryError(
                f"observer_height_m must be >= 0, got {self.observer_height_m}")


def fov_bounds(pointing: CameraPointing) -> FovSector:
    """Compute the absolute sector for a pointing (azimuth +- hFOV/2,
    elevation +- vFOV/2, elevations clamped to [-90, 90] with a warning)."""
    left = normalize_azimuth(pointing.azimuth_deg - pointing.hfov_deg / 2.0)
    right = normalize_azimuth(pointing.azimuth_deg + pointing.hfov_deg / 2.0)
    upper = pointing.elevation_deg + pointing.vfov_deg / 2.0
    lower = pointing.elevation_deg - pointing.vfov_deg / 2.0
    if upper > 90.0 or lower < -90.0:
        _warnings.warn(
            f"elevation bounds [{lower}, {upper}] clamped to [-90, 90]",
            ElevationClampWarning, stacklevel=2)
        upper = min(upper, 90.0)
        lower = max(lower, -90.0)
    return FovSector(
        azimuth_left_deg=left,
        azimuth_right_deg=right,
        elevation_upper_deg=upper,
        elevation_lower_deg=lower,
        full_circle=pointing.hfov_deg >= 360.0,
    )


def build_viewpoint(pose: RoverPose, pointing: CameraPointing,
                    observer_height_m: float, radius_m: float,
                    image_id: str) -> Viewpoint:
    """Assemble the viewshed input record from pose and pointing."""
    return Viewpoint(
        pose=pose,
        sector=fov_bounds(pointing),
        observer_height_m=observer_height_m,
        radius_m=radius_m,
        image_id=image_id,
    )
