"""Figure rendering: viewshed and overlap maps written as PNG files.

Figures accompany the machine-readable outputs (raster, GeoJSON, CSV) so a
run can be eyeballed without loading anything into a GIS.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Union

import matplotlib
matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .pointing import Viewpoint  # noqa: E402
from .raster import VIS_NODATA, VISIBLE, Dem, GeoTransform, VisibilityRaster  # noqa: E402


def _extent(t: GeoTransform):
    return (t.origin_easting,
            t.origin_easting + t.cols * t.pixel_size_m,
            t.origin_northing - t.rows * t.pixel_size_m,
            t.origin_northing)


def _hillshade(elevations: np.ndarray, nodata_mask: np.ndarray,
               pixel_size: float, azimuth: float = 315.0,
               altitude: float = 45.0) -> np.ndarray:
    filled = np.where(nodata_mask, np.nanmean(np.where(nodata_mask, np.nan,
                                                       elevations)), elevations)
    dy, dx = np.gradient(filled, pixel_size)
    slope = np.arctan(np.hypot(dx, dy))
    aspect = np.arctan2(-dx, dy)
    az_rad = math.radians(360.0 - azimuth + 90.0)
    alt_rad = math.radians(altitude)
    shade = (math.sin(alt_rad) * np.cos(slope)
             + math.cos(alt_rad) * np.sin(slope) * np.cos(az_rad - aspect))
    return np.clip(shade, 0.0, 1.0)


def _mask_layer(cells: np.ndarray, color, alpha: float = 0.55) -> np.ndarray:
    rgba = np.zeros(cells.shape + (4,), dtype=float)
    rgba[cells] = (*color, alpha)
    return rgba


def _draw_viewpoint(ax, viewpoint: Viewpoint) -> None:
    e, n = viewpoint.pose.easting, viewpoint.pose.northing
    ax.plot(e, n, marker="*", markersize=11, color="white",
            markeredgecolor="black", zorder=5)
    sector = viewpoint.sector
    if not sector.full_circle:
        for azimuth in (sector.azimuth_left_deg, sector.azimuth_right_deg):
            theta = math.radians(azimuth)
            ax.plot([e, e + viewpoint.radius_m * math.sin(theta)],
                    [n, n + viewpoint.radius_m * math.cos(theta)],
                    color="white", linewidth=0.9, linestyle="--", zorder=4)


def render_viewshed_figure(dem: Dem, vs: VisibilityRaster,
                           viewpoint: Viewpoint,
                           path: Union[str, Path]) -> Path:
    """Render DEM hillshade with the visible area and viewpoint overlaid."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7.0, 7.0))
    shade = _hillshade(dem.elevations, dem.nodata_mask,
                       dem.transform.pixel_size_m)
    ax.imshow(shade, cmap="gray", extent=_extent(dem.transform),
              origin="upper", vmin=0.0, vmax=1.0)
    ax.imshow(_mask_layer(vs.cells == VISIBLE, (1.0, 0.8, 0.0)),
              extent=_extent(vs.transform), origin="upper")
    nodata = vs.cells == VIS_NODATA
    if nodata.any():
        ax.imshow(_mask_layer(nodata, (0.3, 0.3, 0.3), alpha=0.8),
                  extent=_extent(vs.transform), origin="upper")
    _draw_viewpoint(ax, viewpoint)
    ax.set_xlabel("easting (m)")
    ax.set_ylabel("northing (m)")
    ax.set_title(viewpoint.image_id)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_overlap_figure(a: VisibilityRaster, b: VisibilityRaster,
                          overlap_cells: VisibilityRaster,
                          path: Union[str, Path],
                          dem: Optional[Dem] = None) -> Path:
    """Render two viewsheds plus their joint area on one map."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7.0, 7.0))
    if dem is not None:
        shade = _hillshade(dem.elevations, dem.nodata_mask,
                           dem.transform.pixel_size_m)
        ax.imshow(shade, cmap="gray", extent=_extent(dem.transform),
                  origin="upper", vmin=0.0, vmax=1.0)
    ax.imshow(_mask_layer(a.cells == VISIBLE, (1.0, 0.9, 0.1), alpha=0.5),
              extent=_extent(a.transform), origin="upper")
    ax.imshow(_mask_layer(b.cells == VISIBLE, (0.9, 0.1, 0.1), alpha=0.5),
              extent=_extent(b.transform), origin="upper")
    ax.imshow(_mask_layer(overlap_cells.cells == VISIBLE, (1.0, 0.5, 0.0),
                          alpha=0.9),
              extent=_extent(overlap_cells.transform), origin="upper")
    ax.set_xlabel("easting (m)")
    ax.set_ylabel("northing (m)")
    ax.set_title("viewshed overlap")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
