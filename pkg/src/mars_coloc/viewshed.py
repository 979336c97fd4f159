"""Sector- and elevation-constrained terrain-occlusion visibility over a DEM.

Two engines share one set of gating rules (radius, sector, elevation band,
nodata handling) and differ only in how occlusion is established:

* exact - every candidate cell center gets an independent line of sight from
  the eye, sampling terrain bilinearly every half pixel. This is the
  reference semantics.
* sweep - radial rays walk outward once, carrying a running maximum of the
  terrain tangent; each cell is decided from the ray passing closest to its
  center using the same distance window and comparison as exact mode. This
  is the fast path for large rasters.

A target is visible when its tangent from the eye strictly exceeds every
intermediate terrain tangent; grazing rays count as blocked. The tangent at
zero distance is defined as zero, which keeps the observer cell singularity
out of the math. Intermediate samples touching nodata cells block the ray.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptySectorError,
    GridMismatchError,
    NodataObserverError,
    OutOfBoundsError,
)
from .pointing import FovSector, Viewpoint
from .raster import (
    HIDDEN,
    VIS_NODATA,
    VISIBLE,
    Dem,
    GeoTransform,
    VisibilityRaster,
    bilinear_grid,
    contains_point,
    grid_aligned,
    map_to_pixel,
    sample_values,
)

EXACT = "exact"
SWEEP = "sweep"

CURVATURE_OFF = "off"
CURVATURE_MARS = "mars"

MARS_RADIUS_M = 3_389_500.0

# Samples along rays are spaced half a pixel apart (sub-Nyquist for the grid).
_STEP_PIXELS = 0.5
# Sweep ray spacing: atan(_RAY_PIXELS * pixel / radius). The contract only
# requires <= 0.5 pixels of arc at full radius; the tighter spacing buys
# exact-mode agreement at shadow boundaries for a modest constant factor.
_RAY_PIXELS = 0.125
# Guard against a ray sample landing exactly on the target due to rounding.
_DIST_EPS = 1e-9


@dataclass(frozen=True)
class ViewshedParams:
    """Run parameters for one viewshed computation."""

    viewpoint: Viewpoint
    mode: str = EXACT
    target_height_m: float = 0.0
    curvature: str = CURVATURE_OFF
    planet_radius_m: float = MARS_RADIUS_M

    def __post_init__(self):
        if self.mode not in (EXACT, SWEEP):
            raise ValueError(f"mode must be exact or sweep, got {self.mode!r}")
        if self.curvature not in (CURVATURE_OFF, CURVATURE_MARS):
            raise ValueError(f"curvature must be off or mars, got {self.curvature!r}")
        if self.target_height_m < 0:
            raise ValueError("target_height_m must be >= 0")


@dataclass(frozen=True)
class OverlapReport:
    """Joint-visibility summary for two co-located viewsheds."""

    overlap: VisibilityRaster
    area_a_m2: float
    area_b_m2: float
    area_overlap_m2: float
    jaccard: float


def in_sector(sector: FovSector, azimuth_deg: float) -> bool:
    """True when the azimuth lies on the clockwise arc left->right, bounds
    inclusive; always true for full-circle sectors."""
    if sector.full_circle:
        return True
    width = (sector.azimuth_right_deg - sector.azimuth_left_deg) % 360.0
    rel = (azimuth_deg - sector.azimuth_left_deg) % 360.0
    return rel <= width


def _in_sector_many(sector: FovSector, azimuth_deg: np.ndarray) -> np.ndarray:
    if sector.full_circle:
        return np.ones_like(azimuth_deg, dtype=bool)
    width = (sector.azimuth_right_deg - sector.azimuth_left_deg) % 360.0
    rel = (azimuth_deg - sector.azimuth_left_deg) % 360.0
    return rel <= width


def _band_tangents(sector: FovSector) -> tuple:
    lo = sector.elevation_lower_deg
    hi = sector.elevation_upper_deg
    tan_lo = -math.inf if lo <= -90.0 else math.tan(math.radians(lo))
    tan_hi = math.inf if hi >= 90.0 else math.tan(math.radians(hi))
    return tan_lo, tan_hi


# ---------------------------------------------------------------------------
# Shared geometry setup
# ---------------------------------------------------------------------------

class _Scene:
    """Everything both engines need about one (dem, params) pair.

    Elevations are taken relative to the observer cell's ground value, so a
    constant offset applied to the whole DEM cancels exactly (cell by cell)
    and cannot perturb any visibility comparison.
    """

    def __init__(self, dem: Dem, params: ViewshedParams):
        vp = params.viewpoint
        t = dem.transform
        if not vp.sector.full_circle and vp.sector.width_deg == 0.0:
            raise EmptySectorError("sector has zero angular width")
        if not contains_point(t, vp.pose.easting, vp.pose.northing):
            raise OutOfBoundsError(
                f"viewpoint ({vp.pose.easting}, {vp.pose.northing}) outside DEM")
        col_f, row_f = map_to_pixel(t, vp.pose.easting, vp.pose.northing)
        self.obs_r = min(int(math.floor(row_f)), t.rows - 1)
        self.obs_c = min(int(math.floor(col_f)), t.cols - 1)
        if dem.nodata_mask[self.obs_r, self.obs_c]:
            raise NodataObserverError(
                f"observer cell ({self.obs_r}, {self.obs_c}) is nodata")
        self.dem = dem
        self.params = params
        self.vp = vp
        self.eye_e = vp.pose.easting
        self.eye_n = vp.pose.northing
        self.has_nodata = bool(dem.nodata_mask.any())
        self.elev_rel = dem.elevations - dem.elevations[self.obs_r, self.obs_c]
        self.eye_z = (sample_values(self.elev_rel, dem.nodata_mask, t,
                                    self.eye_e, self.eye_n)
                      + vp.observer_height_m)
        self.step = t.pixel_size_m * _STEP_PIXELS
        self.tan_lo, self.tan_hi = _band_tangents(vp.sector)
        if params.curvature == CURVATURE_MARS:
            self.curv = 1.0 / (2.0 * params.planet_radius_m)
        else:
            self.curv = 0.0

        # Window of cells that can possibly fall inside the radius.
        radius_px = vp.radius_m / t.pixel_size_m
        self.r0 = max(0, int(math.floor(row_f - radius_px)) - 1)
        self.r1 = min(t.rows, int(math.ceil(row_f + radius_px)) + 1)
        self.c0 = max(0, int(math.floor(col_f - radius_px)) - 1)
        self.c1 = min(t.cols, int(math.ceil(col_f + radius_px)) + 1)

    def window_geometry(self):
        """Per-cell distance, azimuth and target tangent over the window."""
        t = self.dem.transform
        rows_idx = np.arange(self.r0, self.r1)
        cols_idx = np.arange(self.c0, self.c1)
        ce = t.origin_easting + (cols_idx + 0.5) * t.pixel_size_m
        cn = t.origin_northing - (rows_idx + 0.5) * t.pixel_size_m
        de = ce[None, :] - self.eye_e
        dn = cn[:, None] - self.eye_n
        dist = np.hypot(de, dn)
        azimuth = np.degrees(np.arctan2(de, dn)) % 360.0

        elev = self.elev_rel[self.r0:self.r1, self.c0:self.c1]
        nodata = self.dem.nodata_mask[self.r0:self.r1, self.c0:self.c1]
        with np.errstate(divide="ignore", invalid="ignore"):
            tgt_tan = (elev + self.params.target_height_m
                       - self.curv * dist * dist - self.eye_z) / dist
        return dist, azimuth, tgt_tan, nodata

    def candidate_mask(self, dist, azimuth, tgt_tan, nodata) -> np.ndarray:
        mask = (dist <= self.vp.radius_m) & ~nodata
        mask &= _in_sector_many(self.vp.sector, azimuth)
        with np.errstate(invalid="ignore"):
            mask &= (tgt_tan >= self.tan_lo) & (tgt_tan <= self.tan_hi)
        # The observer cell is gated separately: its angles are defined as 0.
        obs_in = (self.r0 <= self.obs_r < self.r1) and (self.c0 <= self.obs_c < self.c1)
        if obs_in:
            mask[self.obs_r - self.r0, self.obs_c - self.c0] = (
                self.tan_lo <= 0.0 <= self.tan_hi
                and in_sector(self.vp.sector, 0.0)
                and not self.dem.nodata_mask[self.obs_r, self.obs_c])
        return mask

    def terrain_tangents(self, pos_e: np.ndarray, pos_n: np.ndarray,
                         dists: np.ndarray) -> np.ndarray:
        """Terrain tangent from the eye at arbitrary sample points.

        Samples with any nodata contribution block the ray (+inf).
        """
        t = self.dem.transform
        cols_f = (pos_e - t.origin_easting) / t.pixel_size_m
        rows_f = (t.origin_northing - pos_n) / t.pixel_size_m
        mask = self.dem.nodata_mask if self.has_nodata else None
        elev, contaminated = bilinear_grid(self.elev_rel, mask, cols_f, rows_f)
        with np.errstate(divide="ignore", invalid="ignore"):
            tan = (elev - self.curv * dists * dists - self.eye_z) / dists
        if contaminated is not None:
            tan[contaminated] = np.inf
        return tan


# ---------------------------------------------------------------------------
# Exact engine
# ---------------------------------------------------------------------------

def _exact_occluded(scene: _Scene, te: np.ndarray, tn: np.ndarray,
                    dist: np.ndarray, tgt_tan: np.ndarray) -> np.ndarray:
    """Independent per-target line-of-sight occlusion, chunked."""
    step = scene.step
    n = te.size
    occluded = np.zeros(n, dtype=bool)
    if n == 0:
        return occluded
    max_steps = max(int(np.ceil(dist.max() / step)) - 1, 0)
    if max_steps == 0:
        return occluded
    # ~4M sample slots per chunk keeps the working set around 100 MB.
    chunk = max(1, int(4_000_000 // max_steps))
    sample_d = np.arange(1, max_steps + 1) * step
    for start in range(0, n, chunk):
        sl = slice(start, min(start + chunk, n))
        d = dist[sl]
        k = sample_d[None, : max(int(np.ceil(d.max() / step)) - 1, 1)]
        live = k < d[:, None] - _DIST_EPS * step
        ux = (te[sl] - scene.eye_e) / d
        uy = (tn[sl] - scene.eye_n) / d
        pos_e = scene.eye_e + ux[:, None] * k
        pos_n = scene.eye_n + uy[:, None] * k
        tan = scene.terrain_tangents(pos_e, pos_n, np.broadcast_to(k, pos_e.shape))
        tan = np.where(live, tan, -np.inf)
        occluded[sl] = (tan >= tgt_tan[sl, None]).any(axis=1)
    return occluded


# ---------------------------------------------------------------------------
# Sweep engine
# ---------------------------------------------------------------------------

def _sweep_unoccluded(scene: _Scene, candidates: np.ndarray,
                      dist: np.ndarray, tgt_tan: np.ndarray) -> np.ndarray:
    """Radial-sweep occlusion decision for every candidate window cell.

    Rays walk outward once, carrying a running maximum of terrain tangents.
    A cell counts as unoccluded when some sample landing in it, on a ray
    passing within one ray spacing of the cell center, clears three gates:

    * the sample's own target tangent beats the running maximum of all
      earlier samples (the classical radial-sweep test),
    * the cell center's target tangent does too (keeps a rising foreground
      from leaking visibility to a lower center),
    * the cell center's target tangent beats the running maximum over the
      full exact-mode window, i.e. every sample strictly closer than the
      center along this ray.

    The combination reproduces exact-mode decisions away from shadow
    boundaries and errs only on cells whose visibility margin is below the
    lateral perturbation of one ray spacing.
    """
    t = scene.dem.transform
    vp = scene.vp
    step = scene.step
    radius = vp.radius_m
    rows, cols = t.rows, t.cols
    n_steps = int(math.floor(radius / step + _DIST_EPS))

    unoccluded = np.zeros_like(candidates)
    # Cells closer than one step have no intermediate samples at all.
    unoccluded |= dist <= step
    if (scene.r0 <= scene.obs_r < scene.r1) and (scene.c0 <= scene.obs_c < scene.c1):
        unoccluded[scene.obs_r - scene.r0, scene.obs_c - scene.c0] = True
    if n_steps == 0:
        return unoccluded

    dtheta = math.degrees(math.atan(_RAY_PIXELS * t.pixel_size_m / radius))
    if vp.sector.full_circle:
        n_rays = max(int(math.ceil(360.0 / dtheta)), 4)
        azimuths = np.arange(n_rays) * (360.0 / n_rays)
        spacing_rad = math.radians(360.0 / n_rays)
    else:
        width = vp.sector.width_deg
        n_seg = max(int(math.ceil(width / dtheta)), 1)
        azimuths = (vp.sector.azimuth_left_deg
                    + np.arange(n_seg + 1) * (width / n_seg)) % 360.0
        spacing_rad = math.radians(width / n_seg)

    # Bulk per-sample math runs in float32: the tangent noise this adds
    # (~1e-7) sits far below any margin the half-pixel sampling resolves,
    # and it halves the memory traffic of the hot loop. Per-cell gates and
    # cell geometry stay float64.
    sample_d = (np.arange(1, n_steps + 1) * step).astype(np.float32)
    theta = np.radians(azimuths)
    dir_e = np.sin(theta).astype(np.float32)
    dir_n = np.cos(theta).astype(np.float32)
    tan_spacing = math.tan(spacing_rad)
    values32 = scene.elev_rel.astype(np.float32)
    nodata_mask = scene.dem.nodata_mask if scene.has_nodata else None
    eye_e32 = np.float32(scene.eye_e)
    eye_n32 = np.float32(scene.eye_n)
    eye_z32 = np.float32(scene.eye_z)
    curv32 = np.float32(scene.curv)
    inv_px = np.float32(1.0 / t.pixel_size_m)
    origin_e32 = np.float32(t.origin_easting)
    origin_n32 = np.float32(t.origin_northing)

    # Window-cell geometry promoted to full-grid lookup tables.
    tau_flat = np.full(rows * cols, np.nan)
    d_flat = np.full(rows * cols, np.inf)
    window_index = (np.arange(scene.r0, scene.r1)[:, None] * cols
                    + np.arange(scene.c0, scene.c1)[None, :])
    tau_flat[window_index.ravel()] = tgt_tan.ravel()
    d_flat[window_index.ravel()] = dist.ravel()

    target_h = scene.params.target_height_m
    inv_d = np.float32(1.0) / sample_d
    # Per-step constants: curvature drop plus the eye height, pre-combined.
    offset = (curv32 * sample_d * sample_d + eye_z32).astype(np.float32)
    visible_parts = []
    chunk = max(1, int(4_000_000 // n_steps))
    for start in range(0, azimuths.size, chunk):
        sl = slice(start, min(start + chunk, azimuths.size))
        pos_e = eye_e32 + dir_e[sl, None] * sample_d[None, :]
        pos_n = eye_n32 + dir_n[sl, None] * sample_d[None, :]
        elev, contaminated = bilinear_grid(values32, nodata_mask,
                                           (pos_e - origin_e32) * inv_px,
                                           (origin_n32 - pos_n) * inv_px)
        elev -= offset
        tan = elev
        tan *= inv_d
        if contaminated is not None:
            tan[contaminated] = np.inf
        run = np.maximum.accumulate(tan, axis=1)
        run_prev = np.empty_like(run)
        run_prev[:, 0] = -np.inf
        run_prev[:, 1:] = run[:, :-1]

        # Cheap pre-gate: only samples setting a new running maximum (plus
        # target-height allowance) can pass the full verdict; evaluate the
        # gather-heavy gates on that small subset only.
        if target_h:
            sample_tgt = tan + np.float32(target_h) * inv_d[None, :]
            sample_tgt[np.isposinf(tan)] = -np.inf
        else:
            sample_tgt = np.where(np.isposinf(tan), np.float32(-np.inf), tan) \
                if scene.has_nodata else tan
        ray_idx, step_idx = np.nonzero(sample_tgt > run_prev)
        if ray_idx.size == 0:
            continue

        pe = pos_e[ray_idx, step_idx].astype(np.float64)
        pn = pos_n[ray_idx, step_idx].astype(np.float64)
        cr = np.floor((t.origin_northing - pn) / t.pixel_size_m).astype(np.int64)
        cc = np.floor((pe - t.origin_easting) / t.pixel_size_m).astype(np.int64)
        in_grid = (cr >= 0) & (cr < rows) & (cc >= 0) & (cc < cols)
        ids = np.where(in_grid, cr * cols + cc, 0)
        tau = tau_flat[ids]
        center_d = d_flat[ids]

        lateral = np.abs(
            (t.origin_easting + (cc + 0.5) * t.pixel_size_m - scene.eye_e)
            * dir_n[sl][ray_idx]
            - (t.origin_northing - (cr + 0.5) * t.pixel_size_m - scene.eye_n)
            * dir_e[sl][ray_idx])
        bounded_d = np.minimum(center_d, radius + step)  # inf off-window
        j_star = np.ceil(bounded_d / step - _DIST_EPS).astype(np.int64) - 1
        j_star = np.clip(j_star, 0, n_steps)
        has_window = j_star >= 1
        run_full = np.where(has_window,
                            run[ray_idx, np.maximum(j_star - 1, 0)], -np.inf)
        with np.errstate(invalid="ignore"):
            verdict = ((np.minimum(sample_tgt[ray_idx, step_idx], tau)
                        > run_prev[ray_idx, step_idx])
                       & (tau > run_full)
                       & (lateral <= center_d * tan_spacing + _DIST_EPS)
                       & in_grid)
        visible_parts.append(ids[verdict])

    if visible_parts:
        seen = np.bincount(np.concatenate(visible_parts), minlength=rows * cols)
        unoccluded |= (seen.reshape(rows, cols) > 0)[scene.r0:scene.r1,
                                                     scene.c0:scene.c1]
    return unoccluded


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def line_of_sight(dem: Dem, viewpoint: Viewpoint, target_easting: float,
                  target_northing: float, target_height_m: float = 0.0,
                  curvature: str = CURVATURE_OFF,
                  planet_radius_m: float = MARS_RADIUS_M) -> bool:
    """Single observer-to-target visibility test.

    The target is visible when it lies within radius, sector and elevation
    band and no intermediate terrain sample (every half pixel along the
    segment) reaches its tangent.
    """
    params = ViewshedParams(viewpoint=viewpoint, target_height_m=target_height_m,
                            curvature=curvature, planet_radius_m=planet_radius_m)
    scene = _Scene(dem, params)
    t = dem.transform
    if not contains_point(t, target_easting, target_northing):
        raise OutOfBoundsError(
            f"target ({target_easting}, {target_northing}) outside DEM")
    de = target_easting - scene.eye_e
    dn = target_northing - scene.eye_n
    dist = math.hypot(de, dn)
    if dist > viewpoint.radius_m:
        return False
    if dist == 0.0:
        # Zero-distance tangent and azimuth are both defined as 0.
        return scene.tan_lo <= 0.0 <= scene.tan_hi and in_sector(viewpoint.sector, 0.0)
    azimuth = math.degrees(math.atan2(de, dn)) % 360.0
    if not in_sector(viewpoint.sector, azimuth):
        return False
    target_z = (sample_values(scene.elev_rel, dem.nodata_mask, dem.transform,
                              target_easting, target_northing)
                + target_height_m - scene.curv * dist * dist)
    tgt_tan = (target_z - scene.eye_z) / dist
    if not scene.tan_lo <= tgt_tan <= scene.tan_hi:
        return False
    occluded = _exact_occluded(scene, np.array([target_easting]),
                               np.array([target_northing]),
                               np.array([dist]), np.array([tgt_tan]))
    return not bool(occluded[0])


def compute_viewshed(dem: Dem, params: ViewshedParams) -> VisibilityRaster:
    """Visibility of every DEM cell from the viewpoint under ``params``.

    The raster shares the DEM's transform; cells are 1 (visible), 0 (hidden)
    or 255 (the cell itself is nodata).
    """
    scene = _Scene(dem, params)
    dist, azimuth, tgt_tan, nodata = scene.window_geometry()
    candidates = scene.candidate_mask(dist, azimuth, tgt_tan, nodata)

    if params.mode == EXACT:
        wr, wc = np.nonzero(candidates)
        not_obs = ~((wr + scene.r0 == scene.obs_r) & (wc + scene.c0 == scene.obs_c))
        wr_t, wc_t = wr[not_obs], wc[not_obs]
        t = dem.transform
        te = t.origin_easting + (wc_t + scene.c0 + 0.5) * t.pixel_size_m
        tn = t.origin_northing - (wr_t + scene.r0 + 0.5) * t.pixel_size_m
        occluded = _exact_occluded(scene, te, tn, dist[wr_t, wc_t],
                                   tgt_tan[wr_t, wc_t])
        visible = np.zeros_like(candidates)
        visible[wr_t[~occluded], wc_t[~occluded]] = True
        if (scene.r0 <= scene.obs_r < scene.r1) and (scene.c0 <= scene.obs_c < scene.c1):
            owr, owc = scene.obs_r - scene.r0, scene.obs_c - scene.c0
            visible[owr, owc] = candidates[owr, owc]
    else:
        unoccluded = _sweep_unoccluded(scene, candidates, dist, tgt_tan)
        visible = candidates & unoccluded

    cells = np.full((dem.transform.rows, dem.transform.cols), HIDDEN, dtype=np.uint8)
    window = cells[scene.r0:scene.r1, scene.c0:scene.c1]
    window[visible] = VISIBLE
    cells[dem.nodata_mask] = VIS_NODATA
    vp = params.viewpoint
    provenance = (f"{vp.image_id}|mode={params.mode}"
                  f"|eye=({vp.pose.easting:.3f},{vp.pose.northing:.3f})"
                  f"|radius={vp.radius_m:g}|sector="
                  + ("full" if vp.sector.full_circle else
                     f"{vp.sector.azimuth_left_deg:g}..{vp.sector.azimuth_right_deg:g}"))
    return VisibilityRaster(transform=dem.transform, cells=cells,
                            provenance=provenance)


def overlap(a: VisibilityRaster, b: VisibilityRaster) -> OverlapReport:
    """Joint visibility of two grid-aligned rasters over their union extent."""
    if not grid_aligned(a.transform, b.transform):
        raise GridMismatchError(
            "rasters are not grid-aligned (pixel size or fractional offset)")
    px = a.transform.pixel_size_m

    # Union extent in a's pixel coordinates.
    off_col = round((b.transform.origin_easting - a.transform.origin_easting) / px)
    off_row = round((a.transform.origin_northing - b.transform.origin_northing) / px)
    r_min = min(0, off_row)
    c_min = min(0, off_col)
    r_max = max(a.transform.rows, off_row + b.transform.rows)
    c_max = max(a.transform.cols, off_col + b.transform.cols)
    inter_rows = min(a.transform.rows, off_row + b.transform.rows) - max(0, off_row)
    inter_cols = min(a.transform.cols, off_col + b.transform.cols) - max(0, off_col)
    if inter_rows <= 0 or inter_cols <= 0:
        raise GridMismatchError("raster extents do not overlap")

    shape = (r_max - r_min, c_max - c_min)
    vis_a = np.zeros(shape, dtype=bool)
    vis_b = np.zeros(shape, dtype=bool)
    nodata_any = np.zeros(shape, dtype=bool)
    ar, ac = -r_min, -c_min
    vis_a[ar:ar + a.transform.rows, ac:ac + a.transform.cols] = a.cells == VISIBLE
    nodata_any[ar:ar + a.transform.rows, ac:ac + a.transform.cols] |= a.cells == VIS_NODATA
    br, bc = off_row - r_min, off_col - c_min
    vis_b[br:br + b.transform.rows, bc:bc + b.transform.cols] = b.cells == VISIBLE
    nodata_any[br:br + b.transform.rows, bc:bc + b.transform.cols] |= b.cells == VIS_NODATA

    both = vis_a & vis_b
    either = vis_a | vis_b
    cells = np.where(both, VISIBLE, HIDDEN).astype(np.uint8)
    cells[nodata_any & ~both] = VIS_NODATA
    transform = GeoTransform(
        origin_easting=a.transform.origin_easting + c_min * px,
        origin_northing=a.transform.origin_northing - r_min * px,
        pixel_size_m=px,
        rows=shape[0],
        cols=shape[1],
    )
    union_count = int(either.sum())
    overlap_count = int(both.sum())
    return OverlapReport(
        overlap=VisibilityRaster(
            transform=transform, cells=cells,
            provenance=f"overlap[{a.provenance} & {b.provenance}]"),
        area_a_m2=float(vis_a.sum()) * px * px,
        area_b_m2=float(vis_b.sum()) * px * px,
        area_overlap_m2=overlap_count * px * px,
        jaccard=(overlap_count / union_count) if union_count else 0.0,
    )
