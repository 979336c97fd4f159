"""Command-line interface.

Subcommands mirror the pipeline stages: ``colocate`` runs labels end to end,
``viewpoint`` stops after the viewpoint CSV export, ``viewshed`` resumes from
such a CSV, ``overlap`` compares two rasters and ``fetch`` populates the
product cache.

Exit codes: 0 success, 1 total failure, 2 partial batch failure, 64 usage.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import fetch as fetch_mod
from . import pipeline, report
from .errors import MarsColocError
from .raster import ASCII_GRID, GEOTIFF, load_dem, polygonize, read_visibility, write_geojson, write_visibility
from .viewshed import ViewshedParams, compute_viewshed

_EXIT_TOTAL = 1
_EXIT_PARTIAL = 2
_EXIT_USAGE = 64

_FORMAT_CHOICE = click.Choice(["ascii", "geotiff"])
_MISSION_CHOICE = click.Choice(["curiosity", "perseverance"])


def _config_options(command):
    for option in reversed([
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="JSON config file."),
        click.option("--dem", type=click.Path(), default=None,
                     help="DEM raster (ESRI ASCII grid or GeoTIFF)."),
        click.option("--places-csv", type=click.Path(), default=None,
                     help="Localization table CSV."),
        click.option("--mission", type=_MISSION_CHOICE, default=None),
        click.option("--observer-height", "observer_height_m", type=float,
                     default=None, help="Eye height above terrain (m)."),
        click.option("--radius", "radius_m", type=float, default=None,
                     help="Viewshed radius (m)."),
        click.option("--mode", type=click.Choice(["exact", "sweep"]),
                     default=None),
        click.option("--curvature", type=click.Choice(["off", "mars"]),
                     default=None),
        click.option("--out-dir", type=click.Path(), default=None),
        click.option("--format", "formats", type=_FORMAT_CHOICE, multiple=True,
                     help="Raster output format (repeatable)."),
        click.option("--fallback",
                     type=click.Choice(["exact", "nearest-preceding"]),
                     default=None, help="Pose lookup mode."),
        click.option("--plot/--no-plot", "plot", default=None,
                     help="Render figure PNGs next to the outputs."),
    ]):
        command = option(command)
    return command


def _build_config(config_path, **flags) -> pipeline.PipelineConfig:
    overrides = {k: v for k, v in flags.items() if v is not None}
    if "fallback" in overrides:
        overrides["fallback"] = overrides["fallback"].replace("-", "_")
    if "formats" in overrides and not overrides["formats"]:
        del overrides["formats"]
    return pipeline.load_config(config_path, overrides)


def _batch_exit(ctx: click.Context, total: int, failed: int) -> None:
    if failed == 0:
        return
    ctx.exit(_EXIT_TOTAL if failed == total else _EXIT_PARTIAL)


@click.group()
@click.version_option(package_name="mars-coloc")
def cli() -> None:
    """Co-locate Mars rover mast-camera images with orbital maps."""


@cli.command()
@_config_options
@click.argument("labels", nargs=-1, type=click.Path(exists=True))
@click.pass_context
def colocate(ctx, config_path, labels, **flags):
    """Run labels through the full pipeline to viewsheds and overlays."""
    if not labels:
        raise click.UsageError("at least one label file is required")
    config = _build_config(config_path, **flags)
    results = pipeline.colocate(config, labels)
    failed = 0
    for result in results:
        if result.ok:
            outputs = ", ".join(result.raster_paths
                                + [p for p in (result.geojson_path,
                                               result.figure_path) if p])
            click.echo(f"OK   {result.image_id}: {outputs}")
            for warning in result.warnings:
                click.echo(f"     warning: {warning}")
        else:
            failed += 1
            click.echo(f"FAIL {result.label_path}: {result.error}", err=True)
    click.echo(f"{len(results) - failed}/{len(results)} labels co-located; "
               f"outputs in {config.out_dir}")
    _batch_exit(ctx, len(results), failed)


@cli.command()
@_config_options
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Viewpoint CSV path (default <out-dir>/viewpoints.csv).")
@click.argument("labels", nargs=-1, type=click.Path(exists=True))
@click.pass_context
def viewpoint(ctx, config_path, out_path, labels, **flags):
    """Extract viewpoints from labels and stop after the CSV export."""
    if not labels:
        raise click.UsageError("at least one label file is required")
    config = _build_config(config_path, **flags)
    if config.places_csv is None:
        raise click.UsageError("a localization CSV is required (--places-csv)")
    table = pipeline.load_table_file(config.places_csv, config.schema())
    viewpoints = []
    failed = 0
    for label in labels:
        try:
            _, vp, warn = pipeline.build_viewpoint_for_label(label, config, table)
            viewpoints.append(vp)
            click.echo(f"OK   {vp.image_id}: sector "
                       f"{vp.sector.azimuth_left_deg:.2f}..{vp.sector.azimuth_right_deg:.2f} deg")
            for message in warn:
                click.echo(f"     warning: {message}")
        except (MarsColocError, OSError, ValueError) as exc:
            failed += 1
            click.echo(f"FAIL {label}: {type(exc).__name__}: {exc}", err=True)
    if viewpoints:
        destination = Path(out_path) if out_path else Path(config.out_dir) / "viewpoints.csv"
        destination.parent.mkdir(parents=True, exist_ok=True)
        pipeline.export_viewpoint_csv(viewpoints, destination)
        click.echo(f"wrote {destination}")
    _batch_exit(ctx, len(labels), failed)


@cli.command()
@_config_options
@click.argument("viewpoint_csv", type=click.Path(exists=True))
@click.pass_context
def viewshed(ctx, config_path, viewpoint_csv, **flags):
    """Compute viewsheds for every row of an exported viewpoint CSV."""
    config = _build_config(config_path, **flags)
    if config.dem is None:
        raise click.UsageError("a DEM is required (--dem)")
    dem = load_dem(config.dem)
    viewpoints = pipeline.read_viewpoint_csv(viewpoint_csv)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = 0
    for vp in viewpoints:
        try:
            params = ViewshedParams(
                viewpoint=vp, mode=config.mode,
                target_height_m=config.target_height_m,
                curvature=config.curvature,
                planet_radius_m=config.planet_radius_m)
            raster = compute_viewshed(dem, params)
            stem = pipeline._safe_stem(vp.image_id)
            outputs = []
            for token in config.formats:
                fmt = pipeline._FORMAT_TOKENS[token]
                path = out_dir / f"{stem}_viewshed{pipeline._FORMAT_SUFFIX[fmt]}"
                write_visibility(raster, path, format=fmt)
                outputs.append(str(path))
            geojson_path = out_dir / f"{stem}_viewshed.geojson"
            write_geojson(polygonize(raster), geojson_path)
            outputs.append(str(geojson_path))
            if config.plot:
                figure_path = out_dir / f"{stem}_viewshed.png"
                report.render_viewshed_figure(dem, raster, vp, figure_path)
                outputs.append(str(figure_path))
            click.echo(f"OK   {vp.image_id}: {', '.join(outputs)}")
        except (MarsColocError, OSError, ValueError) as exc:
            failed += 1
            click.echo(f"FAIL {vp.image_id}: {type(exc).__name__}: {exc}",
                       err=True)
    _batch_exit(ctx, len(viewpoints), failed)


@cli.command()
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the overlap raster here (.asc or .tif).")
@click.option("--geojson", "geojson_path", type=click.Path(), default=None,
              help="Write overlap polygons as GeoJSON.")
@click.option("--plot", "plot_path", type=click.Path(), default=None,
              help="Render an overlap figure PNG.")
@click.argument("raster_a", type=click.Path(exists=True))
@click.argument("raster_b", type=click.Path(exists=True))
def overlap(out_path, geojson_path, plot_path, raster_a, raster_b):
    """Compare two visibility rasters and report their joint area."""
    result = pipeline.overlap_report_from_files(raster_a, raster_b)
    click.echo(f"area_a_m2      {result.area_a_m2:.6f}")
    click.echo(f"area_b_m2      {result.area_b_m2:.6f}")
    click.echo(f"area_overlap_m2 {result.area_overlap_m2:.6f}")
    click.echo(f"jaccard        {result.jaccard:.6f}")
    if out_path:
        fmt = GEOTIFF if Path(out_path).suffix.lower() in (".tif", ".tiff") else ASCII_GRID
        write_visibility(result.overlap, out_path, format=fmt)
        click.echo(f"wrote {out_path}")
    if geojson_path:
        write_geojson(polygonize(result.overlap), geojson_path)
        click.echo(f"wrote {geojson_path}")
    if plot_path:
        report.render_overlap_figure(read_visibility(raster_a),
                                     read_visibility(raster_b),
                                     result.overlap, plot_path)
        click.echo(f"wrote {plot_path}")


@cli.command()
@click.option("--mission", type=_MISSION_CHOICE, required=True)
@click.option("--cache-dir", type=click.Path(), default=None,
              help=f"Cache directory (default from config or "
                   f"${pipeline.CACHE_ENV_VAR}).")
@click.option("--base-url", default=None,
              help="Override the archive base URL.")
@click.option("--force-fetch", is_flag=True, default=False,
              help="Re-download even when cached.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.argument("product_ids", nargs=-1)
@click.pass_context
def fetch(ctx, mission, cache_dir, base_url, force_fetch, config_path,
          product_ids):
    """Download image + label products into the local cache."""
    if not product_ids:
        raise click.UsageError("at least one product id is required")
    config = pipeline.load_config(config_path, {"mission": mission,
                                                "cache_dir": cache_dir})
    base = base_url or config.fetch_base_urls.get(mission)
    failed = 0
    for product_id in product_ids:
        try:
            image_path, label_path = fetch_mod.fetch_product(
                product_id, mission, config.resolved_cache_dir(),
                base_url=base, force=force_fetch)
            click.echo(f"OK   {product_id}: {image_path}, {label_path}")
        except (MarsColocError, OSError) as exc:
            failed += 1
            click.echo(f"FAIL {product_id}: {type(exc).__name__}: {exc}",
                       err=True)
    _batch_exit(ctx, len(product_ids), failed)


def main(argv=None) -> None:
    """Entry point mapping errors onto the documented exit codes."""
    try:
        # In non-standalone mode click hands back ctx.exit codes as a return
        # value (or raises Exit on some paths); honor both.
        code = cli.main(args=argv, standalone_mode=False)
        if isinstance(code, int) and code:
            sys.exit(code)
    except click.exceptions.Exit as exc:
        if exc.exit_code:
            sys.exit(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        sys.exit(_EXIT_USAGE)
    except click.ClickException as exc:
        exc.show()
        sys.exit(_EXIT_TOTAL)
    except click.Abort:
        sys.exit(130)
    except MarsColocError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_TOTAL)


if __name__ == "__main__":
    main()
