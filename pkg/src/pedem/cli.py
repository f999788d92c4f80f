"""``pedem`` command line.  Exit codes: 0 ok, 1 ingestion/schema error, 2 config error."""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from .errors import ConfigError, IngestionError
from .geometry import load_camera
from .io import read_estimates, read_frames, write_estimates, write_frames
from .metrics import evaluate, match_scene, write_bins_csv
from .pipeline import bench as run_bench
from .pipeline import run_pipeline
from .position import RefineConfig
from .scenegen import generate, load_scene_config, preset_scene

log = logging.getLogger("pedem")


def _setup_logging():
    level = os.environ.get("PEDEM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(exc):
    click.echo(f"error: {exc}", err=True)
    sys.exit(1 if isinstance(exc, IngestionError) else 2)


@click.group()
def main():
    """Pedestrian environment model from 2D skeletons and ego localization."""
    _setup_logging()


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="scene config JSON")
@click.option("--preset", type=click.Choice(["urban", "turn", "crossing", "standing", "static"]),
              help="use a built-in scene instead of --config")
@click.option("--pedestrians", type=int, default=20, show_default=True, help="preset only")
@click.option("--sigma", type=float, default=2.0, show_default=True, help="preset pixel noise")
@click.option("--seed", type=int, default=None, help="overrides the config seed")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--camera-out", type=click.Path(dir_okay=False), help="also write the camera JSON")
def simulate(config_path, preset, pedestrians, sigma, seed, out, camera_out):
    """Generate a synthetic scene with ground truth as frame JSONL."""
    try:
        if preset:
            cfg = preset_scene(preset, pedestrians, seed or 0, sigma)
        elif config_path:
            cfg = load_scene_config(config_path)
        else:
            raise ConfigError("one of --config / --preset is required", field="config")
        frames = generate(cfg, seed)
    except (ConfigError, IngestionError) as exc:
        _fail(exc)
    write_frames(frames, out)
    if camera_out:
        Path(camera_out).write_text(json.dumps(cfg.camera.to_dict()) + "\n")
    log.info("wrote %d frames to %s", len(frames), out)


def _refine_options(f):
    opts = [
        click.option("--no-refine", is_flag=True, help="skip the height-based refinement"),
        click.option("--single-point", is_flag=True, help="initial position from the hip midpoint only"),
        click.option("--schedule", type=click.Choice(["damped", "paper-gain"]), default="damped",
                     show_default=True),
        click.option("--steps", type=int, default=15, show_default=True),
        click.option("--scale-const", type=float, default=5.0, show_default=True),
        click.option("--drop-fraction", type=float, default=0.3, show_default=True),
        click.option("--height", "person_height", type=float, default=1.7, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _refine_config(no_refine, single_point, schedule, steps, scale_const, drop_fraction, person_height):
    return RefineConfig(steps=steps, scale_const=scale_const, schedule=schedule,
                        person_height=person_height, refinement_enabled=not no_refine,
                        single_point_init=single_point, drop_fraction=drop_fraction)


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--camera", "camera_path", required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_refine_options
def run(input_path, camera_path, out, **kw):
    """Track pedestrians and estimate their world positions."""
    try:
        cfg = _refine_config(**kw)
        camera = load_camera(camera_path)
        frames = read_frames(input_path)
    except (ConfigError, IngestionError) as exc:
        _fail(exc)
    estimates = run_pipeline(frames, camera, cfg)
    write_estimates(estimates, out)
    log.info("%d estimates from %d frames", len(estimates), len(frames))


@main.command("eval")
@click.option("--pred", multiple=True, required=True, type=click.Path(dir_okay=False),
              help="estimate JSONL; repeat together with --gt for several scenes")
@click.option("--gt", multiple=True, required=True, type=click.Path(dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--bin-width", type=float, default=5.0, show_default=True)
@click.option("--planar", is_flag=True, help="ground-plane instead of 3D errors")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="distance-binned errors")
@click.option("--svg", "plot_path", type=click.Path(dir_okay=False),
              help="error-over-distance figure (format from extension)")
def eval_cmd(pred, gt, out, bin_width, planar, csv_path, plot_path):
    """Score estimates against ground truth."""
    if len(pred) != len(gt):
        _fail(ConfigError("each --pred needs a matching --gt", field="gt"))
    pairs, unmatched = [], {}
    try:
        for p, g in zip(pred, gt):
            name = Path(p).stem
            ps, um = match_scene(read_estimates(p), read_frames(g), scene=name)
            pairs.extend(ps)
            unmatched[name] = um
    except IngestionError as exc:
        _fail(exc)
    report = evaluate(pairs, bin_width, planar, unmatched)
    Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if csv_path:
        write_bins_csv(report.bins, csv_path)
    if plot_path:
        from .plotting import error_over_distance
        error_over_distance(report.bins, plot_path)
    o = report.overall
    click.echo(f"matches={o.matches} e_abs={o.e_abs:.3f} m e_rel={o.e_rel:.2f} % "
               f"id_switches={o.id_switches}")


@main.command("bench")
@click.option("--input", "input_path", required=True, type=click.Path(dir_okay=False))
@click.option("--camera", "camera_path", required=True, type=click.Path(dir_okay=False))
@click.option("--reps", type=int, default=5, show_default=True)
@_refine_options
def bench_cmd(input_path, camera_path, reps, **kw):
    """Mean run time of association and position estimation."""
    try:
        cfg = _refine_config(**kw)
        camera = load_camera(camera_path)
        frames = read_frames(input_path)
    except (ConfigError, IngestionError) as exc:
        _fail(exc)
    res = run_bench(frames, camera, cfg, reps=reps)
    click.echo(json.dumps(res.to_dict(), indent=2))


if __name__ == "__main__":
    main()
