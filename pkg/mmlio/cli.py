# mmlio/cli.py
import functools
import logging
import math
import os

import click
import numpy as np
from rich.console import Console
from rich.table import Table

from mmlio import configure
from mmlio.errors import MmlioError
from mmlio.pipeline.dataset import GROUNDTRUTH_HEADER, read_csv, read_dataset
from mmlio.pipeline.mapexport import export_map
from mmlio.pipeline.metrics import evaluate
from mmlio.pipeline.params import MODES
from mmlio.pipeline.report import GRAPH_FILE, MAP_FILE, read_trajectory, write_report
from mmlio.pipeline.runner import calibrate, run_pipeline
from mmlio.posegraph.io import write_graph
from mmlio.settings import load_settings, parse_assignments
from mmlio.simkit.dataset import simulate_dataset
from mmlio.simkit.scenes import SCENES, make_scene

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIVERGED = 2


def handle_errors(fn):
    """Print library errors and exit with status 1."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (MmlioError, OSError) as e:
            logger.debug("Command failed", exc_info=True)
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(EXIT_ERROR)
    return wrapper


def settings_options(fn):
    """--params FILE and repeatable --set key=value."""
    fn = click.option('--set', 'assignments', multiple=True, metavar='KEY=VALUE',
                      help='Override one parameter, e.g. swo.window_size=5')(fn)
    fn = click.option('--params', 'params_file', type=click.Path(dir_okay=False),
                      default=None, help='Flat key=value parameter file')(fn)
    return fn


def run_options(fn):
    fn = click.option('--loop-closure/--no-loop-closure', default=None,
                      help='Enable ICP loop closure')(fn)
    fn = click.option('--serial', is_flag=True,
                      help='Run every stage on one thread')(fn)
    fn = click.option('--mode', type=click.Choice(MODES), default=None,
                      help='Sensor combination')(fn)
    return fn


def _settings(ctx, params_file, assignments, mode=None, serial=None, loop_closure=None):
    cfg = ctx.obj
    overrides = parse_assignments(assignments)
    if mode is not None:
        overrides['pipeline.mode'] = mode
    if serial or cfg.SERIAL:
        overrides['pipeline.serial'] = 'true'
    if loop_closure is not None:
        overrides['loop.enabled'] = str(loop_closure).lower()
    return load_settings(params_file or cfg.PARAMS_FILE, overrides)


def _table(title, rows):
    table = Table(title=title)
    table.add_column("Quantity")
    table.add_column("Value", justify="right")
    for name, value in rows:
        table.add_row(name, value)
    console.print(table)


def _fmt(value, unit=""):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "N/A"
    return f"{value:.4f}{unit}" if isinstance(value, float) else f"{value}{unit}"


@click.group()
@click.option('--profile', default=None, help='Environment profile (development, batch, testing)')
@click.pass_context
def cli(ctx, profile):
    """Multi-modal LiDAR-inertial odometry."""
    ctx.obj = configure(profile)


@cli.command('simulate')
@click.argument('scene', type=click.Choice(sorted(SCENES)))
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--seed', default=0, show_default=True, help='Noise seed')
@click.option('--sensor', 'sensors', multiple=True, type=click.Choice(['v', 'h']),
              help='Streams to simulate (default both)')
@click.option('--with-extrinsic', is_flag=True, help='Write the spinning extrinsic to the manifest')
@click.option('--imu-noise/--no-imu-noise', default=True, show_default=True)
@settings_options
@click.pass_context
@handle_errors
def simulate(ctx, scene, out_dir, seed, sensors, with_extrinsic, imu_noise, params_file,
             assignments):
    """Simulate a scene preset into a dataset directory."""
    settings = _settings(ctx, params_file, assignments)
    scenario = make_scene(scene)
    manifest = simulate_dataset(scenario, out_dir, seed=seed,
                                imu_noise=settings.imu if imu_noise else None,
                                sensors=tuple(sensors) or ('v', 'h'),
                                include_extrinsic=with_extrinsic, progress=ctx.obj.PROGRESS)
    _table(f"Simulated '{scene}'", [
        (f"{s} scans", str(len(stream.scans))) for s, stream in sorted(manifest.sensors.items())
    ] + [("duration", _fmt(scenario.duration, " s")), ("output", out_dir)])


@cli.command('calibrate')
@click.argument('dataset_dir', type=click.Path(exists=True, file_okay=False))
@click.option('--out', 'out_file', type=click.Path(dir_okay=False), default=None,
              help='Write the T_v_to_h record (tx ty tz qw qx qy qz) here')
@settings_options
@click.pass_context
@handle_errors
def calibrate_cmd(ctx, dataset_dir, out_file, params_file, assignments):
    """Estimate the spinning to solid-state extrinsic from the stationary prefix."""
    settings = _settings(ctx, params_file, assignments)
    dataset = read_dataset(dataset_dir)
    extr = calibrate(dataset, settings)
    record = extr.T_v_to_h.as_record()
    line = " ".join(f"{v:.17g}" for v in record)
    if out_file:
        with open(out_file, 'w', encoding='utf-8') as fh:
            fh.write(line + "\n")
    t = extr.T_v_to_h.translation
    _table("Extrinsic T_v_to_h", [
        ("translation", f"({t[0]:.4f}, {t[1]:.4f}, {t[2]:.4f}) m"),
        ("rotation", f"{math.degrees(extr.T_v_to_h.rotation.angle()):.3f} deg"),
        ("fitness", f"{extr.fitness:.3e} m^2"),
    ])
    click.echo(line)


@cli.command('run')
@click.argument('dataset_dir', type=click.Path(exists=True, file_okay=False))
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--map/--no-map', 'with_map', default=True, show_default=True,
              help='Export the world feature map')
@run_options
@settings_options
@click.pass_context
@handle_errors
def run(ctx, dataset_dir, out_dir, with_map, mode, serial, loop_closure, params_file,
        assignments):
    """Run odometry and write report.json, trajectory.csv, graph.txt and map.ply."""
    settings = _settings(ctx, params_file, assignments, mode, serial, loop_closure)
    dataset = read_dataset(dataset_dir)
    result = run_pipeline(dataset, settings, progress=ctx.obj.PROGRESS)
    report = result.report
    write_report(report, out_dir)
    if len(result.graph):
        write_graph(result.graph, os.path.join(out_dir, GRAPH_FILE))
    if with_map and len(result.map_points):
        export_map(result.map_points, result.map_labels, os.path.join(out_dir, MAP_FILE))
    _table(f"Run ({report.mode})", [
        ("frames", str(report.frames)),
        ("keyframes", str(report.keyframes)),
        ("bad frames", str(report.bad_frames)),
        ("loop closures", str(len(report.loop_closures))),
        ("end-to-end error", _fmt(report.end_to_end_error_m, " m")),
        ("ATE RMSE", _fmt(report.ate_rmse_m, " m")),
        ("time per frame", _fmt(report.timing_ms.get("total"), " ms")),
        ("diverged", str(report.diverged)),
    ])
    if report.diverged:
        click.echo(f"Odometry diverged after frame {report.last_good_frame}", err=True)
        ctx.exit(EXIT_DIVERGED)


@cli.command('evaluate')
@click.argument('trajectory', type=click.Path(exists=True, dir_okay=False))
@click.argument('groundtruth', type=click.Path(exists=True))
@click.option('--max-dt', default=0.01, show_default=True, help='Association window, s')
@click.option('--json', 'json_out', type=click.Path(dir_okay=False), default=None,
              help='Also write the metrics as JSON')
@click.pass_context
@handle_errors
def evaluate_cmd(ctx, trajectory, groundtruth, max_dt, json_out):
    """Compare a trajectory.csv with ground truth (a CSV or a dataset directory)."""
    traj = read_trajectory(trajectory)
    if os.path.isdir(groundtruth):
        gt = read_dataset(groundtruth).groundtruth
        if gt is None:
            raise click.UsageError(f"dataset {groundtruth} has no ground truth")
    else:
        gt = read_csv(groundtruth, GROUNDTRUTH_HEADER)
    metrics = evaluate(traj, gt, max_dt)
    if json_out:
        with open(json_out, 'w', encoding='utf-8') as fh:
            fh.write(metrics.model_dump_json(indent=2))
    _table("Trajectory error", [
        ("end-to-end error", _fmt(metrics.end_to_end_error_m, " m")),
        ("ATE RMSE", _fmt(metrics.ate_rmse_m, " m")),
        ("associated poses", str(metrics.pairs)),
        ("path length", _fmt(metrics.path_length_m, " m")),
    ])


@cli.command('export-map')
@click.argument('dataset_dir', type=click.Path(exists=True, file_okay=False))
@click.argument('map_file', type=click.Path(dir_okay=False))
@run_options
@settings_options
@click.pass_context
@handle_errors
def export_map_cmd(ctx, dataset_dir, map_file, mode, serial, loop_closure, params_file,
                   assignments):
    """Run odometry and export only the world feature map."""
    settings = _settings(ctx, params_file, assignments, mode, serial, loop_closure)
    result = run_pipeline(read_dataset(dataset_dir), settings, progress=ctx.obj.PROGRESS)
    if result.report.diverged:
        click.echo("Odometry diverged; the map covers the frames before it", err=True)
    export_map(result.map_points, result.map_labels, map_file)
    labels = np.bincount(result.map_labels, minlength=3)
    _table("Map", [("edge points", str(labels[1])), ("plane points", str(labels[2])),
                   ("file", map_file)])
    if result.report.diverged:
        ctx.exit(EXIT_DIVERGED)


def main():
    cli()


if __name__ == '__main__':
    main()
