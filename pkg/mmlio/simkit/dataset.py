# mmlio/simkit/dataset.py
import logging
import os

import numpy as np
from tqdm import tqdm

from mmlio.errors import DatasetError
from mmlio.geom import Pose
from mmlio.imu.measurements import ImuSeries
from mmlio.pipeline.dataset import (
    GROUNDTRUTH_FILE, GROUNDTRUTH_HEADER, IMU_FILE, IMU_HEADER, Extrinsics, Manifest,
    ScanEntry, SensorStream, encode_scan, write_csv, write_manifest,
)
from mmlio.simkit.sensors import SOLID_STATE, SPINNING, preset
from mmlio.simkit.simulate import GRAVITY, ground_truth as sample_ground_truth
from mmlio.simkit.simulate import simulate_imu, simulate_scan

logger = logging.getLogger(__name__)


def write_dataset(scans, imu, ground_truth, dir, models=None, T_h_to_i=None, T_v_to_h=None,
                  gravity=GRAVITY, groundtruth_extrinsics=None, **manifest_extra):
    """
    Write scans (grouped by their sensor id), an IMU series and optional
    ground-truth rows (t, px, py, pz, qw, qx, qy, qz) as a dataset directory.
    Returns the Manifest.
    """
    scan_dir = os.path.join(dir, "scans")
    try:
        os.makedirs(scan_dir, exist_ok=True)
    except OSError as e:
        raise DatasetError(scan_dir, f"cannot create directory: {e.strerror or e}") from e

    models = dict(models or {})
    streams = {}
    counters = {}
    for scan in scans:
        sensor = scan.sensor
        if sensor not in models:
            models[sensor] = preset(SPINNING if sensor == "v" else SOLID_STATE)
        stream = streams.setdefault(sensor, SensorStream(model=models[sensor]))
        k = counters.get(sensor, 0)
        counters[sensor] = k + 1
        rel = os.path.join("scans", f"{sensor}_{k:06d}.bin")
        path = os.path.join(dir, rel)
        try:
            with open(path, "wb") as f:
                f.write(encode_scan(scan))
        except OSError as e:
            raise DatasetError(path, f"cannot write scan: {e.strerror or e}") from e
        stream.scans.append(ScanEntry(file=rel, t_start=scan.t_start, t_end=scan.t_end,
                                      points=len(scan)))

    imu = ImuSeries.coerce(imu)
    write_csv(os.path.join(dir, IMU_FILE), np.column_stack([imu.t, imu.gyro, imu.accel]),
              IMU_HEADER)
    gt_file = None
    if ground_truth is not None:
        gt_file = GROUNDTRUTH_FILE
        write_csv(os.path.join(dir, gt_file), ground_truth, GROUNDTRUTH_HEADER)

    extrinsics = Extrinsics(
        T_h_to_i=(T_h_to_i or Pose.identity()).as_record(),
        T_v_to_h=None if T_v_to_h is None else T_v_to_h.as_record(),
    )
    manifest = Manifest(
        sensors=streams, imu=IMU_FILE, groundtruth=gt_file,
        gravity=[float(g) for g in gravity], extrinsics=extrinsics,
        groundtruth_extrinsics=groundtruth_extrinsics, **manifest_extra,
    )
    write_manifest(dir, manifest)
    logger.info(f"Wrote dataset {dir}: " + ", ".join(
        f"{s}={len(st.scans)} scans" for s, st in sorted(streams.items())) + f", {len(imu)} IMU samples")
    return manifest


def _sweep_starts(traj, period, offset):
    starts = []
    t = traj.t_min + offset
    while t + period <= traj.t_max + 1e-9:
        starts.append(t)
        t = traj.t_min + offset + len(starts) * period
    return starts


def simulate_dataset(scenario, dir, seed=0, imu_noise=None, imu_bias=None, sensors=("v", "h"),
                     include_extrinsic=False, progress=False):
    """
    Simulate every stream of a scenario (spinning sweeps from t=0, solid-state
    sweeps offset by `scenario.h_offset`, IMU at `scenario.imu_rate`) and
    write it with write_dataset. The spinning→solid-state extrinsic is only
    written when `include_extrinsic` is set; otherwise it must be calibrated.
    """
    traj = scenario.traj
    jobs = []
    for sensor in sensors:
        model = scenario.sensors[sensor]
        offset = 0.0 if sensor == "v" else scenario.h_offset
        jobs += [(sensor, t) for t in _sweep_starts(traj, model.period, offset)]
    jobs.sort(key=lambda job: (job[1], job[0]))

    scans = []
    for sensor, t in tqdm(jobs, desc=f"simulate {scenario.name}", unit="sweep",
                          disable=not progress):
        scans.append(simulate_scan(scenario.world, scenario.sensors[sensor], traj, t,
                                   extrinsic=scenario.extrinsic(sensor), noise_seed=seed))

    imu = simulate_imu(traj, scenario.imu_rate, bias=imu_bias, noise=imu_noise,
                       gravity=scenario.gravity, seed=seed)
    gt = sample_ground_truth(traj, imu.t)
    truth = Extrinsics(T_h_to_i=scenario.T_h_to_i.as_record(),
                       T_v_to_h=scenario.T_v_to_h.as_record(),
                       T_v_to_i=scenario.T_v_to_i.as_record())
    return write_dataset(
        scans, imu, gt, dir,
        models={s: scenario.sensors[s] for s in sensors},
        T_h_to_i=scenario.T_h_to_i,
        T_v_to_h=scenario.T_v_to_h if include_extrinsic else None,
        gravity=scenario.gravity,
        groundtruth_extrinsics=truth,
        scene=scenario.name, seed=seed, imu_rate=scenario.imu_rate,
        static_duration=scenario.static_duration,
    )
