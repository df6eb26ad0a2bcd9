# mmlio/pipeline/runner.py
"""
End-to-end odometry run over a dataset.

A front-end worker loads sweeps, cuts the solid-state stream to the spinning
sweep intervals and slices the IMU; the back end (calling thread) does
preintegration, undistortion, feature extraction, fusion, tracking, keyframe
optimization and the pose graph. With `serial` both run on one thread.
"""

import logging
import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

from mmlio.errors import ConfigError, DivergenceError, EvaluationError
from mmlio.features.classify import extract_features
from mmlio.features.cloud import FRAME_IMU, FeatureCloud, merge_features, voxel_downsample
from mmlio.features.gating import detect_bad_frame
from mmlio.geom import NavState, Pose
from mmlio.imu.initialization import static_initialization
from mmlio.imu.preintegration import preintegrate
from mmlio.imu.undistort import undistort_scan
from mmlio.pipeline.mapexport import LABEL_EDGE, LABEL_PLANE
from mmlio.pipeline.metrics import evaluate
from mmlio.pipeline.report import FrameCounts, LoopClosure, RunReport, summarize_counts
from mmlio.posegraph.graph import PoseGraph, add_keyframe_node, default_information
from mmlio.posegraph.loop import detect_loop
from mmlio.posegraph.optimize import optimize_graph
from mmlio.precal.alignment import AlignmentQueue, align_time_domain, synthesize_timestamps
from mmlio.precal.calibration import ExtrinsicSet, calibrate_extrinsics
from mmlio.scan import SENSOR_SOLID_STATE, SENSOR_SPINNING
from mmlio.swo.config import select_keyframe
from mmlio.swo.localmap import LocalFeatureMap, update_local_map
from mmlio.swo.optimizer import optimize_window, track_frame
from mmlio.swo.prior import MarginalPrior, marginalize_oldest
from mmlio.swo.problem import Keyframe

logger = logging.getLogger(__name__)

MODE_SENSORS = {
    "hvi": (SENSOR_SPINNING, SENSOR_SOLID_STATE),
    "vi": (SENSOR_SPINNING,),
    "hi": (SENSOR_SOLID_STATE,),
}


@dataclass
class FrameInput:
    index: int
    t_start: float
    t_end: float
    imu: object
    v: object = None
    h: object = None
    load_ms: float = 0.0


@dataclass
class RunResult:
    report: RunReport
    graph: PoseGraph
    map_points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    map_labels: np.ndarray = field(default_factory=lambda: np.empty(0, np.uint8))
    keyframes: dict = field(default_factory=dict)


# --- set-up ---

def static_window(dataset, settings):
    duration = settings.pipeline.static_duration
    if duration is None:
        duration = dataset.manifest.static_duration
    return float(dataset.imu.t[0]), float(dataset.imu.t[0] + duration)


def resolve_extrinsics(dataset, settings, mode):
    """
    Extrinsics for the sensors of `mode` and where they came from: the
    parameter file, the manifest, or calibration on the stationary prefix.
    """
    T_h_to_i = dataset.T_h_to_i
    if mode == "hi":
        return ExtrinsicSet(T_h_to_i, Pose.identity()), "manifest"
    if settings.precal.T_v_to_h is not None:
        return ExtrinsicSet(T_h_to_i, Pose.from_record(settings.precal.T_v_to_h)), "settings"
    if dataset.T_v_to_h is not None:
        return ExtrinsicSet(T_h_to_i, dataset.T_v_to_h), "manifest"
    if dataset.manifest.extrinsics.T_v_to_i is not None:
        T_v_to_i = Pose.from_record(dataset.manifest.extrinsics.T_v_to_i)
        return ExtrinsicSet.from_v_to_i(T_v_to_i, T_h_to_i), "manifest"
    if mode == "vi":
        raise ConfigError("precal.T_v_to_h", "mode vi needs a known spinning extrinsic; "
                                             "set it or calibrate in mode hvi first")
    return calibrate(dataset, settings), "calibration"


def calibrate(dataset, settings):
    """Run the spinning/solid-state extrinsic calibration on the stationary prefix."""
    _, t_static = static_window(dataset, settings)
    streams = {}
    for sensor in (SENSOR_SPINNING, SENSOR_SOLID_STATE):
        if dataset.scan_count(sensor) == 0:
            raise ConfigError("pipeline.mode", f"calibration needs '{sensor}' scans")
        entries = dataset.manifest.sensors[sensor].scans
        still = [i for i, e in enumerate(entries) if e.t_end <= t_static + 1e-9]
        streams[sensor] = [dataset.load_scan(sensor, i)
                           for i in still[:settings.precal.n_frames]]
    n = min(len(streams[SENSOR_SPINNING]), len(streams[SENSOR_SOLID_STATE]))
    if n == 0:
        raise ConfigError("pipeline.static_duration", "no stationary frames to calibrate from")
    init = None if settings.precal.init is None else Pose.from_record(settings.precal.init)
    return calibrate_extrinsics(streams[SENSOR_SPINNING], streams[SENSOR_SOLID_STATE],
                                dataset.T_h_to_i, init, settings.gicp, n)


def initial_state(dataset, settings):
    t0, t1 = static_window(dataset, settings)
    if t1 - t0 <= 0.0:
        logger.warning("No stationary prefix; starting from the identity state")
        return NavState.identity()
    return static_initialization(dataset.imu, t0, t1)


# --- front end ---

def frame_inputs(dataset, mode):
    """FrameInput per sweep of the driving sensor, solid-state cut to spinning sweeps."""
    driver = SENSOR_SOLID_STATE if mode == "hi" else SENSOR_SPINNING
    fuse_h = mode == "hvi"
    imu = dataset.imu
    h_queue = AlignmentQueue()
    h_next = 0
    h_total = dataset.scan_count(SENSOR_SOLID_STATE) if fuse_h else 0
    t_prev = None
    for k in range(dataset.scan_count(driver)):
        start = time.perf_counter()
        entry = dataset.manifest.sensors[driver].scans[k]
        if entry.t_start < imu.t[0] or entry.t_end > imu.t[-1]:
            logger.debug(f"Sweep {driver}{k} outside the IMU span, skipped")
            continue
        scan = dataset.load_scan(driver, k)
        if driver == SENSOR_SPINNING:
            scan = synthesize_timestamps(scan)
        frame = FrameInput(k, scan.t_start, scan.t_end, None)
        setattr(frame, driver, scan)
        if fuse_h:
            while h_next < h_total and \
                    dataset.manifest.sensors[SENSOR_SOLID_STATE].scans[h_next].t_start < scan.t_end:
                h_queue.push(dataset.load_scan(SENSOR_SOLID_STATE, h_next))
                h_next += 1
            frame.h = align_time_domain(h_queue, scan)
        t0 = scan.t_start if t_prev is None else t_prev
        frame.imu = imu.window(t0, scan.t_end)
        t_prev = scan.t_end
        frame.load_ms = (time.perf_counter() - start) * 1e3
        yield frame


def _threaded(source, maxsize):
    """Run a generator on a worker thread behind a bounded queue."""
    channel = queue.Queue(maxsize=maxsize)
    stop = threading.Event()
    done = object()

    def work():
        try:
            for item in source:
                while not stop.is_set():
                    try:
                        channel.put(item, timeout=0.1)
                        break
                    except queue.Full:
                        continue
                if stop.is_set():
                    return
            channel.put(done)
        except Exception as exc:
            channel.put(exc)

    worker = threading.Thread(target=work, name="frontend", daemon=True)
    worker.start()
    try:
        while True:
            item = channel.get()
            if item is done:
                break
            if isinstance(item, Exception):
                raise item
            yield item
    finally:
        stop.set()


# --- back end ---

class Odometry:
    """Back-end state carried from frame to frame."""

    def __init__(self, settings, extr, gravity, init):
        self.settings = settings
        self.cfg = settings.swo
        self.extr = extr
        self.gravity = gravity
        self.state = init
        self.local_map = LocalFeatureMap(self.cfg.map_window)
        self.graph = PoseGraph()
        self.window = []
        self.prior = None
        self.kf_delta = None
        self.kf_t = None
        self.kf_bias = (init.b_a, init.b_g)
        self.kf_clouds = {}
        self.kf_rows = {}
        self.final_states = {}
        self.corrected = {}
        self.loops = []
        self.rows = []

    def _row(self, t, state):
        return [float(t)] + state.pose.as_record()

    def features(self, frame, delta, counts):
        """Deskewed, fused and downsampled IMU-frame features of one frame."""
        fp = self.settings.features
        F_v = F_h = None
        bad = False
        if frame.v is not None:
            scan = undistort_scan(frame.v, delta, self.state, self.gravity, self.extr.T_v_to_i)
            F_v = extract_features(scan, "spinning", fp)
            counts.v_raw, counts.v_edges, counts.v_planes = len(scan), F_v.n_edges, F_v.n_planes
        if frame.h is not None:
            scan = undistort_scan(frame.h, delta, self.state, self.gravity, self.extr.T_h_to_i)
            F_h = extract_features(scan, "solid_state", fp)
            counts.h_raw, counts.h_edges, counts.h_planes = len(scan), F_h.n_edges, F_h.n_planes
            bad = detect_bad_frame(F_h, fp)
            if bad:
                logger.warning(f"Frame {frame.index}: solid-state bad frame "
                               f"({F_h.n_edges} edges), excluded from fusion")
        counts.bad_frame = bad
        merged = merge_features(F_v, F_h, self.extr, bad)
        return voxel_downsample(merged, fp.voxel_leaf)

    def start(self, frame, features):
        kf = Keyframe(0, frame.t_end, features, None, self.state)
        self.window = [kf]
        self.prior = MarginalPrior.anchor(0, self.state)
        update_local_map(self.local_map, kf, self.state)
        self.kf_t = frame.t_end
        self.kf_rows[0] = len(self.rows)
        self.rows.append(self._row(frame.t_end, self.state))

    def step(self, frame, delta, features, counts):
        state, stats = track_frame(self.state, delta, features, self.local_map, self.cfg,
                                   self.gravity)
        counts.imu_only = stats.imu_only
        self.kf_delta = delta if self.kf_delta is None else self.kf_delta.compose(delta)
        self.state = state
        is_key = select_keyframe(self.kf_delta.rotation_angle(), frame.t_end - self.kf_t,
                                 self.cfg)
        if is_key:
            self._admit(frame, features)
            counts.keyframe = True
        self.rows.append(self._row(frame.t_end, self.state))
        if is_key:
            self.kf_rows[self.window[-1].kf_id] = len(self.rows) - 1

    def _admit(self, frame, features):
        kf_id = self.window[-1].kf_id + 1 if self.window else len(self.kf_clouds)
        kf = Keyframe(kf_id, frame.t_end, features, self.kf_delta, self.state)
        self.window.append(kf)
        states, stats = optimize_window(self.window, self.local_map, self.prior, self.cfg,
                                        self.gravity)
        for w, X in zip(self.window, states):
            w.state = X
            update_local_map(self.local_map, w, X)
        self.state = states[-1]
        logger.info(f"Keyframe {kf_id} at t={frame.t_end:.2f}: {features.n_edges} edges, "
                    f"{features.n_planes} planes, {stats.iterations} LM iterations")
        if len(self.window) >= self.cfg.window_size:
            self.prior = marginalize_oldest(self.window, self.prior, self.local_map, self.cfg,
                                            self.gravity)
            self._finalize(self.window.pop(0))
        self.kf_delta = None
        self.kf_t = frame.t_end
        self.kf_bias = (self.state.b_a, self.state.b_g)

    def _add_node(self, kf):
        """Graph node and odometry edge at the keyframe's final state; loop search from there."""
        cloud = np.concatenate([kf.features.edges, kf.features.planes])
        self.kf_clouds[kf.kf_id] = kf.features
        gp = self.settings.graph
        add_keyframe_node(self.graph, kf.kf_id, kf.state,
                          default_information(gp.odom_info_rot, gp.odom_info_trans), cloud)
        lp = self.settings.loop
        if not lp.enabled:
            return
        edge = detect_loop(self.graph, kf.kf_id, kf.state.pose, cloud, lp)
        if edge is None:
            return
        self.graph.add_edge(edge.i, edge.j, edge.measurement, edge.information, edge.kind)
        guess = self.graph.nodes[edge.i].between(kf.state.pose)
        self.loops.append(LoopClosure(i=edge.i, j=edge.j,
                                      correction_m=guess.distance_to(edge.measurement)))
        self.corrected = optimize_graph(self.graph, self.settings.graph)

    def _finalize(self, kf):
        self.final_states[kf.kf_id] = kf.state
        row = self.kf_rows.get(kf.kf_id)
        if row is not None and row < len(self.rows):
            self.rows[row] = self._row(kf.t, kf.state)
        self._add_node(kf)

    def finish(self):
        for kf in self.window:
            if not kf.state.is_finite():
                logger.warning(f"Keyframe {kf.kf_id} left out of the pose graph: non-finite state")
                continue
            self._finalize(kf)
        self.window = []

    def world_map(self):
        """Keyframe features in the world frame, graph-corrected where available."""
        points, labels = [], []
        for kf_id, cloud in self.kf_clouds.items():
            if kf_id in self.corrected:
                pose = self.corrected[kf_id]
            elif kf_id in self.final_states:
                pose = self.final_states[kf_id].pose
            else:
                continue
            points += [pose.apply(cloud.edges), pose.apply(cloud.planes)]
            labels += [np.full(cloud.n_edges, LABEL_EDGE, np.uint8),
                       np.full(cloud.n_planes, LABEL_PLANE, np.uint8)]
        if not points:
            return np.empty((0, 3)), np.empty(0, np.uint8)
        return np.concatenate(points), np.concatenate(labels)


def run_pipeline(dataset, settings=None, progress=False):
    """Run odometry over `dataset` and return the RunResult."""
    from mmlio.settings import Settings

    settings = settings or Settings()
    mode = settings.pipeline.mode
    for sensor in MODE_SENSORS[mode]:
        if dataset.scan_count(sensor) == 0:
            raise ConfigError("pipeline.mode", f"mode {mode} needs '{sensor}' scans")
    extr, source = resolve_extrinsics(dataset, settings, mode)
    gravity = dataset.gravity
    odo = Odometry(settings, extr, gravity, initial_state(dataset, settings))

    report = RunReport(mode=mode, dataset=str(dataset.root), settings=settings.flat())
    report.extrinsics = {"source": source, **extr.as_report()} if mode != "hi" \
        else {"source": source, "T_h_to_i": extr.T_h_to_i.as_record()}
    timing = dict(preprocess=0.0, features=0.0, optimization=0.0)
    frames = frame_inputs(dataset, mode)
    if not settings.pipeline.serial:
        frames = _threaded(frames, settings.pipeline.queue_size)
    total = dataset.scan_count(SENSOR_SOLID_STATE if mode == "hi" else SENSOR_SPINNING)

    count = 0
    for frame in tqdm(frames, total=total, desc=f"run {mode}", unit="frame",
                      disable=not progress):
        counts = FrameCounts(frame=frame.index, t=frame.t_end)
        try:
            t_a = time.perf_counter()
            delta = preintegrate(frame.imu, odo.kf_bias, settings.imu)
            t_b = time.perf_counter()
            features = odo.features(frame, delta, counts)
            t_c = time.perf_counter()
            if count == 0:
                odo.start(frame, features)
                counts.keyframe = True
            else:
                odo.step(frame, delta, features, counts)
            t_d = time.perf_counter()
            if not odo.state.is_finite() or odo.state.magnitude() > settings.swo.divergence_norm:
                raise DivergenceError(f"state magnitude {odo.state.magnitude():.3g}")
        except DivergenceError as exc:
            logger.error(f"Odometry diverged at frame {frame.index}: {exc}")
            report.diverged = True
            report.last_good_frame = report.frame_counts[-1].frame if report.frame_counts \
                else None
            odo.rows = odo.rows[:count]
            break
        timing["preprocess"] += frame.load_ms + (t_b - t_a) * 1e3
        timing["features"] += (t_c - t_b) * 1e3
        timing["optimization"] += (t_d - t_c) * 1e3
        report.frame_counts.append(counts)
        count += 1

    odo.finish()
    report.frames = count
    report.keyframes = len(odo.graph)
    report.bad_frames = sum(c.bad_frame for c in report.frame_counts)
    report.imu_only_frames = sum(c.imu_only for c in report.frame_counts)
    report.loop_closures = odo.loops
    report.trajectory = odo.rows
    report.feature_summary = summarize_counts(report.frame_counts)
    report.timing_ms = {k: v / max(count, 1) for k, v in timing.items()}
    report.timing_ms["total"] = sum(report.timing_ms.values())
    if not report.diverged:
        report.last_good_frame = report.frame_counts[-1].frame if report.frame_counts else None
        if dataset.groundtruth is not None and odo.rows:
            try:
                report.metrics = evaluate(np.array(odo.rows), dataset.groundtruth,
                                          settings.pipeline.eval_max_dt)
            except EvaluationError as exc:
                logger.warning(f"Evaluation skipped: {exc}")
    logger.info(f"Run finished: {count} frames, {report.keyframes} keyframes, "
                f"{report.bad_frames} bad frames, diverged={report.diverged}")
    points, labels = odo.world_map()
    return RunResult(report, odo.graph, points, labels, dict(odo.final_states))
