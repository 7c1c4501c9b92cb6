"""Scenario construction, trial execution, metrics, and Monte-Carlo sweeps.

A trial builds a circular ground-truth trajectory with landmarks scattered
in a band around the path, generates one measurement stream, and drives the
selected estimators over it.  In ``both`` mode the two estimators consume
byte-identical frames, so their errors are directly comparable.

Two world modes are supported.  ``exact`` propagates the true pose in closed
form and keeps landmarks static; it is the physical simulation used for the
noisy comparison and timing experiments.  ``group`` additionally transports
the true outputs with the same zero-order-hold group velocity the observer
integrates, which makes the observer's error system exactly autonomous in
discrete time; it is the mode that isolates the error dynamics from
integrator truncation and is used for the noise-free convergence experiment.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import ekf as ekf_mod
from . import observer as obs_mod
from .errors import InsufficientDataError
from .group import Output, TotalState, predicted_flow
from .lie import Pose, Twist, se3_exp, so3_exp, so3_log
from .system import MeasurementFrame, SystemParams, measure, propagate, sense

# steps excluded from timing statistics while caches and allocators warm up
WARMUP_STEPS = 5

# reference bearings are resampled while within this angle of the antipode of
# the first measured bearing; exact antipodes sit on the unstable equilibrium
# and nearby starts give arbitrarily slow transients
ANTIPODE_CAP = 2.4


@dataclass(frozen=True)
class Scenario:
    """Trajectory, landmark band, gains, and run options for one experiment."""

    linear_velocity: tuple[float, float, float]
    angular_velocity: tuple[float, float, float]
    band_inner: float
    band_outer: float
    duration: float
    dt: float
    params: SystemParams
    k_bearing: float
    k_depth: float
    k_pose: float
    estimator: str = "observer"      # observer | ekf | both
    integrator: str = "geometric"    # geometric | additive
    flow_mode: str = "analytic"      # analytic | finite-difference
    world: str = "exact"             # exact | group
    lifecycle: bool = False          # landmarks join the map on first sight

    def __post_init__(self):
        # zero duration is allowed and yields a single-sample record
        if self.duration < 0 or self.dt <= 0:
            raise ValueError("duration must be non-negative and dt positive")
        if not 0 < self.band_inner < self.band_outer:
            raise ValueError("need 0 < band_inner < band_outer")
        if self.estimator not in ("observer", "ekf", "both"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.integrator not in ("geometric", "additive"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.flow_mode not in ("analytic", "finite-difference"):
            raise ValueError(f"unknown flow mode {self.flow_mode!r}")
        if self.world not in ("exact", "group"):
            raise ValueError(f"unknown world mode {self.world!r}")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def twist(self) -> Twist:
        return Twist(np.asarray(self.angular_velocity, dtype=float),
                     np.asarray(self.linear_velocity, dtype=float))


def convergence_scenario(n: int = 10, duration: float = 100.0, dt: float = 0.5,
                         seed: int = 0) -> Scenario:
    """Noise-free convergence study: full visibility, random reference."""
    return Scenario(
        linear_velocity=(0.1, 0.0, 0.0),
        angular_velocity=(0.0, 0.0, 0.02 * math.pi),
        band_inner=0.5, band_outer=1.0,
        duration=duration, dt=dt,
        params=SystemParams(n=n, rng_seed=seed),
        k_bearing=0.05, k_depth=0.02, k_pose=0.03,
        estimator="observer", world="group", lifecycle=False)


def comparison_scenario(n: int = 50, duration: float = 100.0, dt: float = 0.5,
                        seed: int = 0) -> Scenario:
    """Noisy estimator comparison: 1 m sensing range, landmark lifecycle."""
    return Scenario(
        linear_velocity=(0.1, 0.0, 0.0),
        angular_velocity=(0.0, 0.0, 0.02 * math.pi),
        band_inner=0.5, band_outer=1.0,
        duration=duration, dt=dt,
        params=SystemParams(n=n, sensor_range=1.0,
                            var_linear_vel=0.2, var_angular_vel=0.1,
                            var_flow=0.02, var_bearing=0.01,
                            var_inverse_depth=0.4, rng_seed=seed),
        k_bearing=0.25, k_depth=0.1, k_pose=0.1,
        estimator="both", world="exact", lifecycle=True)


def build_scenario(scenario: Scenario, rng: np.random.Generator) -> TotalState:
    """Initial state: robot at the origin, landmarks in a band around the path."""
    n = scenario.params.n
    v = np.asarray(scenario.linear_velocity, dtype=float)
    w = np.asarray(scenario.angular_velocity, dtype=float)
    speed, rate = np.linalg.norm(v), np.linalg.norm(w)
    offsets = rng.uniform(scenario.band_inner, scenario.band_outer, size=n)
    sides = rng.choice([-1.0, 1.0], size=n)
    if rate > 1e-9 and np.linalg.norm(np.cross(w, v)) > 1e-12:
        # circular path: centre sits at (omega x v) / rate^2 from the start
        centre = np.cross(w, v) / rate ** 2
        radius = float(np.linalg.norm(centre))
        axis = w / rate
        e1 = -centre / radius
        e2 = np.cross(axis, e1)
        angles = rng.uniform(0.0, 2.0 * np.pi, size=n)
        radii = radius + sides * offsets
        points = centre + radii[:, None] * (np.cos(angles)[:, None] * e1
                                            + np.sin(angles)[:, None] * e2)
    else:
        # straight path: scatter sideways along the travelled segment
        direction = v / speed if speed > 0 else np.array([1.0, 0.0, 0.0])
        normal = np.cross(np.array([0.0, 0.0, 1.0]), direction)
        if np.linalg.norm(normal) < 1e-9:
            normal = np.array([1.0, 0.0, 0.0])
        normal /= np.linalg.norm(normal)
        along = rng.uniform(0.0, scenario.duration, size=n) * speed
        points = along[:, None] * direction + (sides * offsets)[:, None] * normal
    return TotalState(Pose.identity(), points)


def sample_reference(scenario: Scenario, rng: np.random.Generator,
                     initial_output: Output) -> TotalState:
    """Random reference configuration for a fully-initialised observer.

    Landmarks sit at sane distances (0.5 to 2 m) from the reference pose, and
    reference bearings are kept away from the antipodes of the first measured
    bearings (see ANTIPODE_CAP).
    """
    pose = Pose.random(rng)
    n = initial_output.n
    cos_cap = math.cos(ANTIPODE_CAP)
    bearings = np.zeros((n, 3))
    for i in range(n):
        while True:
            d = rng.normal(size=3)
            d /= np.linalg.norm(d)
            if d @ initial_output.bearings[i] > cos_cap:
                bearings[i] = d
                break
    distances = rng.uniform(0.5, 2.0, size=n)
    return TotalState(pose, pose.apply(bearings * distances[:, None]))


def rmse(estimate: TotalState, truth: TotalState,
         mask: np.ndarray | None = None) -> float:
    """Root-mean-square landmark error in body-fixed relative coordinates.

    Both clouds are expressed relative to their own pose, which makes the
    metric invariant under the unobservable rigid-body gauge freedom.
    """
    return _rmse_raw(estimate.pose, estimate.landmarks, truth, mask)


def _rmse_raw(est_pose: Pose, est_points: np.ndarray, truth: TotalState,
              mask: np.ndarray | None) -> float:
    if mask is None:
        mask = np.ones(truth.n, dtype=bool)
    if not mask.any():
        return float("nan")
    body_est = (est_points[mask] - est_pose.translation) @ est_pose.rotation
    body_true = (truth.landmarks[mask] - truth.pose.translation) @ truth.pose.rotation
    return float(np.sqrt(np.mean(np.sum((body_est - body_true) ** 2, axis=1))))


def rmse_aligned(estimate: TotalState, truth: TotalState,
                 mask: np.ndarray | None = None) -> float:
    """Inertial-frame RMSE after a best-fit rigid alignment (sensitivity metric)."""
    if mask is None:
        mask = np.ones(truth.n, dtype=bool)
    if not mask.any():
        return float("nan")
    a = estimate.landmarks[mask]
    b = truth.landmarks[mask]
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    h = (a - ca).T @ (b - cb)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    aligned = (a - ca) @ rot.T + cb
    return float(np.sqrt(np.mean(np.sum((aligned - b) ** 2, axis=1))))


@dataclass(frozen=True, eq=False)
class TrialDetails:
    """Optional per-frame extras recorded for single-run inspection."""

    est_translation: np.ndarray    # (T+1, 3)
    est_rotation_vec: np.ndarray   # (T+1, 3)
    innovation_pose: np.ndarray    # (T,), twist norm of the pose correction
    innovation_bearing: np.ndarray  # (T,), max correction rate over landmarks
    innovation_depth: np.ndarray   # (T,)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """Time series and counters from one estimator over one trial."""

    estimator: str
    seed: int
    times: np.ndarray             # (T+1,)
    bearing_storage: np.ndarray   # (T+1, n), NaN where not measured
    depth_storage: np.ndarray     # (T+1, n)
    rmse: np.ndarray              # (T+1,), NaN until a landmark exists
    step_seconds: np.ndarray      # (T,)
    degeneracy_count: int
    clamp_count: int
    update_failures: int = 0
    details: TrialDetails | None = None

    def __post_init__(self):
        t = self.times.shape[0]
        if self.bearing_storage.shape[0] != t or self.depth_storage.shape[0] != t \
                or self.rmse.shape[0] != t or self.step_seconds.shape[0] != t - 1:
            raise ValueError("inconsistent series lengths")
        for series in (self.bearing_storage, self.depth_storage):
            vals = series[~np.isnan(series)]
            if vals.size and vals.min() < 0:
                raise ValueError("storage components must be non-negative")

    @property
    def median_step_time(self) -> float:
        timed = self.step_seconds[WARMUP_STEPS:]
        if timed.size == 0:
            timed = self.step_seconds
        return float(np.median(timed)) if timed.size else float("nan")

    @property
    def rmse_final(self) -> float:
        return float(self.rmse[-1])

    @property
    def rmse_mean(self) -> float:
        vals = self.rmse[~np.isnan(self.rmse)]
        return float(vals.mean()) if vals.size else float("nan")


class _ExactWorld:
    """Static landmarks; the pose integrates the body twist in closed form."""

    def __init__(self, state: TotalState):
        self.state = state

    def advance(self, twist: Twist, dt: float) -> None:
        self.state = propagate(self.state, twist, dt)


class _GroupWorld:
    """Outputs transported by the held group velocity between frames.

    The pose still follows the exact closed-form trajectory; landmark
    positions are re-derived from the transported outputs each frame (they
    move by O(dt^2) per step relative to the static world).
    """

    def __init__(self, state: TotalState):
        out = measure(state)
        self.pose = state.pose
        self.bearings = out.bearings
        self.inverse_depths = out.inverse_depths
        self.state = state

    def advance(self, twist: Twist, dt: float) -> None:
        out = Output(self.bearings, self.inverse_depths)
        flows = predicted_flow(out, twist)
        rot = so3_exp(np.cross(flows, self.bearings), -dt)
        bearings = np.einsum("nij,nj->ni", rot, self.bearings)
        bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
        rates = self.inverse_depths * (self.bearings @ twist.linear)
        depths = self.inverse_depths * np.exp(rates * dt)
        self.pose = self.pose @ se3_exp(twist, dt)
        self.bearings = bearings
        self.inverse_depths = depths
        self.state = TotalState(self.pose, self.pose.apply(bearings / depths[:, None]))


def run_trial(scenario: Scenario, seed: int | None = None,
              estimator: str | None = None, record_details: bool = False):
    """Run one seeded trial.

    Returns a TrialRecord, or a dict of them keyed by estimator name when the
    effective estimator selection is ``both`` (both consume the same frames).
    """
    name = estimator or scenario.estimator
    names = ("observer", "ekf") if name == "both" else (name,)
    records = _run_shared(scenario, seed, names, record_details)
    return records if name == "both" else records[names[0]]


def _run_shared(scenario: Scenario, seed: int | None, names: tuple[str, ...],
                record_details: bool) -> dict[str, TrialRecord]:
    seed = scenario.params.rng_seed if seed is None else seed
    layout_seq, ref_seq, noise_seq = np.random.SeedSequence(seed).spawn(3)
    layout_rng = np.random.default_rng(layout_seq)
    noise_rng = np.random.default_rng(noise_seq)

    initial = build_scenario(scenario, layout_rng)
    n = scenario.params.n
    steps = scenario.steps
    times = np.arange(steps + 1) * scenario.dt
    twist = scenario.twist()
    world = _GroupWorld(initial) if scenario.world == "group" else _ExactWorld(initial)

    observers: dict[str, object] = {}
    for est in names:
        if est == "observer":
            if scenario.lifecycle:
                observers[est] = obs_mod.empty(initial.pose, n, scenario.k_bearing,
                                               scenario.k_depth, scenario.k_pose)
            else:
                reference = sample_reference(scenario, np.random.default_rng(ref_seq),
                                             measure(initial))
                observers[est] = obs_mod.from_reference(reference, scenario.k_bearing,
                                                        scenario.k_depth,
                                                        scenario.k_pose)
        elif est == "ekf":
            observers[est] = ekf_mod.create(initial.pose, n)
        else:
            raise ValueError(f"unknown estimator {est!r}")

    # a landmark joins the map only from a range-consistent sighting: a noisy
    # inverse depth far below 1/range would triangulate an in-range target at
    # a wildly inconsistent distance (clamped outliers reach 1/Z_MIN metres)
    init_floor = (0.5 / scenario.params.sensor_range
                  if math.isfinite(scenario.params.sensor_range) else 0.0)

    series = {est: {"l_y": np.full((steps + 1, n), np.nan),
                    "l_z": np.full((steps + 1, n), np.nan),
                    "rmse": np.full(steps + 1, np.nan),
                    "dt_step": np.zeros(steps)} for est in names}
    details = {est: {"trans": np.full((steps + 1, 3), np.nan),
                     "rotvec": np.full((steps + 1, 3), np.nan),
                     "inn_pose": np.full(steps, np.nan),
                     "inn_bear": np.full(steps, np.nan),
                     "inn_depth": np.full(steps, np.nan)} for est in names} \
        if record_details else None
    clamp_total = 0
    prev_frame: MeasurementFrame | None = None

    for k in range(steps + 1):
        frame = sense(world.state, twist, scenario.params, noise_rng,
                      prev_frame=prev_frame, flow_mode=scenario.flow_mode,
                      timestamp=float(times[k]))
        clamp_total += frame.clamp_count
        new_ids: dict[str, list[int]] = {est: [] for est in names}

        for est in names:
            st = observers[est]
            if est == "observer":
                for i in np.flatnonzero(frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.FROZEN)):
                    st = obs_mod.unfreeze(st, int(i))
                for i in np.flatnonzero(~frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.ACTIVE)):
                    st = obs_mod.freeze(st, int(i))
                for i in np.flatnonzero(frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.UNINITIALIZED)):
                    if frame.inverse_depths[i] >= init_floor:
                        st = obs_mod.initialize_landmark(st, int(i), frame)
                        new_ids[est].append(int(i))
            else:
                for i in np.flatnonzero(frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.FROZEN)):
                    st = ekf_mod.ekf_unfreeze(st, int(i))
                for i in np.flatnonzero(~frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.ACTIVE)):
                    st = ekf_mod.ekf_freeze(st, int(i))
                for i in np.flatnonzero(frame.visible
                                        & (st.status == obs_mod.LandmarkStatus.UNINITIALIZED)):
                    if frame.inverse_depths[i] >= init_floor:
                        st = ekf_mod.ekf_init_landmark(st, int(i), frame,
                                                       scenario.params.var_bearing,
                                                       scenario.params.var_inverse_depth)
                        new_ids[est].append(int(i))
            observers[est] = st

        # record with corrections from frames < k only (both estimators causal)
        for est in names:
            st = observers[est]
            if est == "observer":
                l_y, l_z = obs_mod.lyapunov_components(st, frame)
                series[est]["l_y"][k] = l_y
                series[est]["l_z"][k] = l_z
                pose, points = obs_mod.estimated_positions(st)
                series[est]["rmse"][k] = _rmse_raw(pose, points, world.state,
                                                   st.initialized)
            else:
                mask = st.status != obs_mod.LandmarkStatus.UNINITIALIZED
                series[est]["rmse"][k] = _rmse_raw(st.pose, st.landmarks,
                                                   world.state, mask)
                pose = st.pose
            if record_details:
                details[est]["trans"][k] = pose.translation
                details[est]["rotvec"][k] = so3_log(pose.rotation)

        if k == steps:
            break

        for est in names:
            st = observers[est]
            if est == "observer":
                if record_details:
                    mask = obs_mod._participating(st, frame)
                    if mask.any():
                        innov = obs_mod.innovation(st, frame)
                        details[est]["inn_pose"][k] = np.linalg.norm(
                            innov.pose_correction.as_vector())
                        details[est]["inn_bear"][k] = np.linalg.norm(
                            innov.bearing_corrections, axis=1).max()
                        details[est]["inn_depth"][k] = np.abs(
                            innov.depth_corrections).max()
                start = time.perf_counter()
                st = obs_mod.step(st, frame, scenario.dt, scenario.integrator)
                series[est]["dt_step"][k] = time.perf_counter() - start
            else:
                exclude = tuple(new_ids[est])
                start = time.perf_counter()
                st = _ekf_consume(st, frame, scenario, exclude)
                series[est]["dt_step"][k] = time.perf_counter() - start
            observers[est] = st

        world.advance(twist, scenario.dt)
        prev_frame = frame

    out: dict[str, TrialRecord] = {}
    for est in names:
        st = observers[est]
        degeneracy = st.degeneracy_count if est == "observer" else 0
        failures = st.update_failures if est == "ekf" else 0
        det = None
        if record_details:
            det = TrialDetails(details[est]["trans"], details[est]["rotvec"],
                               details[est]["inn_pose"], details[est]["inn_bear"],
                               details[est]["inn_depth"])
        out[est] = TrialRecord(
            estimator=est, seed=int(seed), times=times,
            bearing_storage=series[est]["l_y"], depth_storage=series[est]["l_z"],
            rmse=series[est]["rmse"], step_seconds=series[est]["dt_step"],
            degeneracy_count=degeneracy, clamp_count=clamp_total,
            update_failures=failures, details=det)
    return out


def _ekf_consume(st, frame: MeasurementFrame, scenario: Scenario,
                 exclude: tuple[int, ...]):
    """Per-frame filter work: correct with the frame, predict to the next one."""
    if any(lm not in exclude and frame.visible[lm]
           for lm in st.order
           if st.status[lm] == obs_mod.LandmarkStatus.ACTIVE):
        st = _ekf_update_excluding(st, frame, scenario, exclude)
    return ekf_mod.ekf_predict(st, frame.twist, scenario.dt,
                               scenario.params.var_angular_vel,
                               scenario.params.var_linear_vel)


def _ekf_update_excluding(st, frame, scenario, exclude):
    if exclude:
        # hide just-initialised landmarks from the frame they were born from
        visible = frame.visible.copy()
        for lm in exclude:
            visible[lm] = False
        frame = MeasurementFrame(timestamp=frame.timestamp, twist=frame.twist,
                                 visible=visible, bearings=frame.bearings,
                                 inverse_depths=frame.inverse_depths,
                                 flows=frame.flows, flow_valid=frame.flow_valid,
                                 clamp_count=frame.clamp_count)
    return ekf_mod.ekf_update(st, frame, scenario.params.var_bearing,
                              scenario.params.var_inverse_depth)


@dataclass(frozen=True, eq=False)
class SweepEntry:
    """Per (estimator, landmark count) summary over independent trials."""

    estimator: str
    landmark_count: int
    seeds: tuple[int, ...]
    final_rmse: np.ndarray
    mean_rmse: np.ndarray
    median_step_seconds: np.ndarray
    degeneracy_counts: np.ndarray


@dataclass(frozen=True, eq=False)
class SweepResult:
    landmark_counts: tuple[int, ...]
    trials_per_count: int
    entries: tuple[SweepEntry, ...]

    def entry(self, estimator: str, landmark_count: int) -> SweepEntry:
        for e in self.entries:
            if e.estimator == estimator and e.landmark_count == landmark_count:
                return e
        raise KeyError((estimator, landmark_count))

    def timing_curve(self, estimator: str) -> tuple[np.ndarray, np.ndarray]:
        """(landmark counts, median-over-trials of median step seconds)."""
        ns = np.array(self.landmark_counts, dtype=float)
        med = np.array([np.median(self.entry(estimator, int(n)).median_step_seconds)
                        for n in self.landmark_counts])
        return ns, med


def _trial_seed(master: int, landmark_count: int, trial: int) -> int:
    seq = np.random.SeedSequence([int(master), int(landmark_count), int(trial)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _sweep_job(args):
    scenario, seed, names = args
    records = _run_shared(scenario, seed, names, record_details=False)
    return {est: (rec.rmse_final, rec.rmse_mean, rec.median_step_time,
                  rec.degeneracy_count + rec.update_failures)
            for est, rec in records.items()}


def run_sweep(base: Scenario, landmark_counts, trials: int,
              estimators: tuple[str, ...] = ("observer", "ekf"),
              jobs: int = 1) -> SweepResult:
    """Independent seeded trials over a grid of landmark counts.

    Results are merged in deterministic (count, trial) order regardless of
    the worker pool size.
    """
    counts = tuple(int(c) for c in landmark_counts)
    if any(c < 1 for c in counts) or trials < 1:
        raise ValueError("landmark counts and trial count must be positive")
    master = base.params.rng_seed
    scenarios = {c: replace(base, params=replace(base.params, n=c)) for c in counts}
    # trials interleave across counts so a transiently slow machine window
    # cannot bias all timing samples of one landmark count
    jobspec = []
    keys = []
    for t in range(trials):
        for c in counts:
            jobspec.append((scenarios[c], _trial_seed(master, c, t),
                            tuple(estimators)))
            keys.append((c, t))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_job, jobspec))
    else:
        results = [_sweep_job(j) for j in jobspec]
    by_key = dict(zip(keys, results))

    entries = []
    for c in counts:
        rows = [by_key[(c, t)] for t in range(trials)]
        seeds = tuple(_trial_seed(master, c, t) for t in range(trials))
        for est in estimators:
            entries.append(SweepEntry(
                estimator=est, landmark_count=c, seeds=seeds,
                final_rmse=np.array([r[est][0] for r in rows]),
                mean_rmse=np.array([r[est][1] for r in rows]),
                median_step_seconds=np.array([r[est][2] for r in rows]),
                degeneracy_counts=np.array([r[est][3] for r in rows])))
    return SweepResult(landmark_counts=counts, trials_per_count=trials,
                       entries=tuple(entries))


@dataclass(frozen=True, eq=False)
class ComplexityFit:
    """Least-squares fits t = a + b n and t = a + b n + c n^2."""

    linear_coefficients: np.ndarray
    quadratic_coefficients: np.ndarray
    linear_r2: float
    quadratic_r2: float
    linear_aic: float
    quadratic_aic: float
    preferred: str


def complexity_fit(landmark_counts, step_times) -> ComplexityFit:
    """Classify a timing curve as linear or quadratic in the landmark count."""
    ns = np.asarray(landmark_counts, dtype=float)
    ts = np.asarray(step_times, dtype=float)
    if np.unique(ns).size < 4:
        raise InsufficientDataError("need at least 4 distinct landmark counts")
    m = ns.size
    scale = max(np.abs(ts).max(), 1e-300)
    floor = m * (1e-12 * scale) ** 2

    def fit(degree):
        cols = [np.ones_like(ns), ns] + ([ns ** 2] if degree == 2 else [])
        a = np.stack(cols, axis=1)
        coef, *_ = np.linalg.lstsq(a, ts, rcond=None)
        rss = float(np.sum((a @ coef - ts) ** 2))
        tss = float(np.sum((ts - ts.mean()) ** 2))
        r2 = 1.0 if tss < floor else 1.0 - rss / tss
        aic = m * math.log(max(rss, floor) / m) + 2.0 * (degree + 1)
        return coef, r2, aic

    lin_coef, lin_r2, lin_aic = fit(1)
    quad_coef, quad_r2, quad_aic = fit(2)
    preferred = "linear" if lin_aic <= quad_aic else "quadratic"
    return ComplexityFit(lin_coef, quad_coef, lin_r2, quad_r2, lin_aic, quad_aic,
                         preferred)
