"""Scenario runner: truth, synthetic scans, ICP and the filter in one loop.

Two seeding policies are supported. In closed loop (``"cl"``) each ICP run
starts from the filter's propagated pose prediction; in open loop
(``"ol"``) it starts from the previous ICP output and the filter only
consumes the ICP poses.
"""

import csv
import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import quat, shapes
from .dynamics import OrbitParams, TargetTruth, integrate_truth, observed_pose
from .ekf import Measurement, NoiseConfig, correct, default_covariance, ekf_propagate, initial_state
from .errors import ConfigError, FilterDivergence, MeasurementRejected, TumbleTrackError
from .icp import IcpOptions, Pose, SurfaceModel, icp_register
from .sensor import FaultSchedule, apply_faults, sample_scan

log = logging.getLogger(__name__)

# named random streams derived from the scenario seed
STREAM_TRUTH, STREAM_SCAN, STREAM_INIT, STREAM_MC = 0, 1, 2, 3

PRIOR_KEYS = ("attitude", "omega", "p", "r_c", "v_c", "rho", "eta")


@dataclass
class ModelSpec:
    shape: str = "satellite"
    size: float = 1.0
    spacing: float = 0.03
    seed: int = 0


@dataclass
class TruthConfig:
    mu0: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 1.0])
    omega0: list = field(default_factory=lambda: [0.05, 0.04, 0.06])
    r_c0: list = field(default_factory=lambda: [0.3, 6.0, -0.2])
    v_c0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    rho: list = field(default_factory=lambda: [-0.15, 0.0, 0.0])
    eta: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 1.0])
    inertia: list = field(default_factory=lambda: [4.0, 8.0, 5.0])
    sigma_tau: float = 0.0
    dt: float = 0.01


@dataclass
class OrbitConfig:
    n: float = 0.0011
    mu_e: float = 3.986004418e14


@dataclass
class SensorConfig:
    rate_hz: float = 2.0
    points: int = 500
    sigma: float = 0.005
    cull: bool = True
    blackouts: list = field(default_factory=list)


@dataclass
class IcpConfig:
    d_min: float | None = None  # None: (2 sigma)^2 of the sensor noise
    max_iter: int = 50


@dataclass
class FilterConfig:
    sigma_tau: float = 1e-4
    sigma_f: float = 1e-4
    R: list = field(default_factory=lambda: [1e-4] * 3 + [2.5e-5] * 3)
    prior_sigma: dict = field(default_factory=lambda: dict(
        attitude=0.1, omega=0.1, p=0.5, r_c=0.5, v_c=0.1, rho=0.2, eta=0.1))
    omega0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    p0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    rho0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    eta0: list = field(default_factory=lambda: [0.0, 0.0, 0.0, 1.0])
    substeps: int = 10


@dataclass
class InitConfig:
    """Error of the coarse pose that seeds the very first ICP run."""

    rot_error_deg: float = 2.0
    pos_error_m: float = 0.02


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    mode: str = "cl"
    duration: float = 60.0
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    truth: TruthConfig = field(default_factory=TruthConfig)
    orbit: OrbitConfig = field(default_factory=OrbitConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    icp: IcpConfig = field(default_factory=IcpConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    init: InitConfig = field(default_factory=InitConfig)

    def validate(self):
        if self.mode not in ("cl", "ol"):
            raise ConfigError(f"mode must be 'cl' or 'ol', got {self.mode!r}")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.sensor.rate_hz > 0:
            raise ConfigError("sensor.rate_hz must be positive")
        if self.sensor.points < 3:
            raise ConfigError("sensor.points must be >= 3")
        if self.icp.max_iter < 1:
            raise ConfigError("icp.max_iter must be >= 1")
        if set(self.filter.prior_sigma) != set(PRIOR_KEYS):
            raise ConfigError(f"filter.prior_sigma needs exactly the keys {PRIOR_KEYS}")
        try:
            TargetTruth(self.truth.mu0, self.truth.omega0, self.truth.r_c0, self.truth.v_c0,
                        self.truth.rho, self.truth.eta, self.truth.inertia)
            FaultSchedule(tuple(map(tuple, self.sensor.blackouts)))
            self.noise()
            OrbitParams(self.orbit.n, self.orbit.mu_e)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def noise(self):
        R = np.asarray(self.filter.R, dtype=float)
        if R.shape == (6,):
            R = np.diag(R)
        return NoiseConfig(self.filter.sigma_tau, self.filter.sigma_f, R)

    def icp_options(self):
        if self.icp.d_min is None:
            return IcpOptions.for_noise(self.sensor.sigma, self.icp.max_iter)
        return IcpOptions(self.icp.d_min, self.icp.max_iter)

    def to_dict(self):
        """Plain-dict form with every default resolved to its effective value."""
        d = dataclasses.asdict(self)
        d["icp"]["d_min"] = self.icp_options().d_min
        return d

    @classmethod
    def from_dict(cls, data):
        return _from_dict(cls, data, "").validate()


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        ftype = fields[name].type
        if dataclasses.is_dataclass(ftype):
            kwargs[name] = _from_dict(ftype, value, f"{where}{name}.")
        elif name == "prior_sigma":
            merged = FilterConfig().prior_sigma
            merged.update(value)
            kwargs[name] = merged
        else:
            kwargs[name] = value
    return cls(**kwargs)


def _prior_covariance(fc):
    sig = [fc.prior_sigma[k] for k in PRIOR_KEYS]
    return np.diag(np.repeat(np.square(sig), 3))


@dataclass
class FrameRecord:
    k: int
    t: float
    valid: bool
    true_pose: Pose
    seed_pose: Pose
    prior_pose: Pose
    est_pose: Pose
    meas_pose: Pose | None
    fit: float
    iterations: int
    icp_converged: bool
    rejected: bool
    omega_hat: np.ndarray
    p_hat: np.ndarray
    rho_hat: np.ndarray
    eta_hat: np.ndarray
    mu_hat: np.ndarray
    r_c_hat: np.ndarray
    v_c_hat: np.ndarray
    true_omega: np.ndarray
    true_p: np.ndarray
    true_rho: np.ndarray
    P_diag: np.ndarray
    innovation: np.ndarray
    S_diag: np.ndarray

    @property
    def rot_error(self):
        return quat.geodesic_angle(self.true_pose.rotation, self.est_pose.rotation)

    @property
    def trans_error(self):
        return float(np.linalg.norm(self.true_pose.translation - self.est_pose.translation))

    @property
    def prior_rot_error(self):
        return quat.geodesic_angle(self.true_pose.rotation, self.prior_pose.rotation)

    @property
    def prior_trans_error(self):
        return float(np.linalg.norm(self.true_pose.translation - self.prior_pose.translation))


@dataclass
class TrackRecord:
    config: ScenarioConfig
    frames: list = field(default_factory=list)
    diverged_at: float | None = None
    divergence_reason: str = ""

    @property
    def diverged(self):
        return self.diverged_at is not None

    def column(self, name):
        return np.array([getattr(f, name) for f in self.frames])

    def to_csv(self, path):
        write_track_csv(self, path)


def _perturbed(pose, rng, rot_deg, pos_m):
    axis = rng.normal(size=3)
    dq = quat.from_axis_angle(axis, np.radians(rot_deg)) if rot_deg > 0 else quat.IDENTITY
    dr = rng.normal(size=3)
    dr = pos_m * dr / np.linalg.norm(dr)
    return Pose(quat.qmul_circledast(dq, pose.rotation), pose.translation + dr)


def build_model(spec):
    return SurfaceModel(shapes.build(spec.shape, spec.size, spec.spacing, spec.seed))


def run_scenario(cfg, model=None, on_scan=None):
    """Run one scenario and return its :class:`TrackRecord`.

    ``on_scan(k, frame)`` is called with every generated (post-fault) scan,
    e.g. to export PLY files. A filter divergence ends the run early; the
    record keeps the frames up to that point and the divergence time.
    """
    cfg.validate()
    model = model or build_model(cfg.model)
    orbit = OrbitParams(cfg.orbit.n, cfg.orbit.mu_e)
    noise = cfg.noise()
    tc, sc, fc = cfg.truth, cfg.sensor, cfg.filter
    sched = FaultSchedule(tuple(map(tuple, sc.blackouts)))
    opts = cfg.icp_options()

    truth = TargetTruth(tc.mu0, tc.omega0, tc.r_c0, tc.v_c0, tc.rho, tc.eta, tc.inertia)
    true_p = truth.p
    truth_rng = np.random.default_rng([cfg.seed, STREAM_TRUTH])
    init_rng = np.random.default_rng([cfg.seed, STREAM_INIT])

    T = 1.0 / sc.rate_hz
    n_frames = int(np.floor(cfg.duration * sc.rate_hz + 1e-9)) + 1
    coarse = _perturbed(observed_pose(truth), init_rng, cfg.init.rot_error_deg, cfg.init.pos_error_m)
    filt = initial_state(coarse, 0.0, _prior_covariance(fc), fc.omega0, fc.p0, None, fc.rho0, fc.eta0)
    last_icp = coarse
    rec = TrackRecord(cfg)

    for k in range(n_frames):
        t = k * T
        if k > 0:
            truth = integrate_truth(truth, orbit, T, tc.dt, truth_rng, tc.sigma_tau)
        true_pose = observed_pose(truth)
        view = true_pose.translation / np.linalg.norm(true_pose.translation) if sc.cull else None
        frame = sample_scan(model, true_pose, sc.points, sc.sigma, [cfg.seed, STREAM_SCAN, k], view, t)
        frame = apply_faults(t, frame, sched)
        if on_scan is not None:
            on_scan(k, frame)

        prior_pose = filt.pose()
        seed_pose = prior_pose if cfg.mode == "cl" else last_icp
        meas_pose, fit, iters, conv, rejected = None, np.nan, 0, False, False
        y, S_diag = np.full(6, np.nan), np.full(6, np.nan)
        if frame.valid:
            try:
                res = icp_register(frame.cloud, model, seed_pose, opts)
            except TumbleTrackError as exc:
                log.warning("t=%.2f: ICP failed (%s); frame skipped", t, exc)
                res = None
            if res is not None:
                meas_pose, fit, iters, conv = res.pose, res.fit_normalized, res.iterations, res.converged
                last_icp = res.pose
                meas = Measurement(res.pose.translation, res.pose.rotation, t)
                try:
                    filt, y, S = correct(filt, meas, noise)
                    S_diag = np.diag(S).copy()
                except MeasurementRejected as exc:
                    log.warning("t=%.2f: %s", t, exc)
                    rejected = True
                except FilterDivergence as exc:
                    rec.diverged_at, rec.divergence_reason = t, str(exc)

        x = filt.x
        rec.frames.append(FrameRecord(
            k=k, t=t, valid=frame.valid, true_pose=true_pose, seed_pose=seed_pose,
            prior_pose=prior_pose, est_pose=filt.pose(), meas_pose=meas_pose, fit=fit,
            iterations=iters, icp_converged=conv, rejected=rejected,
            omega_hat=x.omega.copy(), p_hat=x.p.copy(), rho_hat=x.rho.copy(), eta_hat=x.eta.copy(),
            mu_hat=x.mu.copy(), r_c_hat=x.r_c.copy(), v_c_hat=x.v_c.copy(),
            true_omega=truth.omega.copy(), true_p=true_p, true_rho=truth.rho.copy(),
            P_diag=np.diag(filt.P).copy(), innovation=y, S_diag=S_diag,
        ))
        if rec.diverged:
            break
        if k + 1 < n_frames:
            try:
                filt = ekf_propagate(filt, orbit, noise, T, fc.substeps)
            except FilterDivergence as exc:
                rec.diverged_at, rec.divergence_reason = t, str(exc)
                break
    return rec


TRACK_COLUMNS = (
    ["k", "t", "valid", "rejected", "icp_iterations", "icp_converged", "fit_normalized",
     "rot_error_rad", "trans_error_m"]
    + [f"true_q{i}" for i in range(4)] + [f"true_r{i}" for i in range(3)]
    + [f"seed_q{i}" for i in range(4)] + [f"seed_r{i}" for i in range(3)]
    + [f"meas_q{i}" for i in range(4)] + [f"meas_r{i}" for i in range(3)]
    + [f"est_q{i}" for i in range(4)] + [f"est_r{i}" for i in range(3)]
    + [f"mu_hat{i}" for i in range(4)] + [f"omega_hat{i}" for i in range(3)]
    + [f"p_hat{i}" for i in range(3)] + [f"r_c_hat{i}" for i in range(3)]
    + [f"v_c_hat{i}" for i in range(3)] + [f"rho_hat{i}" for i in range(3)]
    + [f"eta_hat{i}" for i in range(4)]
    + [f"true_omega{i}" for i in range(3)]
    + [f"P{i}" for i in range(21)] + [f"innov{i}" for i in range(6)] + [f"S{i}" for i in range(6)]
)


def _fmt(v):
    return "%.17g" % v


def _frame_row(f):
    meas = f.meas_pose
    mq = meas.rotation if meas is not None else np.full(4, np.nan)
    mr = meas.translation if meas is not None else np.full(3, np.nan)
    nums = [
        f.fit, f.rot_error, f.trans_error, *f.true_pose.rotation, *f.true_pose.translation,
        *f.seed_pose.rotation, *f.seed_pose.translation, *mq, *mr,
        *f.est_pose.rotation, *f.est_pose.translation, *f.mu_hat, *f.omega_hat, *f.p_hat,
        *f.r_c_hat, *f.v_c_hat, *f.rho_hat, *f.eta_hat, *f.true_omega,
        *f.P_diag, *f.innovation, *f.S_diag,
    ]
    return [str(f.k), _fmt(f.t), str(int(f.valid)), str(int(f.rejected)), str(f.iterations),
            str(int(f.icp_converged))] + [_fmt(v) for v in nums]


def write_track_csv(rec, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACK_COLUMNS)
        for f in rec.frames:
            w.writerow(_frame_row(f))


def _convergence_time(t, err, threshold):
    """First time after which ``err`` stays below ``threshold`` to the end."""
    below = err < threshold
    if len(below) == 0 or not below[-1]:
        return None
    bad = np.flatnonzero(~below)
    return float(t[0] if len(bad) == 0 else t[bad[-1] + 1])


@dataclass
class Thresholds:
    p: float = 0.05
    rho: float = 0.02
    omega: float = 0.01
    recover_rot_deg: float = 2.0
    recover_trans_m: float = 0.05
    fail_rot_deg: float = 30.0
    fail_fit_ratio: float = 10.0
    # normalized RMS below this is noise-free agreement, not a usable baseline
    fit_floor: float = 1e-8


def compute_metrics(rec, thr=None):
    """Summary statistics of a track (angles in degrees, distances in metres)."""
    thr = thr or Thresholds()
    fr = rec.frames
    out = {"mode": rec.config.mode, "frames": len(fr), "diverged": rec.diverged,
           "diverged_at": rec.diverged_at}
    if not fr:
        out["failed"] = True
        return out
    t = np.array([f.t for f in fr])
    rot = np.degrees([f.rot_error for f in fr])
    trans = np.array([f.trans_error for f in fr])
    p_err = np.max(np.abs(np.array([f.p_hat - f.true_p for f in fr])), axis=1)
    rho_err = np.linalg.norm(np.array([f.rho_hat - f.true_rho for f in fr]), axis=1)
    w_err = np.linalg.norm(np.array([f.omega_hat - f.true_omega for f in fr]), axis=1)
    fit = np.array([f.fit for f in fr])
    valid_fit = fit[np.isfinite(fit)]
    fit0 = float(valid_fit[0]) if len(valid_fit) else np.nan

    out.update(
        duration=float(t[-1]),
        rot_error_max_deg=float(rot.max()), rot_error_mean_deg=float(rot.mean()),
        trans_error_max_m=float(trans.max()), trans_error_mean_m=float(trans.mean()),
        rot_error_final_deg=float(rot[-1]), trans_error_final_m=float(trans[-1]),
        p_hat_final=fr[-1].p_hat.tolist(), rho_hat_final=fr[-1].rho_hat.tolist(),
        omega_error_final=float(w_err[-1]),
        p_convergence_time=_convergence_time(t, p_err, thr.p),
        rho_convergence_time=_convergence_time(t, rho_err, thr.rho),
        omega_convergence_time=_convergence_time(t, w_err, thr.omega),
        fit_first=fit0, fit_max=float(np.nanmax(fit)) if len(valid_fit) else np.nan,
    )
    fit_limit = thr.fail_fit_ratio * max(fit0, thr.fit_floor) if len(valid_fit) else np.inf
    fit_bad = np.nan_to_num(fit) > fit_limit
    out["failed"] = bool(rec.diverged or rot.max() > thr.fail_rot_deg or fit_bad.any())
    first_fail = np.flatnonzero((rot > thr.fail_rot_deg) | fit_bad)
    out["failure_time"] = float(t[first_fail[0]]) if len(first_fail) else rec.diverged_at

    blackouts = []
    for a, b in rec.config.sensor.blackouts:
        after = np.flatnonzero(t >= b)
        entry = {"start": a, "end": b}
        if len(after):
            i0 = after[0]
            entry["rot_error_at_end_deg"] = float(np.degrees(fr[i0].prior_rot_error))
            entry["trans_error_at_end_m"] = fr[i0].prior_trans_error
            ok = np.flatnonzero((rot[i0:] < thr.recover_rot_deg) & (trans[i0:] < thr.recover_trans_m))
            entry["recovery_time"] = float(t[i0 + ok[0]] - b) if len(ok) else None
            entry["max_rot_error_after_deg"] = float(rot[i0:].max())
        blackouts.append(entry)
    out["blackouts"] = blackouts
    return out


def preset_names():
    from importlib import resources
    files = resources.files(__package__).joinpath("configs").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name):
    """Bundled scenario config by name (see :func:`preset_names`)."""
    import json
    from importlib import resources
    path = resources.files(__package__).joinpath("configs", f"{name}.json")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; choose from {preset_names()}")
    return ScenarioConfig.from_dict(json.loads(path.read_text()))
