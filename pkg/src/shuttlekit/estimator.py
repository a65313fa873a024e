"""EKF over shuttle position/velocity plus interception planning.

The process model is the same drag flight model the simulator integrates,
with the skirt axis dropped from the filter state. The transition Jacobian
is the exact derivative of the RK4 step, obtained by chaining the stage
Jacobians, so it agrees with finite differences of the propagated mean to
near machine precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .goal import StrikeTarget
from .shuttle import ShuttleParams, Trajectory, _accel, _rk4_step
from .spatial import Box, Pose, quat_identity

Array = np.ndarray


class NumericalFailureError(RuntimeError):
    """Covariance lost positive semidefiniteness or an update became singular."""


@dataclass(frozen=True)
class EkfBelief:
    """Gaussian belief over [position(3), velocity(3)]."""

    mean: Array
    covariance: Array

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.shape != (6,):
            raise ValueError(f"mean must have shape (6,), got {mean.shape}")
        if cov.shape != (6, 6):
            raise ValueError(f"covariance must have shape (6, 6), got {cov.shape}")
        if np.max(np.abs(cov - cov.T)) > 1e-9:
            raise NumericalFailureError("covariance is not symmetric")
        if np.min(np.linalg.eigvalsh(cov)) < -1e-9:
            raise NumericalFailureError("covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def position(self) -> Array:
        return self.mean[:3]

    @property
    def velocity(self) -> Array:
        return self.mean[3:]


@dataclass(frozen=True)
class NoiseConfig:
    """Filter tuning: white-noise acceleration PSD and measurement covariance."""

    process_psd: float
    measurement_cov: Array

    def __post_init__(self):
        if self.process_psd < 0:
            raise ValueError("process_psd must be non-negative")
        r = np.asarray(self.measurement_cov, dtype=np.float64)
        if r.shape != (3, 3):
            raise ValueError("measurement_cov must have shape (3, 3)")
        if np.max(np.abs(r - r.T)) > 1e-9 or np.min(np.linalg.eigvalsh(r)) < -1e-12:
            raise ValueError("measurement_cov must be symmetric PSD")
        object.__setattr__(self, "measurement_cov", r)

    @staticmethod
    def isotropic(process_psd: float, measurement_std: float) -> "NoiseConfig":
        return NoiseConfig(process_psd, measurement_std**2 * np.eye(3))


@dataclass(frozen=True)
class InnovationStats:
    residual: Array
    innovation_cov: Array
    nis: float


def _drag_jacobian(vel: Array, p: ShuttleParams) -> Array:
    """d(accel)/d(velocity) for the quadratic drag model."""
    speed = np.linalg.norm(vel)
    if speed == 0.0 or p.drag_coeff == 0.0:
        return np.zeros((3, 3))
    k = p.drag_coeff / p.mass
    return -k * (speed * np.eye(3) + np.outer(vel, vel) / speed)


def _continuous_jacobian(vel: Array, p: ShuttleParams) -> Array:
    a = np.zeros((6, 6))
    a[:3, 3:] = np.eye(3)
    a[3:, 3:] = _drag_jacobian(vel, p)
    return a


def transition_jacobian(mean: Array, p: ShuttleParams, dt: float) -> Array:
    """Exact Jacobian of the RK4 step with respect to the state."""
    vel = mean[3:]
    eye = np.eye(6)
    a1 = _continuous_jacobian(vel, p)
    v2 = vel + 0.5 * dt * _accel(vel, p)
    a2 = _continuous_jacobian(v2, p)
    m2 = eye + 0.5 * dt * a1
    v3 = vel + 0.5 * dt * _accel(v2, p)
    a3 = _continuous_jacobian(v3, p)
    m3 = eye + 0.5 * dt * a2 @ m2
    v4 = vel + dt * _accel(v3, p)
    a4 = _continuous_jacobian(v4, p)
    m4 = eye + dt * a3 @ m3
    return eye + (dt / 6.0) * (a1 + 2.0 * a2 @ m2 + 2.0 * a3 @ m3 + a4 @ m4)


def process_noise(psd: float, dt: float) -> Array:
    """White-noise-acceleration discretization, per-axis [dt^3/3, dt^2/2; dt^2/2, dt]."""
    q = np.zeros((6, 6))
    q[:3, :3] = psd * dt**3 / 3.0 * np.eye(3)
    q[:3, 3:] = psd * dt**2 / 2.0 * np.eye(3)
    q[3:, :3] = q[:3, 3:]
    q[3:, 3:] = psd * dt * np.eye(3)
    return q


def ekf_predict(b: EkfBelief, p: ShuttleParams, n: NoiseConfig, dt: float) -> EkfBelief:
    """Propagate mean through the flight model and covariance by F P F^T + Q."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos, vel = _rk4_step(b.mean[:3], b.mean[3:], p, dt)
    f = transition_jacobian(b.mean, p, dt)
    cov = f @ b.covariance @ f.T + process_noise(n.process_psd, dt)
    cov = 0.5 * (cov + cov.T)
    return EkfBelief(np.concatenate([pos, vel]), cov)


def ekf_update(
    b: EkfBelief, z: Array, n: NoiseConfig
) -> tuple[EkfBelief, InnovationStats]:
    """Position-measurement update (H = [I 0]) in Joseph form, reporting NIS."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (3,):
        raise ValueError("measurement must have shape (3,)")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement must be finite")
    p_cov = b.covariance
    s = p_cov[:3, :3] + n.measurement_cov
    residual = z - b.mean[:3]
    try:
        s_inv_r = np.linalg.solve(s, residual)
        gain = np.linalg.solve(s, p_cov[:3, :]).T  # P H^T S^-1
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("singular innovation covariance") from exc
    mean = b.mean + gain @ residual
    i_kh = np.eye(6)
    i_kh[:, :3] -= gain
    cov = i_kh @ p_cov @ i_kh.T + gain @ n.measurement_cov @ gain.T
    cov = 0.5 * (cov + cov.T)
    nis = float(residual @ s_inv_r)
    return EkfBelief(mean, cov), InnovationStats(residual, s, nis)


def predict_trajectory(
    b: EkfBelief, p: ShuttleParams, dt: float, horizon: float, t0: float = 0.0
) -> Trajectory:
    """Noise-free mean propagation, sampled at t0, t0+dt, ... up to t0+horizon."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    steps = int(np.floor(horizon / dt + 1e-12))
    times = [t0]
    positions = [b.mean[:3].copy()]
    velocities = [b.mean[3:].copy()]
    pos, vel = b.mean[:3], b.mean[3:]
    for k in range(steps):
        pos, vel = _rk4_step(pos, vel, p, dt)
        times.append(t0 + (k + 1) * dt)
        positions.append(pos)
        velocities.append(vel)
    return Trajectory(np.array(times), np.array(positions), np.array(velocities))


@dataclass(frozen=True)
class HitCriteria:
    """Feasibility window for strike selection.

    A sample is feasible when its height lies in height_band and, if a
    reachable volume is given, the point falls inside it. The racket
    orientation and recovery root pose are carried through into the
    resulting strike target.
    """

    height_band: tuple[float, float]
    volume: Optional[Box] = None
    preference: str = "earliest"
    racket_quat: Array = field(default_factory=quat_identity)
    recovery_root: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        lo, hi = self.height_band
        if not lo < hi:
            raise ValueError("height band must satisfy lo < hi")
        if self.preference not in ("earliest", "apex"):
            raise ValueError("preference must be 'earliest' or 'apex'")


def select_hit_point(traj: Trajectory, criteria: HitCriteria) -> Optional[StrikeTarget]:
    """Pick the strike sample from a predicted trajectory.

    'earliest' returns the first feasible sample (maximizing preparation
    time); 'apex' returns the feasible sample closest in time to the
    trajectory apex. Ties break toward the earlier sample. Returns None
    when nothing is feasible.
    """
    if len(traj) == 0:
        raise ValueError("trajectory is empty")
    lo, hi = criteria.height_band
    zs = traj.positions[:, 2]
    feasible = (zs >= lo) & (zs <= hi)
    if criteria.volume is not None:
        for i in np.flatnonzero(feasible):
            if not criteria.volume.contains(traj.positions[i]):
                feasible[i] = False
    idx = np.flatnonzero(feasible)
    if idx.size == 0:
        return None
    if criteria.preference == "earliest":
        pick = int(idx[0])
    else:
        t_apex = traj.times[int(np.argmax(zs))]
        gaps = np.abs(traj.times[idx] - t_apex)
        pick = int(idx[int(np.argmin(gaps))])  # argmin takes the first minimum
    return StrikeTarget(
        hit_time=float(traj.times[pick]),
        hit_racket_pose=Pose(traj.positions[pick], criteria.racket_quat),
        recovery_root_pose=criteria.recovery_root,
    )


def track_measurements(
    times: Array,
    measurements: Array,
    b0: EkfBelief,
    p: ShuttleParams,
    n: NoiseConfig,
    latency: float = 0.0,
) -> tuple[EkfBelief, Array]:
    """Run predict/update over a measurement sequence.

    The first measurement updates the prior in place; each later one is
    preceded by a predict over the timestamp gap. `latency` shifts all
    timestamps earlier by a fixed lag before filtering. Returns the final
    belief and a log array with rows [t, mean(6), nis].
    """
    times = np.asarray(times, dtype=np.float64) - latency
    measurements = np.asarray(measurements, dtype=np.float64)
    if times.ndim != 1 or measurements.shape != (times.size, 3):
        raise ValueError("need times (N,) and measurements (N, 3)")
    if times.size == 0:
        raise ValueError("empty measurement sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    rows = np.empty((times.size, 8))
    belief = b0
    for i in range(times.size):
        if i > 0:
            belief = ekf_predict(belief, p, n, float(times[i] - times[i - 1]))
        belief, stats = ekf_update(belief, measurements[i], n)
        rows[i, 0] = times[i]
        rows[i, 1:7] = belief.mean
        rows[i, 7] = stats.nis
    return belief, rows


# ---------------------------------------------------------------------------
# File formats


def load_measurements_csv(path) -> tuple[Array, Array]:
    """Read `t,x,y,z` rows. Returns (times, positions)."""
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines()[1:] if ln.strip()]
    if not lines:
        raise ValueError(f"no measurements in {path}")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines])
    return data[:, 0], data[:, 1:4]


def save_filter_log_csv(rows: Array, path) -> None:
    """Write `t,mx,my,mz,mvx,mvy,mvz,nis` rows at 9 significant digits."""
    with open(path, "w") as f:
        f.write("t,mx,my,mz,mvx,mvy,mvz,nis\n")
        for row in rows:
            f.write(",".join(format(v, ".9g") for v in row) + "\n")


def noise_from_dict(d) -> NoiseConfig:
    r = d["measurement_cov"]
    if np.isscalar(r):
        r = float(r) * np.eye(3)
    return NoiseConfig(process_psd=float(d["process_psd"]), measurement_cov=np.asarray(r))


def load_noise(path) -> NoiseConfig:
    with open(path) as f:
        return noise_from_dict(json.load(f))
