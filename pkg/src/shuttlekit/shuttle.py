"""Shuttlecock flight physics, court geometry, and racket impact.

Flight model: gravity plus quadratic air drag, integrated with classical
RK4. The feather skirt is reduced to a kinematic axis that relaxes toward
the velocity direction; it only selects which restitution coefficient a
racket impact uses (head-first vs skirt-first).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spatial import Pose, Twist, _vec3

Array = np.ndarray

DEFAULT_DT = 0.005  # 200 Hz physics rate


class NoContactError(RuntimeError):
    """Raised when a racket impact is requested but the shuttle is receding."""


@dataclass(frozen=True)
class ShuttleParams:
    """Physical constants of the shuttle model.

    drag_coeff is the quadratic drag constant k in F_drag = -k * |v| * v.
    axis_damping is the first-order rate at which the skirt axis relaxes
    toward the velocity direction. None of the defaults are calibrated
    against a specific shuttle; treat them as placeholders for config.
    """

    mass: float
    drag_coeff: float
    axis_damping: float = 0.0
    gravity: float = 9.81
    restitution_head: float = 0.85
    restitution_skirt: float = 0.5

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.drag_coeff < 0:
            raise ValueError("drag_coeff must be non-negative")
        if self.axis_damping < 0:
            raise ValueError("axis_damping must be non-negative")
        for name in ("restitution_head", "restitution_skirt"):
            e = getattr(self, name)
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def terminal_speed(self) -> float:
        """Free-fall speed where drag balances gravity."""
        if self.drag_coeff == 0:
            return float("inf")
        return float(np.sqrt(self.mass * self.gravity / self.drag_coeff))


@dataclass(frozen=True)
class ShuttleState:
    position: Array
    velocity: Array
    axis: Optional[Array] = None

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))
        if self.axis is not None:
            axis = _vec3(self.axis, "axis")
            n = np.linalg.norm(axis)
            if abs(n - 1.0) > 1e-6:
                raise ValueError("axis must be unit norm")
            object.__setattr__(self, "axis", axis / n)


@dataclass(frozen=True)
class CourtGeometry:
    """Net location and the opponent half the return should land in."""

    net_height: float
    net_x: float
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.net_height <= 0:
            raise ValueError("net_height must be positive")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be less than x_max")
        if not self.y_min < self.y_max:
            raise ValueError("y_min must be less than y_max")


@dataclass(frozen=True)
class Landing:
    time: float
    point: Array


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped flight samples."""

    times: Array       # (N,)
    positions: Array   # (N, 3)
    velocities: Array  # (N, 3)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class FlightResult:
    trajectory: Trajectory
    landing: Optional[Landing]

    @property
    def airborne_timeout(self) -> bool:
        return self.landing is None


@dataclass(frozen=True)
class CourtResult:
    in_bounds: bool
    cleared_net: bool


def _accel(vel: Array, p: ShuttleParams) -> Array:
    a = np.array([0.0, 0.0, -p.gravity])
    speed = np.sqrt(vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2])
    if speed > 0.0 and p.drag_coeff > 0.0:
        a -= (p.drag_coeff / p.mass) * speed * vel
    return a


def shuttle_accel(s: ShuttleState, p: ShuttleParams) -> Array:
    """Acceleration (m/s^2): gravity minus (k/m) |v| v."""
    return _accel(s.velocity, p)


def _rk4_step(pos: Array, vel: Array, p: ShuttleParams, dt: float):
    """One RK4 step of (pos, vel) under gravity + quadratic drag.

    Scalar arithmetic throughout; this sits in the inner loop of every
    simulation, filter predict, and serve solve.
    """
    g = p.gravity
    km = p.drag_coeff / p.mass
    x, y, z = float(pos[0]), float(pos[1]), float(pos[2])
    vx, vy, vz = float(vel[0]), float(vel[1]), float(vel[2])

    def acc(ux, uy, uz):
        s = math.sqrt(ux * ux + uy * uy + uz * uz)
        ks = km * s
        return -ks * ux, -ks * uy, -g - ks * uz

    ax1, ay1, az1 = acc(vx, vy, vz)
    h = 0.5 * dt
    v2x, v2y, v2z = vx + h * ax1, vy + h * ay1, vz + h * az1
    ax2, ay2, az2 = acc(v2x, v2y, v2z)
    v3x, v3y, v3z = vx + h * ax2, vy + h * ay2, vz + h * az2
    ax3, ay3, az3 = acc(v3x, v3y, v3z)
    v4x, v4y, v4z = vx + dt * ax3, vy + dt * ay3, vz + dt * az3
    ax4, ay4, az4 = acc(v4x, v4y, v4z)
    w = dt / 6.0
    new_pos = np.array([
        x + w * (vx + 2.0 * v2x + 2.0 * v3x + v4x),
        y + w * (vy + 2.0 * v2y + 2.0 * v3y + v4y),
        z + w * (vz + 2.0 * v2z + 2.0 * v3z + v4z),
    ])
    new_vel = np.array([
        vx + w * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4),
        vy + w * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4),
        vz + w * (az1 + 2.0 * az2 + 2.0 * az3 + az4),
    ])
    return new_pos, new_vel


def _relax_axis(axis: Optional[Array], vel: Array, rate: float, dt: float) -> Optional[Array]:
    if axis is None or rate == 0.0:
        return axis
    speed = np.linalg.norm(vel)
    if speed < 1e-9:
        return axis
    target = vel / speed
    blended = axis + (1.0 - np.exp(-rate * dt)) * (target - axis)
    n = np.linalg.norm(blended)
    if n < 1e-9:
        # axis exactly opposite the velocity; leave it untouched
        return axis
    return blended / n


def step(s: ShuttleState, p: ShuttleParams, dt: float) -> ShuttleState:
    """Advance the shuttle by dt using classical 4th-order Runge-Kutta."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos, vel = _rk4_step(s.position, s.velocity, p, dt)
    axis = _relax_axis(s.axis, vel, p.axis_damping, dt)
    return ShuttleState(pos, vel, axis)


def simulate_to_ground(
    s: ShuttleState, p: ShuttleParams, dt: float = DEFAULT_DT, t_max: float = 10.0
) -> FlightResult:
    """Integrate until the shuttle reaches z = 0 or t_max elapses.

    The landing point is linearly interpolated in time across the step
    that crosses the ground; the trajectory keeps the final below-ground
    sample so the crossing can be reproduced from the logged data.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if s.position[2] <= 0:
        raise ValueError("initial position must be above the ground")
    times = [0.0]
    positions = [s.position]
    velocities = [s.velocity]
    pos, vel = s.position, s.velocity
    axis = s.axis
    t = 0.0
    landing = None
    while t < t_max - 1e-12:
        h = min(dt, t_max - t)
        new_pos, new_vel = _rk4_step(pos, vel, p, h)
        axis = _relax_axis(axis, new_vel, p.axis_damping, h)
        new_t = t + h
        times.append(new_t)
        positions.append(new_pos)
        velocities.append(new_vel)
        if new_pos[2] <= 0.0:
            frac = pos[2] / (pos[2] - new_pos[2])
            landing = Landing(
                time=t + frac * h,
                point=pos + frac * (new_pos - pos),
            )
            break
        pos, vel, t = new_pos, new_vel, new_t
    traj = Trajectory(np.array(times), np.array(positions), np.array(velocities))
    return FlightResult(traj, landing)


def racket_impact(
    s: ShuttleState, racket_pose: Pose, racket_vel: Twist, p: ShuttleParams
) -> ShuttleState:
    """Reflect the shuttle off the racket face.

    The face normal is the +x axis of the racket frame. The normal
    component of the relative velocity is reversed and scaled by the
    restitution coefficient (head or skirt, picked by the sign of
    axis . normal); the tangential component is preserved.
    """
    normal = racket_pose.rotation_matrix()[:, 0]
    contact_arm = s.position - racket_pose.position
    v_contact = racket_vel.linear + np.cross(racket_vel.angular, contact_arm)
    v_rel = s.velocity - v_contact
    vn = float(np.dot(v_rel, normal))
    if vn >= 0.0:
        raise NoContactError("shuttle is receding from the racket face")
    if s.axis is not None and float(np.dot(s.axis, normal)) >= 0.0:
        e = p.restitution_skirt
    else:
        e = p.restitution_head
    v_rel_out = v_rel - (1.0 + e) * vn * normal
    return ShuttleState(s.position, v_rel_out + v_contact, s.axis)


def lands_in_court(landing_point: Array, traj: Trajectory, court: CourtGeometry) -> CourtResult:
    """Classify a landing: inside the opponent rectangle, and over the net.

    Net clearance interpolates the trajectory height at the first crossing
    of the net plane; a trajectory that never crosses did not clear.
    """
    x, y = float(landing_point[0]), float(landing_point[1])
    in_bounds = court.x_min <= x <= court.x_max and court.y_min <= y <= court.y_max
    cleared = False
    xs = traj.positions[:, 0]
    zs = traj.positions[:, 2]
    side = xs - court.net_x
    for i in range(len(xs) - 1):
        if side[i] == 0.0:
            cleared = zs[i] > court.net_height
            break
        if side[i] * side[i + 1] < 0.0:
            frac = side[i] / (side[i] - side[i + 1])
            z_cross = zs[i] + frac * (zs[i + 1] - zs[i])
            cleared = z_cross > court.net_height
            break
    return CourtResult(in_bounds=in_bounds, cleared_net=cleared)


def mechanical_energy(s: ShuttleState, p: ShuttleParams) -> float:
    v2 = float(np.dot(s.velocity, s.velocity))
    return 0.5 * p.mass * v2 + p.mass * p.gravity * float(s.position[2])


# ---------------------------------------------------------------------------
# File formats


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Write `t,x,y,z,vx,vy,vz` rows at 9 significant digits."""
    with open(path, "w") as f:
        f.write("t,x,y,z,vx,vy,vz\n")
        for t, pos, vel in zip(traj.times, traj.positions, traj.velocities):
            row = [t, *pos, *vel]
            f.write(",".join(format(v, ".9g") for v in row) + "\n")


def load_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(data[:, 0], data[:, 1:4], data[:, 4:7])


def params_from_dict(d) -> ShuttleParams:
    return ShuttleParams(
        mass=float(d["mass"]),
        drag_coeff=float(d["drag_coeff"]),
        axis_damping=float(d.get("axis_damping", 0.0)),
        gravity=float(d.get("gravity", 9.81)),
        restitution_head=float(d.get("restitution_head", 0.85)),
        restitution_skirt=float(d.get("restitution_skirt", 0.5)),
    )


def court_from_dict(d) -> CourtGeometry:
    return CourtGeometry(
        net_height=float(d["net_height"]),
        net_x=float(d["net_x"]),
        x_min=float(d["x_min"]),
        x_max=float(d["x_max"]),
        y_min=float(d["y_min"]),
        y_max=float(d["y_max"]),
    )


def load_params(path) -> ShuttleParams:
    with open(path) as f:
        return params_from_dict(json.load(f))


def load_court(path) -> CourtGeometry:
    with open(path) as f:
        return court_from_dict(json.load(f))
