"""Goal-conditioned state encoding for the striking task.

The goal splits into a Preparation phase (before impact) and a Recovery
phase (after impact), switched by the sign of the time-to-hit. Whichever
target block is irrelevant to the current phase is masked to zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spatial import (
    KinematicChain,
    Pose,
    Twist,
    forward_kinematics,
    quat_boxminus,
    quat_conj,
    quat_rotate,
)

Array = np.ndarray

TTH_LIMIT = 2.0  # seconds; the time-to-hit observation is clipped to [-2, 2]

PHASE_PREPARATION = "preparation"
PHASE_RECOVERY = "recovery"


@dataclass(frozen=True)
class StrikeTarget:
    """Planned impact: when to hit, racket pose at impact, root pose to recover to."""

    hit_time: float
    hit_racket_pose: Pose
    recovery_root_pose: Pose


@dataclass(frozen=True)
class RobotState:
    """Proprioceptive snapshot used by goal encoding and feature assembly."""

    root: Pose
    root_twist: Twist
    q: Array
    qd: Array
    projected_gravity: Array
    last_action: Array
    base_height: float
    feet_contacts: Array

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        qd = np.asarray(self.qd, dtype=np.float64)
        if q.shape != qd.shape:
            raise ValueError("q and qd must have matching length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qd", qd)
        object.__setattr__(
            self, "projected_gravity", np.asarray(self.projected_gravity, dtype=np.float64)
        )
        object.__setattr__(self, "last_action", np.asarray(self.last_action, dtype=np.float64))
        object.__setattr__(
            self, "feet_contacts", np.asarray(self.feet_contacts, dtype=np.float64)
        )


@dataclass(frozen=True)
class GoalObservation:
    tth: float
    hit_delta: Array       # [position(3), rotation vector(3)] in the base frame
    recovery_delta: Array  # same layout, for the root pose
    phase: str


def time_to_hit(now: float, hit_time: float) -> float:
    """Signed seconds until impact, clipped to [-2, 2]. Positive before impact."""
    tth = hit_time - now
    if tth > TTH_LIMIT:
        return TTH_LIMIT
    if tth < -TTH_LIMIT:
        return -TTH_LIMIT
    return float(tth)


def pose_delta_in_base(target: Pose, current: Pose, base: Pose) -> Array:
    """Pose error target (-) current, re-expressed in the base frame.

    Layout: position difference (3) then rotation-vector difference (3),
    both rotated into the base frame. Invariant under a rigid transform of
    the world frame applied to all three poses. Scalar arithmetic
    throughout; this runs once per control tick.
    """
    # world->base rotation: the matrix of the conjugate base quaternion
    w, x, y, z = base.orientation.tolist()
    m00 = 1.0 - 2.0 * (y * y + z * z)
    m01 = 2.0 * (x * y + w * z)
    m02 = 2.0 * (x * z - w * y)
    m10 = 2.0 * (x * y - w * z)
    m11 = 1.0 - 2.0 * (x * x + z * z)
    m12 = 2.0 * (y * z + w * x)
    m20 = 2.0 * (x * z + w * y)
    m21 = 2.0 * (y * z - w * x)
    m22 = 1.0 - 2.0 * (x * x + y * y)

    tpx, tpy, tpz = target.position.tolist()
    cpx, cpy, cpz = current.position.tolist()
    px, py, pz = tpx - cpx, tpy - cpy, tpz - cpz

    # relative orientation target * conj(current), canonical sign
    tw, tx, ty, tz = target.orientation.tolist()
    cw, cx, cy, cz = current.orientation.tolist()
    rw = tw * cw + tx * cx + ty * cy + tz * cz
    rx = -tw * cx + tx * cw - ty * cz + tz * cy
    ry = -tw * cy + tx * cz + ty * cw - tz * cx
    rz = -tw * cz - tx * cy + ty * cx + tz * cw
    if rw < 0.0:
        rw, rx, ry, rz = -rw, -rx, -ry, -rz
    s = math.sqrt(rx * rx + ry * ry + rz * rz)
    scale = 2.0 if s < 1e-12 else 2.0 * math.atan2(s, rw) / s
    wx, wy, wz = scale * rx, scale * ry, scale * rz

    out = np.empty(6)
    out[0] = m00 * px + m01 * py + m02 * pz
    out[1] = m10 * px + m11 * py + m12 * pz
    out[2] = m20 * px + m21 * py + m22 * pz
    out[3] = m00 * wx + m01 * wy + m02 * wz
    out[4] = m10 * wx + m11 * wy + m12 * wz
    out[5] = m20 * wx + m21 * wy + m22 * wz
    return out


def encode_goal(
    state: RobotState,
    target: StrikeTarget,
    now: float,
    racket_pose: Optional[Pose] = None,
    chain: Optional[KinematicChain] = None,
    racket_frame: str = "racket",
) -> GoalObservation:
    """Assemble the goal observation with phase-dependent masking.

    hit_delta is the racket-pose error to the impact target; recovery_delta
    is the root-pose error to the recovery target. While preparing
    (tth >= 0) the recovery block is zeroed; while recovering (tth < 0) the
    hit block is zeroed. The racket pose comes either from the caller or
    from forward kinematics over `chain`.
    """
    if racket_pose is None:
        if chain is None:
            raise ValueError("need either racket_pose or a chain to compute it")
        frames = forward_kinematics(chain, state.root, state.q)
        if racket_frame not in frames:
            raise ValueError(f"chain has no frame named {racket_frame!r}")
        racket_pose = frames[racket_frame]
    tth = time_to_hit(now, target.hit_time)
    if tth >= 0.0:
        hit_delta = pose_delta_in_base(target.hit_racket_pose, racket_pose, state.root)
        recovery_delta = np.zeros(6)
        phase = PHASE_PREPARATION
    else:
        hit_delta = np.zeros(6)
        recovery_delta = pose_delta_in_base(target.recovery_root_pose, state.root, state.root)
        phase = PHASE_RECOVERY
    return GoalObservation(tth=tth, hit_delta=hit_delta, recovery_delta=recovery_delta, phase=phase)


@dataclass(frozen=True)
class ClipFrame:
    t: float
    root: Pose
    root_lin: Array
    root_ang: Array
    q: Array

    def __post_init__(self):
        object.__setattr__(self, "root_lin", np.asarray(self.root_lin, dtype=np.float64))
        object.__setattr__(self, "root_ang", np.asarray(self.root_ang, dtype=np.float64))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))


@dataclass(frozen=True)
class ReferenceClip:
    """Reference motion: root states and joint vectors over time, with
    annotated hit and recovery instants."""

    frames: tuple[ClipFrame, ...]
    hit_times: tuple[float, ...] = ()
    recovery_times: tuple[float, ...] = ()

    def __post_init__(self):
        frames = tuple(self.frames)
        times = [f.t for f in frames]
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("frame times must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "hit_times", tuple(float(t) for t in self.hit_times))
        object.__setattr__(self, "recovery_times", tuple(float(t) for t in self.recovery_times))

    def __len__(self) -> int:
        return len(self.frames)

    def frame_index_at(self, t: float) -> int:
        """Index of the last frame at or before t (clamped to [0, len-1])."""
        times = np.array([f.t for f in self.frames])
        i = int(np.searchsorted(times, t, side="right")) - 1
        return min(max(i, 0), len(self.frames) - 1)


@dataclass(frozen=True)
class ReferenceWindow:
    """Per-future-frame deltas relative to the query frame, in its base frame.

    root_deltas rows: [dpos(3), drot(3), dlin(3), dang(3)]; joint_deltas
    rows hold the joint-angle differences.
    """

    root_deltas: Array   # (H, 12)
    joint_deltas: Array  # (H, n)


def reference_window(clip: ReferenceClip, t: float, horizon: int) -> ReferenceWindow:
    """Differences between the frame at t and the next `horizon` frames.

    Queries past the end of the clip repeat the last frame, so the deltas
    saturate instead of extrapolating.
    """
    if len(clip) == 0:
        raise ValueError("reference clip is empty")
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    i = clip.frame_index_at(t)
    base = clip.frames[i]
    q_inv = quat_conj(base.root.orientation)
    n = base.q.size
    root_deltas = np.zeros((horizon, 12))
    joint_deltas = np.zeros((horizon, n))
    for k in range(1, horizon + 1):
        fut = clip.frames[min(i + k, len(clip) - 1)]
        root_deltas[k - 1, 0:3] = quat_rotate(q_inv, fut.root.position - base.root.position)
        root_deltas[k - 1, 3:6] = quat_rotate(
            q_inv, quat_boxminus(fut.root.orientation, base.root.orientation)
        )
        root_deltas[k - 1, 6:9] = quat_rotate(q_inv, fut.root_lin - base.root_lin)
        root_deltas[k - 1, 9:12] = quat_rotate(q_inv, fut.root_ang - base.root_ang)
        joint_deltas[k - 1] = fut.q - base.q
    return ReferenceWindow(root_deltas, joint_deltas)


# ---------------------------------------------------------------------------
# Clip file format


def clip_from_dict(data) -> ReferenceClip:
    frames = tuple(
        ClipFrame(
            t=float(f["t"]),
            root=Pose(np.asarray(f["root_pos"]), np.asarray(f["root_quat"])),
            root_lin=np.asarray(f["root_lin"]),
            root_ang=np.asarray(f["root_ang"]),
            q=np.asarray(f["q"]),
        )
        for f in data["frames"]
    )
    ann = data.get("annotations", {})
    return ReferenceClip(
        frames,
        hit_times=tuple(ann.get("hit_times", [])),
        recovery_times=tuple(ann.get("recovery_times", [])),
    )


def clip_to_dict(clip: ReferenceClip) -> dict:
    return {
        "frames": [
            {
                "t": f.t,
                "root_pos": f.root.position.tolist(),
                "root_quat": f.root.orientation.tolist(),
                "root_lin": f.root_lin.tolist(),
                "root_ang": f.root_ang.tolist(),
                "q": f.q.tolist(),
            }
            for f in clip.frames
        ],
        "annotations": {
            "hit_times": list(clip.hit_times),
            "recovery_times": list(clip.recovery_times),
        },
    }


def load_clip(path) -> ReferenceClip:
    with open(path) as f:
        return clip_from_dict(json.load(f))


def save_clip(clip: ReferenceClip, path) -> None:
    with open(path, "w") as f:
        json.dump(clip_to_dict(clip), f, indent=2)
        f.write("\n")
