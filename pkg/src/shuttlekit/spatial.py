"""Rigid-body math shared by every other module.

Quaternions are scalar-first ``[w, x, y, z]`` and kept canonical
(unit norm, w >= 0) so orientation comparisons are unambiguous.
Orientation errors are expressed as rotation vectors (axis * angle).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

Array = np.ndarray

# Inputs are rejected beyond this norm error; values are renormalized
# afterwards so stored quaternions stay unit to ~1e-16.
QUAT_NORM_TOL = 1e-6

_EPS = 1e-12


def _vec3(v, name: str = "vector") -> Array:
    out = np.asarray(v, dtype=np.float64)
    if out.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite components")
    return out


def _quat(q, name: str = "quaternion") -> Array:
    out = np.asarray(q, dtype=np.float64)
    if out.shape != (4,):
        raise ValueError(f"{name} must have shape (4,), got {out.shape}")
    n = np.linalg.norm(out)
    if abs(n - 1.0) > QUAT_NORM_TOL:
        raise ValueError(f"{name} is not unit norm (|q| = {n})")
    return out / n


def quat_identity() -> Array:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_canonical(q: Array) -> Array:
    """Resolve the double cover: flip sign so the scalar part is >= 0."""
    return -q if q[0] < 0.0 else q


def quat_mul(q1: Array, q2: Array) -> Array:
    """Hamilton product q1 * q2 (scalar-first)."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q: Array) -> Array:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: Array, v: Array) -> Array:
    """Rotate 3-vector v by unit quaternion q."""
    qv = np.array([0.0, v[0], v[1], v[2]])
    return quat_mul(quat_mul(q, qv), quat_conj(q))[1:]


def quat_to_matrix(q: Array) -> Array:
    w, x, y, z = q
    out = np.empty((3, 3))
    out[0, 0] = 1 - 2 * (y * y + z * z)
    out[0, 1] = 2 * (x * y - w * z)
    out[0, 2] = 2 * (x * z + w * y)
    out[1, 0] = 2 * (x * y + w * z)
    out[1, 1] = 1 - 2 * (x * x + z * z)
    out[1, 2] = 2 * (y * z - w * x)
    out[2, 0] = 2 * (x * z - w * y)
    out[2, 1] = 2 * (y * z + w * x)
    out[2, 2] = 1 - 2 * (x * x + y * y)
    return out


def quat_from_rotvec(w: Array) -> Array:
    """Exponential map: rotation vector (axis * angle, rad) to quaternion."""
    w = np.asarray(w, dtype=np.float64)
    angle = np.linalg.norm(w)
    half = 0.5 * angle
    # sin(half)/angle, stable at angle -> 0 (limit 1/2)
    scale = 0.5 * np.sinc(half / np.pi)
    return quat_canonical(np.array([np.cos(half), *(scale * w)]))


def quat_to_rotvec(q: Array) -> Array:
    """Logarithm map: quaternion to rotation vector with angle in [0, pi]."""
    q = quat_canonical(q)
    s = np.linalg.norm(q[1:])
    if s < _EPS:
        return 2.0 * q[1:]
    angle = 2.0 * np.arctan2(s, q[0])
    return (angle / s) * q[1:]


def _boxminus_unchecked(ref: Array, cur: Array) -> Array:
    """quat_boxminus without unit validation, for already-validated inputs."""
    return quat_to_rotvec(quat_mul(ref, quat_conj(cur)))


def quat_boxminus(ref: Array, cur: Array) -> Array:
    """Rotation vector taking cur to ref: log(ref * cur^-1).

    Both inputs must be unit quaternions; the result magnitude is the
    geodesic angle between them, in [0, pi].
    """
    ref = _quat(ref, "ref")
    cur = _quat(cur, "cur")
    return _boxminus_unchecked(ref, cur)


def quat_boxplus(q: Array, delta: Array) -> Array:
    """Apply a rotation-vector increment: exp(delta) * q.

    Inverse of quat_boxminus: quat_boxplus(cur, quat_boxminus(ref, cur))
    recovers ref (up to sign canonicalization).
    """
    q = _quat(q)
    out = quat_mul(quat_from_rotvec(delta), q)
    return quat_canonical(out / np.linalg.norm(out))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation (unit quaternion, scalar-first) then translation."""

    position: Array
    orientation: Array

    def __post_init__(self):
        pos = _vec3(self.position, "position")
        q = _quat(self.orientation, "orientation")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat_canonical(q))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), quat_identity())

    def rotation_matrix(self) -> Array:
        return quat_to_matrix(self.orientation)

    def transform_point(self, p: Array) -> Array:
        return quat_rotate(self.orientation, np.asarray(p, dtype=np.float64)) + self.position

    def transform_vector(self, v: Array) -> Array:
        return quat_rotate(self.orientation, np.asarray(v, dtype=np.float64))

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self * other)(x) = self(other(x))."""
        return Pose(
            self.transform_point(other.position),
            quat_mul(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        q_inv = quat_conj(self.orientation)
        return Pose(-quat_rotate(q_inv, self.position), q_inv)


@dataclass(frozen=True)
class Twist:
    """Spatial velocity: linear (m/s) and angular (rad/s) parts."""

    linear: Array
    angular: Array

    def __post_init__(self):
        object.__setattr__(self, "linear", _vec3(self.linear, "linear"))
        object.__setattr__(self, "angular", _vec3(self.angular, "angular"))

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and full edge lengths."""

    center: Array
    size: Array

    def __post_init__(self):
        center = _vec3(self.center, "center")
        size = _vec3(self.size, "size")
        if np.any(size < 0):
            raise ValueError("box size must be non-negative")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "size", size)

    def contains(self, p: Array) -> bool:
        return bool(np.all(np.abs(np.asarray(p) - self.center) <= 0.5 * self.size))


# Kinds accepted by state_boxminus: everything but orientation lives in a
# plain vector space.
STATE_KINDS = ("position", "velocity", "joint", "orientation")


def state_boxminus(ref, cur, kind: str) -> Array:
    """Manifold-aware difference ref (-) cur for one state component.

    Euclidean kinds subtract componentwise; orientations (unit quaternions)
    return the rotation-vector error. The squared tracking error is the
    plain dimension-wise sum of squares of the result.
    """
    if kind not in STATE_KINDS:
        raise ValueError(f"unknown state kind {kind!r}")
    if kind == "orientation":
        return quat_boxminus(ref, cur)
    ref = np.asarray(ref, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    if ref.shape != cur.shape:
        raise ValueError(f"shape mismatch for kind {kind!r}: {ref.shape} vs {cur.shape}")
    if kind in ("position", "velocity") and ref.shape != (3,):
        raise ValueError(f"kind {kind!r} expects shape (3,), got {ref.shape}")
    return ref - cur


def to_base_frame(world_vec: Array, base: Pose, is_point: bool) -> Array:
    """Re-express a world-frame quantity in the base frame.

    Points are translated then rotated; free vectors (velocities, gravity)
    are only rotated.
    """
    v = np.asarray(world_vec, dtype=np.float64)
    q_inv = quat_conj(base.orientation)
    if is_point:
        return quat_rotate(q_inv, v - base.position)
    return quat_rotate(q_inv, v)


@dataclass(frozen=True)
class Joint:
    """Revolute joint: fixed offset from the parent frame, then rotation about axis."""

    name: str
    parent: int  # index of parent joint, -1 for the root
    offset: Pose
    axis: Array
    limits: tuple[float, float]

    def __post_init__(self):
        axis = _vec3(self.axis, "axis")
        n = np.linalg.norm(axis)
        if n < _EPS:
            raise ValueError(f"joint {self.name!r} has zero rotation axis")
        object.__setattr__(self, "axis", axis / n)
        lo, hi = self.limits
        if not lo < hi:
            raise ValueError(f"joint {self.name!r} limits must satisfy lo < hi")
        object.__setattr__(self, "limits", (float(lo), float(hi)))


@dataclass(frozen=True)
class EndEffector:
    """Named fixed frame rigidly attached to a joint frame."""

    name: str
    parent: int
    offset: Pose


@dataclass(frozen=True)
class KinematicChain:
    """Serial/tree chain of revolute joints with named end-effector frames."""

    joints: tuple[Joint, ...]
    end_effectors: tuple[EndEffector, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "end_effectors", tuple(self.end_effectors))
        names = set()
        for i, j in enumerate(self.joints):
            if not -1 <= j.parent < i:
                raise ValueError(
                    f"joint {j.name!r} parent {j.parent} breaks topological order"
                )
            if j.name in names:
                raise ValueError(f"duplicate frame name {j.name!r}")
            names.add(j.name)
        for ee in self.end_effectors:
            if not -1 <= ee.parent < len(self.joints):
                raise ValueError(f"end effector {ee.name!r} has invalid parent")
            if ee.name in names:
                raise ValueError(f"duplicate frame name {ee.name!r}")
            names.add(ee.name)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    def joint_limits(self) -> Array:
        """Limits as a (n, 2) array of [lo, hi] rows."""
        return np.array([j.limits for j in self.joints])

    def end_effector_names(self) -> tuple[str, ...]:
        return tuple(ee.name for ee in self.end_effectors)

    def clamp(self, q: Array) -> Array:
        lims = self.joint_limits()
        return np.clip(np.asarray(q, dtype=np.float64), lims[:, 0], lims[:, 1])


def forward_kinematics(chain: KinematicChain, root: Pose, q) -> dict[str, Pose]:
    """World pose of every joint and end-effector frame.

    Frame pose of joint j: parent_pose * offset * Rot(axis, q_j).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (chain.n_joints,):
        raise ValueError(
            f"expected {chain.n_joints} joint angles, got shape {q.shape}"
        )
    if not np.all(np.isfinite(q)):
        raise ValueError("joint angles must be finite")
    poses: list[Pose] = []
    out: dict[str, Pose] = {}
    for i, joint in enumerate(chain.joints):
        parent = root if joint.parent < 0 else poses[joint.parent]
        local = Pose(np.zeros(3), quat_from_rotvec(joint.axis * q[i]))
        pose = parent.compose(joint.offset).compose(local)
        poses.append(pose)
        out[joint.name] = pose
    for ee in chain.end_effectors:
        parent = root if ee.parent < 0 else poses[ee.parent]
        out[ee.name] = parent.compose(ee.offset)
    return out


def chain_from_dict(data: Mapping) -> KinematicChain:
    joints = tuple(
        Joint(
            name=j["name"],
            parent=int(j["parent"]),
            offset=Pose(np.asarray(j["offset_pos"]), np.asarray(j["offset_quat"])),
            axis=np.asarray(j["axis"]),
            limits=(float(j["limits"][0]), float(j["limits"][1])),
        )
        for j in data["joints"]
    )
    end_effectors = tuple(
        EndEffector(
            name=e["name"],
            parent=int(e["parent"]),
            offset=Pose(np.asarray(e["offset_pos"]), np.asarray(e["offset_quat"])),
        )
        for e in data.get("end_effectors", [])
    )
    return KinematicChain(joints, end_effectors)


def chain_to_dict(chain: KinematicChain) -> dict:
    return {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "offset_pos": j.offset.position.tolist(),
                "offset_quat": j.offset.orientation.tolist(),
                "axis": j.axis.tolist(),
                "limits": list(j.limits),
            }
            for j in chain.joints
        ],
        "end_effectors": [
            {
                "name": e.name,
                "parent": e.parent,
                "offset_pos": e.offset.position.tolist(),
                "offset_quat": e.offset.orientation.tolist(),
            }
            for e in chain.end_effectors
        ],
    }


def load_chain(path) -> KinematicChain:
    with open(path) as f:
        return chain_from_dict(json.load(f))


def save_chain(chain: KinematicChain, path) -> None:
    with open(path, "w") as f:
        json.dump(chain_to_dict(chain), f, indent=2)
        f.write("\n")
