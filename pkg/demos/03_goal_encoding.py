"""Goal-conditioned state encoding: time-to-hit and phase masking.

Run from the repository root:  python3 demos/03_goal_encoding.py
"""

import numpy as np

from shuttlekit.goal import (
    ClipFrame,
    ReferenceClip,
    RobotState,
    StrikeTarget,
    encode_goal,
    reference_window,
    time_to_hit,
)
from shuttlekit.spatial import Pose, Twist, quat_from_rotvec, quat_identity

print("== time-to-hit is clipped to [-2, 2] s ==")
for now in (0.0, 1.5, 2.4, 3.0, 6.0):
    print(f"  now = {now:4.1f} s, hit at 2.4 s  ->  tth = {time_to_hit(now, 2.4):+.2f}")

print("\n== phase masking around the strike ==")
state = RobotState(
    root=Pose(np.array([0.0, 0.0, 0.85]), quat_identity()),
    root_twist=Twist.zero(),
    q=np.zeros(3),
    qd=np.zeros(3),
    projected_gravity=np.array([0.0, 0.0, -1.0]),
    last_action=np.zeros(3),
    base_height=0.85,
    feet_contacts=np.ones(2),
)
target = StrikeTarget(
    hit_time=1.0,
    hit_racket_pose=Pose(np.array([0.6, -0.3, 1.15]), quat_from_rotvec([0, 0.4, 0])),
    recovery_root_pose=Pose(np.array([0.0, 0.0, 0.85]), quat_identity()),
)
racket_now = Pose(np.array([0.3, -0.2, 1.0]), quat_identity())
for now in (0.2, 1.0, 1.6):
    obs = encode_goal(state, target, now=now, racket_pose=racket_now)
    print(f"  now = {now:.1f} s: phase = {obs.phase:<12} tth = {obs.tth:+.1f}  "
          f"|hit| = {np.linalg.norm(obs.hit_delta):.3f}  "
          f"|rec| = {np.linalg.norm(obs.recovery_delta):.3f}")
print("  (the block irrelevant to the phase is exactly zero)")

print("\n== reference windows from a motion clip ==")
frames = tuple(
    ClipFrame(
        t=0.1 * k,
        root=Pose(np.array([0.2 * k, 0.0, 0.85]), quat_from_rotvec([0, 0, 0.05 * k])),
        root_lin=np.array([2.0, 0.0, 0.0]),
        root_ang=np.array([0.0, 0.0, 0.5]),
        q=np.array([0.1 * k, -0.07 * k]),
    )
    for k in range(8)
)
clip = ReferenceClip(frames, hit_times=(0.4,), recovery_times=(0.65,))
window = reference_window(clip, t=0.2, horizon=3)
print("root position deltas per future frame (base frame):")
for k, row in enumerate(window.root_deltas, start=1):
    print(f"  +{k}: dpos = {np.round(row[0:3], 3)}  drot = {np.round(row[3:6], 3)}")
print(f"joint deltas:\n  {np.round(window.joint_deltas, 3)}")
print(f"annotated hits at {clip.hit_times}, recoveries at {clip.recovery_times}")
