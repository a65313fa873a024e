"""The reward stack: tracking kernels, temporal gates, return quality.

Run from the repository root:  python3 demos/04_reward_stack.py
"""

import numpy as np

from shuttlekit.goal import RobotState
from shuttlekit.reward import (
    HitQualityConfig,
    RewardConfig,
    TerminationConfig,
    contact_tracking_reward,
    hit_quality_reward,
    hit_tracking_reward,
    recovery_tracking_reward,
    sparse_hit_tracking_reward,
    style_reward,
    termination_check,
    total_reward,
)
from shuttlekit.shuttle import CourtResult
from shuttlekit.spatial import Pose, Twist, quat_from_rotvec

cfg = RewardConfig(
    hit_weights=[0.6, 0.4], hit_scales=[0.02, 0.5],
    rec_weights=[1.0, 0.5], rec_scales=[0.1, 0.5],
    sigma_time=0.4, epsilon=0.05,
    w_task=0.7, w_style=0.3,
)

print("== temporal gating of the racket-tracking reward ==")
small_err = [np.array([0.05, 0.0, 0.0]), np.array([0.1, 0.0, 0.0])]
print("  tth    decayed   windowed   recovery")
for tth in (1.0, 0.4, 0.04, 0.0, -0.04, -0.4, -1.0):
    decayed = hit_tracking_reward(small_err, tth, cfg)
    windowed = sparse_hit_tracking_reward(small_err, tth, cfg)
    rec = recovery_tracking_reward(small_err, tth, cfg)
    print(f"  {tth:+5.2f}   {decayed:7.3f}   {windowed:8.3f}   {rec:8.3f}")
print("  (the windowed variant only pays inside |tth| < epsilon; the"
      " recovery reward only after impact)")

print("\n== style reward from a discriminator score ==")
for d in (-1.5, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0):
    print(f"  D = {d:+4.1f}  ->  style = {style_reward(d):.3f}")

print("\n== return quality = direction gate x speed ramp ==")
quality = HitQualityConfig(speed_scale=8.0)
cases = [
    ("clean return at 10 m/s", CourtResult(True, True), 10.0),
    ("clean but weak (3 m/s)", CourtResult(True, True), 3.0),
    ("long (out of bounds)", CourtResult(False, True), 10.0),
    ("into the net", CourtResult(True, False), 10.0),
]
for label, outcome, speed in cases:
    print(f"  {label:<24} -> {hit_quality_reward(outcome, speed, quality):.3f}")

print("\n== mixing task and style ==")
task = hit_tracking_reward(small_err, 0.1, cfg)
print(f"  0.7 * task + 0.3 * style(0.8) = {total_reward(task, style_reward(0.8), cfg):.3f}")

print("\n== footwork: contact schedule agreement ==")
print(f"  both feet right: {contact_tracking_reward([1, 0], [1, 0]):.2f}")
print(f"  one foot off:    {contact_tracking_reward([1, 1], [1, 0]):.2f}")

print("\n== safety termination ==")
term = TerminationConfig(min_base_height=0.4, max_base_tilt=np.radians(60),
                         max_ref_deviation=1.0)


def robot(height, tilt, xy=0.0):
    return RobotState(
        root=Pose(np.array([xy, 0.0, height]), quat_from_rotvec([tilt, 0, 0])),
        root_twist=Twist.zero(), q=np.zeros(1), qd=np.zeros(1),
        projected_gravity=np.array([0.0, 0.0, -1.0]), last_action=np.zeros(1),
        base_height=height, feet_contacts=np.ones(2),
    )


for label, state in (
    ("upright", robot(0.85, 0.0)),
    ("crouched too low", robot(0.2, 0.0)),
    ("tipped over", robot(0.85, np.radians(80))),
    ("wandered away", robot(0.85, 0.0, xy=3.0)),
):
    result = termination_check(state, Pose.identity(), term)
    print(f"  {label:<18} -> terminate = {result.terminate} ({result.reason})")
