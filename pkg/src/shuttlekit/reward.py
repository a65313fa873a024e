"""Reward kernels and termination predicates for the striking curriculum.

Tracking rewards share one shape: a weighted sum of exponential kernels
over squared component errors. What changes between training phases is
the temporal gate in front of the sum: an exponential decay in the
time-to-hit early on, and a sparse indicator window around the strike
instant once ball physics is in the loop.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .goal import RobotState
from .shuttle import CourtGeometry, CourtResult
from .spatial import Pose

Array = np.ndarray


@dataclass(frozen=True)
class RewardConfig:
    """Weights and kernel scales for the tracking rewards.

    hit_* and rec_* run over the tracked state components of the hitting
    and recovery phases. sigma_time scales the exponential time-to-hit
    decay; epsilon is the half-width of the sparse impact window. w_task
    and w_style mix the task and style rewards.
    """

    hit_weights: Array
    hit_scales: Array
    rec_weights: Array
    rec_scales: Array
    sigma_time: float
    epsilon: float
    w_task: float = 1.0
    w_style: float = 1.0

    def __post_init__(self):
        for name in ("hit_weights", "hit_scales", "rec_weights", "rec_scales"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.hit_weights.shape != self.hit_scales.shape:
            raise ValueError("hit_weights and hit_scales must have matching length")
        if self.rec_weights.shape != self.rec_scales.shape:
            raise ValueError("rec_weights and rec_scales must have matching length")
        if np.any(self.hit_scales <= 0) or np.any(self.rec_scales <= 0):
            raise ValueError("kernel scales must be positive")
        if np.any(self.hit_weights < 0) or np.any(self.rec_weights < 0):
            raise ValueError("weights must be non-negative")
        if self.sigma_time <= 0:
            raise ValueError("sigma_time must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.w_task < 0 or self.w_style < 0:
            raise ValueError("mixing weights must be non-negative")


@dataclass(frozen=True)
class TerminationConfig:
    min_base_height: float
    max_base_tilt: float
    max_ref_deviation: float

    def __post_init__(self):
        if min(self.min_base_height, self.max_base_tilt, self.max_ref_deviation) <= 0:
            raise ValueError("termination thresholds must be positive")


@dataclass(frozen=True)
class TerminationResult:
    terminate: bool
    reason: Optional[str] = None


def exp_kernel(err_sq: float, sigma: float) -> float:
    """exp(-err_sq / sigma): 1 at zero error, strictly decreasing."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if err_sq < 0:
        raise ValueError("squared error must be non-negative")
    return math.exp(-err_sq / sigma)


def _kernel_sum(err_sqs: Sequence[float], weights: Array, scales: Array) -> float:
    if len(err_sqs) != len(weights):
        raise ValueError(
            f"got {len(err_sqs)} error components, config has {len(weights)}"
        )
    return float(sum(w * exp_kernel(e, s) for e, w, s in zip(err_sqs, weights, scales)))


def _squared_norms(deltas: Sequence[Array]) -> list[float]:
    out = []
    for d in deltas:
        d = np.asarray(d, dtype=np.float64).ravel()
        out.append(float(np.dot(d, d)))
    return out


def hit_tracking_reward(deltas: Sequence[Array], tth: float, c: RewardConfig) -> float:
    """Racket tracking reward with exponential time-to-hit decay.

    exp(-|tth| / sigma_time) * sum_i w_i exp(-|delta_i|^2 / sigma_i).
    """
    gate = math.exp(-abs(tth) / c.sigma_time)
    return gate * _kernel_sum(_squared_norms(deltas), c.hit_weights, c.hit_scales)


def recovery_tracking_reward(deltas: Sequence[Array], tth: float, c: RewardConfig) -> float:
    """Root tracking reward, active only after impact (tth < 0), no decay."""
    if tth >= 0.0:
        return 0.0
    return _kernel_sum(_squared_norms(deltas), c.rec_weights, c.rec_scales)


def sparse_hit_tracking_reward(deltas: Sequence[Array], tth: float, c: RewardConfig) -> float:
    """Racket tracking reward gated to the narrow window |tth| < epsilon.

    Outside the window the reward is exactly zero, |tth| == epsilon
    included; only the strike instant itself is rewarded.
    """
    if abs(tth) >= c.epsilon:
        return 0.0
    return _kernel_sum(_squared_norms(deltas), c.hit_weights, c.hit_scales)


@dataclass(frozen=True)
class HitQualityConfig:
    """Return-shot scoring: speed ramp scale and the direction gate.

    The default direction gate is binary (in bounds and over the net).
    graded=True swaps in exp(-d^2 / direction_scale) on the landing
    point's distance to the court rectangle, still zeroed on net faults.
    """

    speed_scale: float
    graded: bool = False
    direction_scale: float = 1.0

    def __post_init__(self):
        if self.speed_scale <= 0:
            raise ValueError("speed_scale must be positive")
        if self.direction_scale <= 0:
            raise ValueError("direction_scale must be positive")


def _distance_to_rect(x: float, y: float, court: CourtGeometry) -> float:
    dx = max(court.x_min - x, 0.0, x - court.x_max)
    dy = max(court.y_min - y, 0.0, y - court.y_max)
    return math.hypot(dx, dy)


def hit_quality_reward(
    landing: CourtResult,
    post_impact_speed: float,
    cfg: HitQualityConfig,
    landing_point: Optional[Array] = None,
    court: Optional[CourtGeometry] = None,
) -> float:
    """Product of a direction gate and a clamped linear speed ramp."""
    if post_impact_speed < 0:
        raise ValueError("speed must be non-negative")
    if cfg.graded:
        if landing_point is None or court is None:
            raise ValueError("graded scoring needs the landing point and court")
        if not landing.cleared_net:
            r_dir = 0.0
        else:
            d = _distance_to_rect(float(landing_point[0]), float(landing_point[1]), court)
            r_dir = math.exp(-d * d / cfg.direction_scale)
    else:
        r_dir = 1.0 if (landing.in_bounds and landing.cleared_net) else 0.0
    r_speed = min(post_impact_speed / cfg.speed_scale, 1.0)
    return r_dir * r_speed


def style_reward(d: float) -> float:
    """Clamped quadratic score of the discriminator output: max(0, 1 - 0.25 (d-1)^2)."""
    return max(0.0, 1.0 - 0.25 * (d - 1.0) ** 2)


def total_reward(task: float, style: float, c: RewardConfig) -> float:
    return c.w_task * task + c.w_style * style


def contact_tracking_reward(contacts: Array, ref_contacts: Array) -> float:
    """Fraction of feet whose contact flag matches the reference schedule."""
    contacts = np.asarray(contacts).astype(bool)
    ref = np.asarray(ref_contacts).astype(bool)
    if contacts.shape != ref.shape:
        raise ValueError("contact vectors must have matching shape")
    return float(np.mean(contacts == ref))


def termination_check(
    state: RobotState, ref_root: Pose, c: TerminationConfig
) -> TerminationResult:
    """Safety/performance termination: checks height, then tilt, then deviation."""
    if state.base_height < c.min_base_height:
        return TerminationResult(True, "height")
    body_z = state.root.rotation_matrix()[:, 2]
    tilt = math.acos(float(np.clip(body_z[2], -1.0, 1.0)))
    if tilt > c.max_base_tilt:
        return TerminationResult(True, "tilt")
    deviation = float(np.linalg.norm(state.root.position - ref_root.position))
    if deviation > c.max_ref_deviation:
        return TerminationResult(True, "deviation")
    return TerminationResult(False, None)


# ---------------------------------------------------------------------------
# File formats


def reward_config_from_dict(d) -> RewardConfig:
    return RewardConfig(
        hit_weights=np.asarray(d["hit_weights"]),
        hit_scales=np.asarray(d["hit_scales"]),
        rec_weights=np.asarray(d["rec_weights"]),
        rec_scales=np.asarray(d["rec_scales"]),
        sigma_time=float(d["sigma_time"]),
        epsilon=float(d["epsilon"]),
        w_task=float(d.get("w_task", 1.0)),
        w_style=float(d.get("w_style", 1.0)),
    )


def load_reward_config(path) -> RewardConfig:
    with open(path) as f:
        return reward_config_from_dict(json.load(f))


def score_episode_csv(path, c: RewardConfig) -> list[dict]:
    """Batch-evaluate rewards over an episode log.

    Expected columns: `t`, `tth`, squared hit errors `hit_sq_0..`, squared
    recovery errors `rec_sq_0..`, and optionally `d` (discriminator score).
    Returns one dict per row with the individual rewards and the mixed
    total (task = decayed hit + recovery).
    """
    n_hit = len(c.hit_weights)
    n_rec = len(c.rec_weights)
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            tth = float(row["tth"])
            hit_sq = [float(row[f"hit_sq_{i}"]) for i in range(n_hit)]
            rec_sq = [float(row[f"rec_sq_{j}"]) for j in range(n_rec)]
            gate = math.exp(-abs(tth) / c.sigma_time)
            r_hit = gate * _kernel_sum(hit_sq, c.hit_weights, c.hit_scales)
            if abs(tth) < c.epsilon:
                r_hit_sparse = _kernel_sum(hit_sq, c.hit_weights, c.hit_scales)
            else:
                r_hit_sparse = 0.0
            if tth < 0.0:
                r_rec = _kernel_sum(rec_sq, c.rec_weights, c.rec_scales)
            else:
                r_rec = 0.0
            r_style = style_reward(float(row["d"])) if "d" in row and row["d"] else 0.0
            out.append(
                {
                    "t": float(row["t"]),
                    "hit": r_hit,
                    "hit_sparse": r_hit_sparse,
                    "recovery": r_rec,
                    "style": r_style,
                    "total": total_reward(r_hit + r_rec, r_style, c),
                }
            )
    return out
