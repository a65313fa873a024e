"""Style-discriminator machinery: feature windows, a small tanh MLP with
manual differentiation, and the least-squares adversarial loss.

All derivatives are computed by hand, including the second-order terms the
gradient penalty needs (the penalty differentiates the input gradient with
respect to the parameters), so the implementation stays framework-free and
checkable against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .goal import RobotState
from .spatial import KinematicChain, Pose, quat_conj, quat_rotate

Array = np.ndarray

DEFAULT_EE_ORDER = ("left_ankle", "right_ankle", "left_hand", "right_hand")


@dataclass(frozen=True)
class AmpConfig:
    history_length: int = 5
    grad_penalty_weight: float = 10.0

    def __post_init__(self):
        if self.history_length < 1:
            raise ValueError("history_length must be at least 1")
        if self.grad_penalty_weight < 0:
            raise ValueError("grad_penalty_weight must be non-negative")


@dataclass(frozen=True)
class AmpFrame:
    """Single-frame feature vector, everything in the robot base frame.

    Layout: [base linear velocity(3), joint angles(n), base height(1),
    projected gravity(3), end-effector positions(3E), end-effector
    velocities(3E)] for E end-effectors in a fixed order.
    """

    features: Array

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))

    def __len__(self) -> int:
        return self.features.size


@dataclass(frozen=True)
class AmpObservation:
    """History window of frames, newest first."""

    features: Array

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))

    def __len__(self) -> int:
        return self.features.size


def frame_features(
    state: RobotState,
    ee_poses: Mapping[str, Pose],
    ee_vels: Mapping[str, Array],
    chain: KinematicChain,
    ee_order: Sequence[str] = DEFAULT_EE_ORDER,
) -> AmpFrame:
    """Assemble one discriminator frame from a robot state.

    End-effector poses/velocities are world-frame inputs (e.g. from
    forward kinematics) and get re-expressed in the base frame, which
    makes the features invariant to rigid transforms of the world.
    """
    chain_frames = set(chain.end_effector_names())
    q_inv = quat_conj(state.root.orientation)
    parts = [
        quat_rotate(q_inv, state.root_twist.linear),
        state.q,
        np.array([state.base_height]),
        state.projected_gravity,
    ]
    ee_pos = []
    ee_vel = []
    for name in ee_order:
        if name not in chain_frames:
            raise ValueError(f"chain has no end effector named {name!r}")
        if name not in ee_poses or name not in ee_vels:
            raise ValueError(f"missing pose/velocity for end effector {name!r}")
        ee_pos.append(quat_rotate(q_inv, ee_poses[name].position - state.root.position))
        ee_vel.append(quat_rotate(q_inv, np.asarray(ee_vels[name], dtype=np.float64)))
    parts.extend(ee_pos)
    parts.extend(ee_vel)
    return AmpFrame(np.concatenate(parts))


def assemble_history(buffer: Sequence[AmpFrame], cfg: AmpConfig) -> AmpObservation:
    """Concatenate the newest history_length frames, newest first.

    The buffer is chronological (oldest to newest). At episode start, when
    fewer frames exist, the oldest frame is repeated to fill the window.
    """
    if len(buffer) == 0:
        raise ValueError("frame buffer is empty")
    width = len(buffer[0])
    if any(len(f) != width for f in buffer):
        raise ValueError("frames in the buffer have inconsistent lengths")
    h = cfg.history_length
    picked = []
    for k in range(h):
        idx = max(len(buffer) - 1 - k, 0)
        picked.append(buffer[idx].features)
    return AmpObservation(np.concatenate(picked))


@dataclass(frozen=True)
class Mlp:
    """Fully connected net, tanh hidden activations, scalar linear output.

    weights[l] has shape (out_l, in_l); biases[l] has shape (out_l,).
    """

    weights: tuple[Array, ...]
    biases: tuple[Array, ...]

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=np.float64) for b in self.biases)
        if len(ws) != len(bs) or len(ws) == 0:
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i} has inconsistent shapes")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise ValueError(f"layer {i} input dim does not match layer {i-1} output")
        if ws[-1].shape[0] != 1:
            raise ValueError("output layer must produce a scalar")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]


def mlp_init(layer_sizes: Sequence[int], rng: np.random.Generator) -> Mlp:
    """Random net with 1/sqrt(fan_in) scaled normal weights, zero biases."""
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(tuple(weights), tuple(biases))


def _as_batch(obs) -> Array:
    if isinstance(obs, AmpObservation):
        return obs.features[None, :]
    arr = np.asarray(obs, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :]
    return arr


def _forward(m: Mlp, x: Array) -> list[Array]:
    """Activations [a0 .. aL] for a batch; aL is the (B, 1) raw output."""
    acts = [x]
    a = x
    last = len(m.weights) - 1
    for l, (w, b) in enumerate(zip(m.weights, m.biases)):
        z = a @ w.T + b
        a = z if l == last else np.tanh(z)
        acts.append(a)
    return acts


def disc_forward(m: Mlp, obs) -> float:
    """Discriminator score for a single observation."""
    x = _as_batch(obs)
    if x.shape != (1, m.input_size):
        raise ValueError(f"expected one observation of length {m.input_size}")
    return float(_forward(m, x)[-1][0, 0])


def disc_forward_batch(m: Mlp, batch) -> Array:
    x = _as_batch(batch)
    if x.shape[1] != m.input_size:
        raise ValueError(f"expected observations of length {m.input_size}")
    return _forward(m, x)[-1][:, 0]


def _input_grads(m: Mlp, acts: list[Array]) -> Array:
    """Batched dD/dx via reverse accumulation; returns (B, input_size)."""
    batch = acts[0].shape[0]
    u = np.ones((batch, 1))
    for l in range(len(m.weights) - 1, -1, -1):
        v = u @ m.weights[l]  # dD/da_{l-1}
        if l > 0:
            u = v * (1.0 - acts[l] ** 2)
        else:
            return v
    raise AssertionError("unreachable")


def grad_wrt_input(m: Mlp, obs) -> Array:
    """Exact gradient of the scalar output with respect to the input."""
    x = _as_batch(obs)
    if x.shape != (1, m.input_size):
        raise ValueError(f"expected one observation of length {m.input_size}")
    return _input_grads(m, _forward(m, x))[0]


def _param_grads_of_output(
    m: Mlp, acts: list[Array], coeff: Array
) -> tuple[list[Array], list[Array]]:
    """Gradients of sum_b coeff_b * D(x_b) with respect to weights/biases."""
    n_layers = len(m.weights)
    d_w = [np.zeros_like(w) for w in m.weights]
    d_b = [np.zeros_like(b) for b in m.biases]
    u = coeff[:, None]  # dL/dz_L
    for l in range(n_layers - 1, -1, -1):
        d_w[l] += u.T @ acts[l]
        d_b[l] += u.sum(axis=0)
        if l > 0:
            u = (u @ m.weights[l]) * (1.0 - acts[l] ** 2)
    return d_w, d_b


def _param_grads_of_penalty(
    m: Mlp, acts: list[Array], g: Array
) -> tuple[list[Array], list[Array]]:
    """Gradients of s = sum_b g_b . grad_x D(x_b) with respect to the
    parameters, treating g as constant.

    Implemented as a forward tangent pass seeded with g (a directional
    derivative of D), then reverse accumulation through both the primal
    and tangent computations. With g set to the actual input gradients,
    this equals the parameter gradient of sum_b |grad_x D(x_b)|^2 / 2.
    """
    n_layers = len(m.weights)
    last = n_layers - 1
    # tangent forward: tz[l] before activation, t[l] after
    t = g
    tangents_in = []   # t_{l-1} feeding layer l
    tangents_out = []  # tz_l
    for l in range(n_layers):
        tangents_in.append(t)
        tz = t @ m.weights[l].T
        tangents_out.append(tz)
        if l < last:
            t = (1.0 - acts[l + 1] ** 2) * tz
    d_w = [np.zeros_like(w) for w in m.weights]
    d_b = [np.zeros_like(b) for b in m.biases]
    batch = acts[0].shape[0]
    lam = np.ones((batch, 1))  # ds/d(tz_l)
    mu = np.zeros((batch, 1))  # ds/d(z_l)
    for l in range(last, -1, -1):
        d_w[l] += mu.T @ acts[l] + lam.T @ tangents_in[l]
        d_b[l] += mu.sum(axis=0)
        if l > 0:
            alpha = mu @ m.weights[l]   # ds/d(a_{l-1})
            tau = lam @ m.weights[l]    # ds/d(t_{l-1})
            h = 1.0 - acts[l] ** 2      # tanh'(z_{l-1})
            mu = alpha * h + tau * (-2.0 * acts[l] * h) * tangents_out[l - 1]
            lam = tau * h
    return d_w, d_b


@dataclass(frozen=True)
class DiscriminatorLoss:
    loss: float
    real_term: float
    fake_term: float
    penalty_term: float
    weight_grads: tuple[Array, ...]
    bias_grads: tuple[Array, ...]


def disc_loss_and_grads(
    m: Mlp, real, fake, cfg: AmpConfig
) -> DiscriminatorLoss:
    """Least-squares discriminator loss with gradient penalty on real data.

    loss = mean_real (D-1)^2 + mean_fake (D+1)^2
         + (w_gp / 2) * mean_real |grad_x D|^2

    The penalty is applied to the reference (real) samples only. Parameter
    gradients of all three terms are exact.
    """
    x_real = np.stack([_as_batch(o)[0] for o in real]) if isinstance(real, (list, tuple)) else _as_batch(real)
    x_fake = np.stack([_as_batch(o)[0] for o in fake]) if isinstance(fake, (list, tuple)) else _as_batch(fake)
    if x_real.shape[0] == 0 or x_fake.shape[0] == 0:
        raise ValueError("real and fake batches must be non-empty")
    if x_real.shape[1] != m.input_size or x_fake.shape[1] != m.input_size:
        raise ValueError(f"observations must have length {m.input_size}")
    n_real = x_real.shape[0]
    n_fake = x_fake.shape[0]

    acts_real = _forward(m, x_real)
    acts_fake = _forward(m, x_fake)
    d_real = acts_real[-1][:, 0]
    d_fake = acts_fake[-1][:, 0]

    real_term = float(np.mean((d_real - 1.0) ** 2))
    fake_term = float(np.mean((d_fake + 1.0) ** 2))
    gw_r, gb_r = _param_grads_of_output(m, acts_real, 2.0 * (d_real - 1.0) / n_real)
    gw_f, gb_f = _param_grads_of_output(m, acts_fake, 2.0 * (d_fake + 1.0) / n_fake)

    penalty_term = 0.0
    gw_p = [np.zeros_like(w) for w in m.weights]
    gb_p = [np.zeros_like(b) for b in m.biases]
    if cfg.grad_penalty_weight > 0.0:
        g = _input_grads(m, acts_real)
        penalty_term = float(
            cfg.grad_penalty_weight / 2.0 * np.mean(np.sum(g * g, axis=1))
        )
        # d/dtheta of (w_gp / (2 n)) sum_b |g_b|^2  =  (w_gp / n) * d(g . g_hat)/dtheta
        scale = cfg.grad_penalty_weight / n_real
        gw_p, gb_p = _param_grads_of_penalty(m, acts_real, g)
        gw_p = [scale * w for w in gw_p]
        gb_p = [scale * b for b in gb_p]

    weight_grads = tuple(a + b + c for a, b, c in zip(gw_r, gw_f, gw_p))
    bias_grads = tuple(a + b + c for a, b, c in zip(gb_r, gb_f, gb_p))
    return DiscriminatorLoss(
        loss=real_term + fake_term + penalty_term,
        real_term=real_term,
        fake_term=fake_term,
        penalty_term=penalty_term,
        weight_grads=weight_grads,
        bias_grads=bias_grads,
    )


# ---------------------------------------------------------------------------
# File formats


def save_mlp(m: Mlp, path) -> None:
    data = {
        "layers": [
            {"w": w.tolist(), "b": b.tolist()} for w, b in zip(m.weights, m.biases)
        ]
    }
    with open(path, "w") as f:
        json.dump(data, f)
        f.write("\n")


def load_mlp(path) -> Mlp:
    with open(path) as f:
        data = json.load(f)
    weights = tuple(np.asarray(layer["w"]) for layer in data["layers"])
    biases = tuple(np.asarray(layer["b"]) for layer in data["layers"])
    return Mlp(weights, biases)


def save_observations_csv(batch: Sequence[AmpObservation], path) -> None:
    """One observation per row, plain comma-separated values."""
    with open(path, "w") as f:
        for obs in batch:
            f.write(",".join(format(v, ".9g") for v in obs.features) + "\n")


def load_observations_csv(path) -> list[AmpObservation]:
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return [AmpObservation(row) for row in data]
