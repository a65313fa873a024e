"""Style discriminator: feature windows, adversarial loss, manual gradients.

The discriminator scores short state histories as reference-like or not.
Here synthetic "reference" windows are smooth sinusoidal motions and
"policy" windows are the same plus jitter; a few gradient steps separate
them, and the clamped score of each becomes the style reward.

Run from the repository root:  python3 demos/05_style_discriminator.py
"""

import numpy as np

from shuttlekit.amp import (
    AmpConfig,
    AmpFrame,
    Mlp,
    assemble_history,
    disc_forward,
    disc_loss_and_grads,
    grad_wrt_input,
    mlp_init,
)
from shuttlekit.reward import style_reward

rng = np.random.default_rng(8)
cfg = AmpConfig(history_length=5, grad_penalty_weight=1.0)

FRAME_DIM = 6


def window(jitter):
    t0 = rng.uniform(0, 2 * np.pi)
    frames = []
    for k in range(cfg.history_length):
        t = t0 + 0.05 * k
        base = np.array([np.sin(t), np.cos(t), 0.5 * np.sin(2 * t),
                         0.85, 0.0, -1.0])
        frames.append(AmpFrame(base + rng.normal(0, jitter, FRAME_DIM)))
    return assemble_history(frames, cfg)


print("== history assembly ==")
obs = window(jitter=0.0)
print(f"{cfg.history_length} frames of {FRAME_DIM} features -> window of {len(obs)}")

print("\n== gradient check on a random net ==")
net = mlp_init([len(obs), 16, 1], rng)
x = rng.normal(size=len(obs))
g = grad_wrt_input(net, x)
h = 1e-6
fd = np.array([
    (disc_forward(net, x + h * e) - disc_forward(net, x - h * e)) / (2 * h)
    for e in np.eye(len(obs))
])
print(f"max |analytic - finite difference| = {np.max(np.abs(g - fd)):.2e}")

print("\n== a few descent steps on the adversarial loss ==")
reference = [window(jitter=0.0) for _ in range(64)]
policy = [window(jitter=0.5) for _ in range(64)]
lr = 0.1
for it in range(500):
    out = disc_loss_and_grads(net, reference, policy, cfg)
    net = Mlp(
        tuple(w - lr * gw for w, gw in zip(net.weights, out.weight_grads)),
        tuple(b - lr * gb for b, gb in zip(net.biases, out.bias_grads)),
    )
    if it % 100 == 0 or it == 499:
        print(f"  step {it:2d}: loss {out.loss:6.3f} "
              f"(real {out.real_term:.3f}, fake {out.fake_term:.3f}, "
              f"penalty {out.penalty_term:.3f})")

print("\n== scores become style rewards ==")
d_ref = float(np.mean([disc_forward(net, window(0.0)) for _ in range(32)]))
d_pol = float(np.mean([disc_forward(net, window(0.5)) for _ in range(32)]))
print(f"reference-like windows: D = {d_ref:+.2f} -> style reward {style_reward(d_ref):.3f}")
print(f"jittery policy windows: D = {d_pol:+.2f} -> style reward {style_reward(d_pol):.3f}")
