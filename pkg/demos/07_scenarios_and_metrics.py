"""Scenario generation and evaluation: manifolds, randomization, metrics.

Run from the repository root:  python3 demos/07_scenarios_and_metrics.py
"""

import numpy as np

from shuttlekit.scenario import (
    EpisodeRecord,
    RandomizationTable,
    ServeConfig,
    evaluate_episodes,
    expand_manifold,
    sample_randomization,
    sample_rhythm_interval,
    serve_trajectory,
)
from shuttlekit.shuttle import (
    CourtGeometry,
    ShuttleParams,
    ShuttleState,
    lands_in_court,
    simulate_to_ground,
)

rng = np.random.default_rng(21)
params = ShuttleParams(mass=0.005, drag_coeff=0.001)
court = CourtGeometry(net_height=1.55, net_x=3.0, x_min=3.2, x_max=9.0,
                      y_min=-2.6, y_max=2.6)

print("== densifying sparse strike points ==")
demonstrated = [
    (np.array([0.2, 0.1, 1.1]), 1.0),
    (np.array([-0.3, -0.1, 1.15]), 1.2),
    (np.array([0.5, 0.0, 1.05]), 0.9),
]
for mode in ("easy", "hard"):
    manifold = expand_manifold(demonstrated, radius=0.5, time_jitter=0.4,
                               count=2000, mode=mode, seed=4)
    spread = np.ptp([p.position for p in manifold.points], axis=0)
    print(f"  {mode:>4}: 2000 targets, spread {np.round(spread, 2)} m "
          f"inside a {tuple(manifold.volume.size)} box")

print("\n== serve rhythm and dynamics randomization ==")
intervals = [sample_rhythm_interval(rng) for _ in range(5)]
print(f"  next-serve intervals: {np.round(intervals, 2)} s (uniform in [1, 6])")
draw = sample_randomization(RandomizationTable(), rng)
for name in ("base_mass", "pd_gain_scale", "control_latency_ms", "ground_friction"):
    print(f"  {name:<20} = {draw[name]:+.3f}")

print("\n== aiming serves at manifold targets ==")
manifold = expand_manifold(demonstrated, radius=0.4, time_jitter=0.3,
                           count=6, mode="easy", seed=12)
serve_cfg = ServeConfig(origin=np.array([6.0, 0.0, 2.0]),
                        origin_jitter=np.array([0.3, 0.3, 0.2]))
records = []
for i, target in enumerate(manifold.points):
    launch = serve_trajectory(target, court, params, rng, serve_cfg)
    print(f"  target {np.round(target.position, 2)} at t = {target.time_offset:.2f} s"
          f"  <- launch velocity {np.round(launch.velocity, 2)}")

    # pretend the robot intercepts with some scatter and lifts the ball back
    offset = rng.normal(0.0, 0.03, 3)
    intercepted = bool(np.linalg.norm(offset) < 0.08)
    if not intercepted:
        records.append(EpisodeRecord(i, False, None))
        continue
    returned = ShuttleState(target.position,
                            np.array([7.0, rng.normal(0, 0.6), 4.0]))
    flight = simulate_to_ground(returned, params, dt=0.005, t_max=10.0)
    outcome = lands_in_court(flight.landing.point, flight.trajectory, court)
    records.append(EpisodeRecord(
        serve_id=i, intercepted=True, impact_offset=offset,
        landed=True, in_bounds=outcome.in_bounds, cleared_net=outcome.cleared_net,
        return_speed=float(np.linalg.norm(returned.velocity)),
    ))

print("\n== episode metrics ==")
metrics = evaluate_episodes(records)
print(f"  SR  = {metrics.sr:.2f}   (fraction of serves intercepted)")
print(f"  MSE = {metrics.mse:.4f} (mean squared sweet-spot offset, m^2)")
print(f"  IBR = {metrics.ibr:+.2f}  (+1 clean return, -0.25 fault, 0 miss)")
