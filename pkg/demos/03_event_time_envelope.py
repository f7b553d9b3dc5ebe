"""Fit the minimum source-to-sink time as a function of where the sink fires.

MountainCar halts (zero-crossing of velocity below the goal) are sink
events; the elapsed steps since the episode start form temporal attributes.
The lower convex hull of (position, elapsed) points is a piecewise-linear
envelope answering "how fast has any trajectory ever stopped here?".
"""

import numpy as np

from canonform import (
    SimConfig,
    extract_event_points,
    fit_event_time_distribution,
    make_halt_attribute_fn,
    query_min_time,
    rollout,
    standardize_trajectory,
    update_distribution_online,
)

cfg = SimConfig(max_steps=300)
points = []
for seed in range(20):
    states, actions = rollout(SimConfig(max_steps=300, seed=seed))
    samples = standardize_trajectory(states, actions, make_halt_attribute_fn(cfg))
    pts = extract_event_points(samples, lambda x: float(x[0]))
    points.extend(map(tuple, pts))

print(f"Collected {len(points)} halt events from 20 random episodes")

dist = fit_event_time_distribution(points)
print(f"Envelope breakpoints ({len(dist.breakpoints)}):")
for c, t in dist.breakpoints:
    print(f"  position {c:+.4f} -> {t:.0f} steps")

for position in (-0.9, -0.6, -0.3):
    print(f"Fastest observed stop near {position:+.1f}: "
          f"{query_min_time(dist, position):.1f} steps")

lo, hi = dist.domain
probe = (lo + hi) / 2
before = query_min_time(dist, probe)
dist = update_distribution_online(dist, (probe, max(1.0, before / 2)))
print(f"After one faster observation at {probe:+.3f}: "
      f"{before:.1f} -> {query_min_time(dist, probe):.1f} steps")
