"""Compare tabular Q-learning with and without halt-time reward shaping.

The shaped variant maintains an event-time envelope over halt positions and
rewards the agent for stopping sooner than the fastest run seen so far at
the same position. Both runs share seeds, so the comparison is exact.
"""

import numpy as np

from canonform import SimConfig, TrainConfig, train

EPISODES = 2000
ENV = SimConfig(max_steps=1000)

print(f"Training {EPISODES} episodes per variant (same seed) ...")
shaped = train(
    TrainConfig(episodes=EPISODES, seed=0, shaping="temporal", kappa=1.0), ENV
)
unshaped = train(TrainConfig(episodes=EPISODES, seed=0), ENV)

tail = EPISODES // 10
print(f"Greedy evaluation length, mean over the final {tail} episodes:")
print(f"  shaped:   {shaped.eval_lengths[-tail:].mean():7.1f} steps")
print(f"  unshaped: {unshaped.eval_lengths[-tail:].mean():7.1f} steps")
print(f"Best shaped evaluation: {shaped.eval_lengths.min()} steps")
print(f"Envelope grew to {len(shaped.distribution.breakpoints)} breakpoints")

def first_solve(result):
    hits = np.flatnonzero(result.eval_lengths < ENV.max_steps)
    return int(hits[0]) if hits.size else None

print(f"First episode whose greedy policy reaches the goal: "
      f"shaped {first_solve(shaped)}, unshaped {first_solve(unshaped)}")
