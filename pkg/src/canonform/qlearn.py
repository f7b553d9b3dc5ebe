"""Tabular Q-learning for MountainCar, with optional halt-event shaping.

The controller discretizes (position, velocity) into a fixed grid and runs
epsilon-greedy Q-learning on the -1-per-step base reward. With temporal
shaping enabled, every halt event queries the event-time envelope at the
halt position, adds kappa * (reference - elapsed) to that step's reward, and
then folds the new (position, elapsed) observation into the envelope, so
later episodes are scored against the best times seen so far.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .envs import (
    POSITION_MAX,
    POSITION_MIN,
    VELOCITY_LIMIT,
    SimConfig,
    _halt_condition,
    _step_pv,
)
from .temporal import (
    EventTimeDistribution,
    query_min_time,
    shaping_reward,
    update_distribution_online,
)

SHAPING_MODES = ("off", "temporal")


@dataclass
class QTable:
    """Action values on a (position x velocity) grid with 3 actions."""

    pos_bins: int = 64
    vel_bins: int = 64
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.pos_bins < 1 or self.vel_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if self.values is None:
            self.values = np.zeros((self.pos_bins, self.vel_bins, 3))
        else:
            self.values = np.asarray(self.values, dtype=np.float64)
            if self.values.shape != (self.pos_bins, self.vel_bins, 3):
                raise ValueError(
                    f"values shape {self.values.shape} != "
                    f"({self.pos_bins}, {self.vel_bins}, 3)"
                )
            if not np.all(np.isfinite(self.values)):
                raise ValueError("Q values must be finite")

    def bin_of(self, position: float, velocity: float) -> tuple[int, int]:
        ip = int((position - POSITION_MIN) / (POSITION_MAX - POSITION_MIN) * self.pos_bins)
        iv = int((velocity + VELOCITY_LIMIT) / (2.0 * VELOCITY_LIMIT) * self.vel_bins)
        return (
            min(max(ip, 0), self.pos_bins - 1),
            min(max(iv, 0), self.vel_bins - 1),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Episode budget, learning constants, exploration and shaping settings."""

    episodes: int
    gamma: float = 0.99
    alpha: float = 0.1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_frac: float = 0.6
    shaping: str = "off"
    kappa: float = 1.0
    seed: int = 0
    pos_bins: int = 64
    vel_bins: int = 64

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.shaping not in SHAPING_MODES:
            raise ValueError(f"shaping must be one of {SHAPING_MODES}, got {self.shaping!r}")
        if self.kappa < 0.0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")
        if not (0.0 <= self.epsilon_decay_frac <= 1.0):
            raise ValueError("epsilon_decay_frac must be in [0, 1]")


@dataclass
class TrainResult:
    """Per-episode curves plus the trained table and final envelope."""

    lengths: np.ndarray
    base_returns: np.ndarray
    shaped_returns: np.ndarray
    eval_lengths: np.ndarray
    qtable: QTable
    distribution: EventTimeDistribution
    config: TrainConfig


def _greedy_action(row) -> int:
    # ties break toward the lowest action index
    if row[0] >= row[1] and row[0] >= row[2]:
        return 0
    if row[1] >= row[2]:
        return 1
    return 2


def _greedy_length(q_rows, pos_scale, vel_scale, pos_bins, vel_bins, env_cfg: SimConfig) -> int:
    p, v = env_cfg.start_position, 0.0
    goal = env_cfg.goal_position
    for step in range(env_cfg.max_steps):
        ip = int((p - POSITION_MIN) * pos_scale)
        iv = int((v + VELOCITY_LIMIT) * vel_scale)
        ip = 0 if ip < 0 else (pos_bins - 1 if ip >= pos_bins else ip)
        iv = 0 if iv < 0 else (vel_bins - 1 if iv >= vel_bins else iv)
        p, v = _step_pv(p, v, _greedy_action(q_rows[ip][iv]) - 1)
        if p >= goal:
            return step + 1
    return env_cfg.max_steps


def train(
    cfg: TrainConfig,
    env_cfg: SimConfig = SimConfig(),
    distribution: Optional[EventTimeDistribution] = None,
) -> TrainResult:
    """Run seeded epsilon-greedy Q-learning; fully deterministic per config.

    Every episode starts from the fixed start state. The base reward is -1
    per step with no bootstrap past the goal; episodes are capped at
    ``env_cfg.max_steps``. With ``cfg.shaping == "temporal"``, each halt
    step first queries the shared envelope (skipped while it is empty) and
    adds the shaping term to that step's reward, then inserts the halt's
    (position, elapsed) point; the envelope persists across episodes. A
    greedy evaluation episode is recorded after every training episode.
    """
    rng = np.random.default_rng(cfg.seed)
    shaping_on = cfg.shaping == "temporal"
    dist = distribution if distribution is not None else EventTimeDistribution.empty()

    pos_bins, vel_bins = cfg.pos_bins, cfg.vel_bins
    pos_scale = pos_bins / (POSITION_MAX - POSITION_MIN)
    vel_scale = vel_bins / (2.0 * VELOCITY_LIMIT)
    # plain lists are considerably faster than ndarray scalar indexing here
    q_rows = [[[0.0, 0.0, 0.0] for _ in range(vel_bins)] for _ in range(pos_bins)]

    gamma, alpha, kappa = cfg.gamma, cfg.alpha, cfg.kappa
    goal, eps_halt = env_cfg.goal_position, env_cfg.halt_velocity_eps
    max_steps = env_cfg.max_steps
    decay_episodes = cfg.epsilon_decay_frac * cfg.episodes
    rng_random = rng.random
    rng_integers = rng.integers

    lengths = np.zeros(cfg.episodes, dtype=np.int64)
    base_returns = np.zeros(cfg.episodes)
    shaped_returns = np.zeros(cfg.episodes)
    eval_lengths = np.zeros(cfg.episodes, dtype=np.int64)

    for episode in range(cfg.episodes):
        if decay_episodes > 0:
            frac = min(episode / decay_episodes, 1.0)
        else:
            frac = 1.0
        epsilon = cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac

        p, v = env_cfg.start_position, 0.0
        base_return = 0.0
        shaped_return = 0.0
        length = max_steps
        for step in range(max_steps):
            ip = int((p - POSITION_MIN) * pos_scale)
            iv = int((v + VELOCITY_LIMIT) * vel_scale)
            ip = 0 if ip < 0 else (pos_bins - 1 if ip >= pos_bins else ip)
            iv = 0 if iv < 0 else (vel_bins - 1 if iv >= vel_bins else iv)
            row = q_rows[ip][iv]
            if epsilon > 0.0 and rng_random() < epsilon:
                a_idx = int(rng_integers(0, 3))
            else:
                a_idx = _greedy_action(row)
            p2, v2 = _step_pv(p, v, a_idx - 1)
            done = p2 >= goal

            reward = -1.0
            base_return += reward
            if shaping_on and _halt_condition(p2, v2, v, goal, eps_halt):
                elapsed = step + 1
                if not dist.is_empty():
                    reward += shaping_reward(elapsed, query_min_time(dist, p2), kappa)
                dist = update_distribution_online(dist, (p2, float(elapsed)))
            shaped_return += reward

            q_old = row[a_idx]
            if done:
                target = reward
            else:
                ip2 = int((p2 - POSITION_MIN) * pos_scale)
                iv2 = int((v2 + VELOCITY_LIMIT) * vel_scale)
                ip2 = 0 if ip2 < 0 else (pos_bins - 1 if ip2 >= pos_bins else ip2)
                iv2 = 0 if iv2 < 0 else (vel_bins - 1 if iv2 >= vel_bins else iv2)
                next_row = q_rows[ip2][iv2]
                best = next_row[0]
                if next_row[1] > best:
                    best = next_row[1]
                if next_row[2] > best:
                    best = next_row[2]
                target = reward + gamma * best
            row[a_idx] = q_old + alpha * (target - q_old)

            p, v = p2, v2
            if done:
                length = step + 1
                break

        lengths[episode] = length
        base_returns[episode] = base_return
        shaped_returns[episode] = shaped_return
        eval_lengths[episode] = _greedy_length(
            q_rows, pos_scale, vel_scale, pos_bins, vel_bins, env_cfg
        )

    qtable = QTable(pos_bins, vel_bins, np.asarray(q_rows, dtype=np.float64))
    return TrainResult(
        lengths=lengths,
        base_returns=base_returns,
        shaped_returns=shaped_returns,
        eval_lengths=eval_lengths,
        qtable=qtable,
        distribution=dist,
        config=cfg,
    )


def evaluate(qtable: QTable, env_cfg: SimConfig = SimConfig(), n_episodes: int = 1) -> float:
    """Mean greedy episode length from the fixed start (no exploration)."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    q_rows = qtable.values.tolist()
    pos_scale = qtable.pos_bins / (POSITION_MAX - POSITION_MIN)
    vel_scale = qtable.vel_bins / (2.0 * VELOCITY_LIMIT)
    total = 0
    for _ in range(n_episodes):
        total += _greedy_length(
            q_rows, pos_scale, vel_scale, qtable.pos_bins, qtable.vel_bins, env_cfg
        )
    return total / n_episodes


def write_curve(result: TrainResult, path) -> None:
    """Write the learning curve as ``episode,length,shaped_return,base_return``."""
    with open(path, "w", newline="\n") as fh:
        fh.write("episode,length,shaped_return,base_return\n")
        for i in range(len(result.lengths)):
            fh.write(
                f"{i},{int(result.lengths[i])},"
                f"{float(result.shaped_returns[i])!r},"
                f"{float(result.base_returns[i])!r}\n"
            )
