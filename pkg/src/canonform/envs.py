"""Desk-scale plants and synthetic data: MountainCar and clustered features.

The MountainCar simulator drives the temporal-attribute experiments: the
underpowered car starts in the valley, halts whenever it runs out of
momentum below the goal, and each halt is an event whose elapsed time feeds
the event-time envelope. The clustered generator produces feature-space
datasets with precomputed anchor-distance attributes for range-search
benchmarks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    AttributeFn,
    AttributeRecord,
    CanonicalDataset,
    CanonicalSample,
    DatasetMetadata,
    Transition,
)
from .spatial import make_axis_anchors, pairwise_distances, _install_feature_cache
from .temporal import EventSpec, make_temporal_attribute_fn

POSITION_MIN = -1.2
POSITION_MAX = 0.6
VELOCITY_LIMIT = 0.07
FORCE = 0.001
GRAVITY = 0.0025
ACTIONS = (-1, 0, 1)


@dataclass(frozen=True)
class MountainCarState:
    position: float
    velocity: float

    def as_array(self) -> np.ndarray:
        return np.array([self.position, self.velocity])


@dataclass(frozen=True)
class SimConfig:
    """Start/goal geometry, episode cap, and halt sensitivity."""

    start_position: float = -0.5
    goal_position: float = 0.5
    max_steps: int = 1000
    halt_velocity_eps: float = 1e-3
    seed: Optional[int] = None

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")

    def start_state(self) -> MountainCarState:
        return MountainCarState(self.start_position, 0.0)


def _step_pv(p: float, v: float, a: int) -> tuple[float, float]:
    # scalar fast path shared by the public step and the training loops
    v2 = v + FORCE * a - GRAVITY * math.cos(3.0 * p)
    if v2 > VELOCITY_LIMIT:
        v2 = VELOCITY_LIMIT
    elif v2 < -VELOCITY_LIMIT:
        v2 = -VELOCITY_LIMIT
    p2 = p + v2
    if p2 > POSITION_MAX:
        p2 = POSITION_MAX
    elif p2 < POSITION_MIN:
        p2 = POSITION_MIN
    if p2 == POSITION_MIN and v2 < 0.0:
        v2 = 0.0
    return p2, v2


def mountaincar_step(state: MountainCarState, action: int) -> MountainCarState:
    """Advance the car one step under an action in {-1, 0, +1}.

    The velocity update is v' = clip(v + 0.001*a - 0.0025*cos(3p)) and the
    position update is p' = clip(p + v'); hitting the left wall stops the
    car inelastically (velocity resets to 0).
    """
    if action not in ACTIONS:
        raise ValueError(f"action must be one of {ACTIONS}, got {action!r}")
    p, v = _step_pv(state.position, state.velocity, action)
    return MountainCarState(p, v)


def _pv(state) -> tuple[float, float]:
    if isinstance(state, MountainCarState):
        return state.position, state.velocity
    arr = np.asarray(state, dtype=np.float64)
    return float(arr[0]), float(arr[1])


def _halt_condition(p: float, v: float, v_prev: float, goal: float, eps: float) -> bool:
    # single source of truth for the halt rule; also used by training loops
    if p >= goal or abs(v) > eps:
        return False
    return v_prev * v < 0.0 or (v == 0.0 and v_prev != 0.0)


def detect_halt(state, prev_state, step: int, cfg: SimConfig) -> bool:
    """True when the car just ran out of momentum below the goal.

    A halt is a turning point: the velocity magnitude is within
    ``cfg.halt_velocity_eps`` AND the velocity changed sign since the
    previous step (reaching exactly zero from nonzero counts). The sign
    change keeps slow crawls from firing on consecutive steps. Never fires
    at step 0 or at positions past the goal.
    """
    if step < 1:
        return False
    p, v = _pv(state)
    _, v_prev = _pv(prev_state)
    return _halt_condition(p, v, v_prev, cfg.goal_position, cfg.halt_velocity_eps)


PolicyFn = Callable[[float, float], int]


def bang_bang_policy(position: float, velocity: float) -> int:
    """Push in the direction of motion; pumps energy until the goal."""
    return 1 if velocity >= 0.0 else -1


def rollout(
    cfg: SimConfig,
    policy: Optional[PolicyFn] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Run one episode; returns (states, actions) as (T+1, 2) and (T, 1).

    The episode starts at (start_position, 0), ends on reaching the goal
    position or after ``cfg.max_steps`` steps. With no policy, actions are
    drawn uniformly from {-1, 0, +1} using ``rng`` (or the config seed).
    """
    if policy is None:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        policy = lambda p, v: int(rng.integers(0, 3)) - 1  # noqa: E731
    p, v = cfg.start_position, 0.0
    states = [(p, v)]
    actions = []
    for _ in range(cfg.max_steps):
        a = policy(p, v)
        if a not in ACTIONS:
            raise ValueError(f"policy returned invalid action {a!r}")
        p, v = _step_pv(p, v, a)
        actions.append((float(a),))
        states.append((p, v))
        if p >= cfg.goal_position:
            break
    return np.asarray(states, dtype=np.float64), np.asarray(actions, dtype=np.float64)


def make_start_event(cfg: SimConfig) -> EventSpec:
    """Source event: the car at rest at the start position."""
    return EventSpec(
        id="start",
        predicate=lambda x: x[0] == cfg.start_position and x[1] == 0.0,
        coordinate_fn=lambda x: float(x[0]),
    )


def make_halt_event(cfg: SimConfig) -> EventSpec:
    """Sink event: near-zero velocity below the goal.

    The bare predicate sees a single state and cannot check the turning
    point; pair it with :func:`make_halt_sink_fires` for the full rule.
    """
    return EventSpec(
        id="halt",
        predicate=lambda x: abs(x[1]) <= cfg.halt_velocity_eps
        and x[0] < cfg.goal_position,
        coordinate_fn=lambda x: float(x[0]),
    )


def make_halt_sink_fires(cfg: SimConfig):
    """Window-aware sink test applying :func:`detect_halt` to the current step."""

    def fires(transition: Transition, window) -> bool:
        i = window.current_index
        if i < 1:
            return False
        prev = window[i - 1].transition.x
        return detect_halt(transition.x, prev, i, cfg)

    return fires


def make_halt_attribute_fn(cfg: SimConfig) -> AttributeFn:
    """Temporal attribute: steps from the start event to each halt."""
    return make_temporal_attribute_fn(
        make_start_event(cfg), make_halt_event(cfg), sink_fires=make_halt_sink_fires(cfg)
    )


def generate_clustered_dataset(
    n_samples: int,
    n: int = 11,
    m: int = 3,
    clusters: int = 300,
    spread: float = 0.3,
    seed: int = 0,
    beta: float = 0.2,
    center_range: float = 15.0,
    action_range: float = 1.0,
    action_noise: float = 0.05,
    with_anchors: bool = True,
) -> CanonicalDataset:
    """Build a seeded Gaussian-mixture dataset with anchor attributes.

    Cluster centers are uniform in [-center_range, center_range]^n for
    states and [-action_range, action_range]^m for actions; each sample
    adds Gaussian noise (``spread`` for states, ``action_noise`` for
    actions) around its cluster center, with the next state drawn as an
    independent perturbation of the same center. With ``with_anchors`` the
    axis anchor set for (n, m, beta) is attached and every sample carries
    its precomputed spatial attribute.

    Identical arguments produce bit-identical datasets.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    cx = rng.uniform(-center_range, center_range, size=(clusters, n))
    cu = rng.uniform(-action_range, action_range, size=(clusters, m))
    labels = rng.integers(0, clusters, size=n_samples)
    X = cx[labels] + rng.normal(scale=spread, size=(n_samples, n))
    U = cu[labels] + rng.normal(scale=action_noise, size=(n_samples, m))
    Xn = cx[labels] + rng.normal(scale=spread, size=(n_samples, n))
    for arr in (X, U, Xn):
        arr.setflags(write=False)

    metadata = DatasetMetadata(n=n, m=m, beta=beta, seed=seed)
    anchor_set = make_axis_anchors(n, m, beta) if with_anchors else None
    dataset = CanonicalDataset(metadata, anchor_set)
    att = None
    if with_anchors:
        features = np.hstack([beta * X, U])
        att = pairwise_distances(features, anchor_set.anchors)
        att.setflags(write=False)
    for i in range(n_samples):
        attribute = AttributeRecord(spatial=att[i]) if att is not None else AttributeRecord()
        dataset.append(CanonicalSample(i, Transition(X[i], U[i], Xn[i]), attribute))
    _install_feature_cache(dataset, X, U)
    return dataset
