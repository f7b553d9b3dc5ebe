"""Event specifications, temporal attributes, and event-time envelopes.

A temporal attribute counts the steps between a source event and a sink
event along one trajectory, always measured from the most recent source
occurrence, so it records the minimum source-to-sink time the trajectory
exhibits at that sink. Collected (coordinate, time) pairs are summarized by
their lower convex hull: a piecewise-linear envelope mapping an event
coordinate to the minimum observed time, queryable for reward shaping.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    AttributeFn,
    AttributeRecord,
    AttributeWindow,
    CanonicalSample,
    Transition,
    standardize_trajectory,
)


@dataclass(frozen=True)
class EventSpec:
    """A named event: a state predicate plus the coordinate it reports."""

    id: str
    predicate: Callable[[np.ndarray], bool]
    coordinate_fn: Callable[[np.ndarray], float]


@dataclass(frozen=True)
class EventOccurrence:
    event_id: str
    step: int
    coordinate: float

    def __post_init__(self):
        if self.step < 0:
            raise ValueError(f"event step must be >= 0, got {self.step}")


def _cross(o, a, b) -> float:
    """Cross product of (o -> a) x (o -> b); > 0 when b turns left."""
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _lower_hull(points: np.ndarray) -> np.ndarray:
    """Vertices of the lower convex hull, sorted by coordinate.

    Duplicate coordinates are reduced to their smallest time first; points
    lying exactly on a hull edge are not vertices.
    """
    order = np.lexsort((points[:, 1], points[:, 0]))
    pts = points[order]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = pts[1:, 0] != pts[:-1, 0]
    pts = pts[keep]
    hull: list = []
    for c, t in pts:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], (c, t)) <= 0.0:
            hull.pop()
        hull.append((c, t))
    return np.asarray(hull, dtype=np.float64).reshape(len(hull), 2)


@dataclass(frozen=True)
class EventTimeDistribution:
    """Piecewise-linear lower envelope of (coordinate, time) observations.

    Breakpoints are hull vertices with strictly increasing coordinates and
    strictly increasing segment slopes; for every fitted point the envelope
    value at its coordinate is <= its time.
    """

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=np.float64).reshape(-1, 2)
        if bp.size and not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite")
        if len(bp) >= 2 and not np.all(np.diff(bp[:, 0]) > 0.0):
            raise ValueError("breakpoint coordinates must be strictly increasing")
        for i in range(len(bp) - 2):
            if _cross(bp[i], bp[i + 1], bp[i + 2]) <= 0.0:
                raise ValueError("breakpoints must form a strictly convex lower chain")
        bp = bp.copy()
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def empty(cls) -> "EventTimeDistribution":
        return cls(np.empty((0, 2)))

    def is_empty(self) -> bool:
        return len(self.breakpoints) == 0

    @property
    def domain(self) -> Optional[tuple[float, float]]:
        if self.is_empty():
            return None
        return (float(self.breakpoints[0, 0]), float(self.breakpoints[-1, 0]))


def _check_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("need at least one (coordinate, time) point")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if np.any(pts[:, 1] < 1.0):
        raise ValueError("event times must be >= 1 step")
    return pts


def fit_event_time_distribution(points) -> EventTimeDistribution:
    """Fit the lower convex hull of (coordinate, time) points.

    Args:
        points: array-like of shape (k, 2) with k >= 1 and times >= 1.

    Returns:
        The envelope whose breakpoints are exactly the lower-hull vertices,
        ordered by coordinate; the interpolant passes through each vertex.
    """
    return EventTimeDistribution(_lower_hull(_check_points(points)))


def query_min_time(dist: EventTimeDistribution, coordinate: float) -> float:
    """Envelope value at a coordinate; clamped to the nearest endpoint outside.

    Raises:
        ValueError: if the distribution has no breakpoints yet.
    """
    if dist.is_empty():
        raise ValueError("cannot query an empty distribution")
    bp = dist.breakpoints
    return float(np.interp(coordinate, bp[:, 0], bp[:, 1]))


def update_distribution_online(
    dist: EventTimeDistribution, new_point
) -> EventTimeDistribution:
    """Fold one new (coordinate, time) point into the envelope.

    Equivalent to refitting on every point seen so far: points at or above
    the current envelope can never become hull vertices later, so refitting
    the stored vertices plus the new point reproduces the batch fit. The
    envelope value at any coordinate never increases.
    """
    point = _check_points([new_point])
    if dist.is_empty():
        return EventTimeDistribution(_lower_hull(point))
    combined = np.vstack([dist.breakpoints, point])
    return EventTimeDistribution(_lower_hull(combined))


def shaping_reward(policy_elapsed: int, reference: float, kappa: float) -> float:
    """Scaled advantage of the envelope reference over the policy's time.

    Positive exactly when the policy was faster than the reference. ``kappa``
    may be zero, which disables shaping while keeping the code path intact.
    """
    if policy_elapsed < 1:
        raise ValueError(f"policy_elapsed must be >= 1, got {policy_elapsed}")
    if kappa < 0.0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    return kappa * (reference - policy_elapsed)


SinkFiresFn = Callable[[Transition, AttributeWindow], bool]


def make_temporal_attribute_fn(
    source: EventSpec,
    sink: EventSpec,
    sink_fires: Optional[SinkFiresFn] = None,
) -> AttributeFn:
    """Build an attribute function attaching source-to-sink elapsed steps.

    At each step whose state fires the sink, the window is scanned backward
    for the most recent earlier step whose state fired the source; the
    attribute is the index difference (>= 1). Steps without a firing sink,
    or with no prior source, carry no temporal attribute.

    Args:
        source: event whose most recent occurrence starts the clock.
        sink: event that stops the clock. Its predicate sees only the
            current state; pass ``sink_fires`` for events that need history
            (detection windows wider than one state).
        sink_fires: optional (transition, window) -> bool override for the
            sink test.
    """

    def attribute_fn(transition: Transition, window: AttributeWindow) -> AttributeRecord:
        if sink_fires is not None:
            fired = sink_fires(transition, window)
        else:
            fired = bool(sink.predicate(transition.x))
        if not fired:
            return AttributeRecord()
        current = window.current_index
        for j in range(current - 1, window.earliest - 1, -1):
            if source.predicate(window[j].transition.x):
                return AttributeRecord(temporal=current - j)
        return AttributeRecord()

    return attribute_fn


def record_temporal_attributes(
    states,
    actions,
    source: EventSpec,
    sink: EventSpec,
    sink_fires: Optional[SinkFiresFn] = None,
    horizon: Optional[int] = None,
) -> list[Optional[int]]:
    """Standardize a trajectory and return its per-step temporal attributes.

    Returns a list with one entry per transition: the elapsed steps from the
    most recent source to the sink when the sink fires, otherwise None.
    """
    fn = make_temporal_attribute_fn(source, sink, sink_fires)
    samples = standardize_trajectory(states, actions, fn, horizon=horizon)
    return [s.attribute.temporal for s in samples]


def extract_event_points(
    samples: Sequence[CanonicalSample], coordinate_fn: Callable[[np.ndarray], float]
) -> np.ndarray:
    """Collect (coordinate, temporal) pairs from attributed samples.

    The coordinate is evaluated on the sample's current state; samples
    without a temporal attribute are skipped. Returns an (k, 2) array.
    """
    points = [
        (float(coordinate_fn(s.transition.x)), float(s.attribute.temporal))
        for s in samples
        if s.attribute.temporal is not None
    ]
    return np.asarray(points, dtype=np.float64).reshape(len(points), 2)


def export_breakpoints(dist: EventTimeDistribution, path) -> None:
    """Write envelope breakpoints as a ``coordinate,time`` CSV."""
    with open(path, "w", newline="\n") as fh:
        fh.write("coordinate,time\n")
        for c, t in dist.breakpoints:
            fh.write(f"{float(c)!r},{float(t)!r}\n")


def read_event_samples_csv(path) -> np.ndarray:
    """Read a ``coordinate,time`` CSV into an (k, 2) array (k may be 0)."""
    rows: list = []
    with open(path, "r", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "coordinate",
            "time",
        ]:
            raise ValueError(
                f"expected header 'coordinate,time', got {reader.fieldnames!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["coordinate"]), float(row["time"])))
            except (TypeError, ValueError):
                raise ValueError(f"line {lineno}: malformed row") from None
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), 2)


def read_breakpoints(path) -> EventTimeDistribution:
    """Load an exported breakpoint CSV back into a distribution."""
    return EventTimeDistribution(read_event_samples_csv(path))
