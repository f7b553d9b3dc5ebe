"""Canonical sample schema and online trajectory standardization.

A canonical sample couples one observed transition (x, u, x') with an
attribute record computed online. Attribute computation runs under two
contracts enforced by an instrumented history window:

* causality: the attribute of sample i may depend only on samples 0..i;
* locality: lookback is limited to a declared horizon (unbounded within
  the current trajectory by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .spatial import AnchorSet


class SchemaError(ValueError):
    """Raised when a sample violates the dataset schema (dims, finiteness)."""


class WindowViolation(RuntimeError):
    """Base class for illegal history-window accesses."""

    def __init__(self, current: int, requested: int, message: str):
        super().__init__(message)
        self.current = current
        self.requested = requested


class CausalityViolation(WindowViolation):
    """An attribute function tried to read at or beyond a future index."""


class LocalityViolation(WindowViolation):
    """An attribute function tried to read beyond its declared horizon."""


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise SchemaError(f"{name} must be a non-empty 1-D real vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Transition:
    """One observed step of plant dynamics: state, action, next state."""

    x: np.ndarray
    u: np.ndarray
    x_next: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "u", _as_vector(self.u, "u"))
        object.__setattr__(self, "x_next", _as_vector(self.x_next, "x_next"))
        if self.x.shape != self.x_next.shape:
            raise SchemaError(
                f"state dims differ: x has {self.x.size}, x_next has {self.x_next.size}"
            )

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class AttributeRecord:
    """Per-sample attributes: elapsed event steps, anchor distances, extras.

    ``temporal`` counts discrete steps between a source and a sink event and
    is therefore at least 1 when present. ``spatial`` holds one non-negative
    Euclidean distance per anchor. ``custom`` carries named scalars for
    ad-hoc attributes.
    """

    temporal: Optional[int] = None
    spatial: Optional[np.ndarray] = None
    custom: Optional[dict] = None

    def __post_init__(self):
        if self.temporal is not None:
            t = int(self.temporal)
            if t < 1:
                raise SchemaError(f"temporal attribute must be >= 1, got {t}")
            object.__setattr__(self, "temporal", t)
        if self.spatial is not None:
            arr = np.asarray(self.spatial, dtype=np.float64)
            if arr.ndim != 1:
                raise SchemaError("spatial attribute must be a 1-D vector")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
                raise SchemaError("spatial attribute entries must be finite and >= 0")
            arr.setflags(write=False)
            object.__setattr__(self, "spatial", arr)

    def is_empty(self) -> bool:
        return self.temporal is None and self.spatial is None and not self.custom


@dataclass(frozen=True)
class CanonicalSample:
    """A transition plus its attribute record at a trajectory-local index."""

    index: int
    transition: Transition
    attribute: AttributeRecord

    def __post_init__(self):
        if int(self.index) < 0:
            raise SchemaError(f"sample index must be >= 0, got {self.index}")
        object.__setattr__(self, "index", int(self.index))


@dataclass(frozen=True)
class DatasetMetadata:
    n: int
    m: int
    beta: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise SchemaError("state and action dims must be >= 1")
        if not (self.beta > 0.0):
            raise SchemaError(f"beta must be > 0, got {self.beta}")


class DatasetView:
    """Immutable snapshot of a dataset prefix, safe for concurrent reads.

    The view pins the dataset length at creation time; samples appended
    afterwards are invisible to it.
    """

    def __init__(self, samples: list, length: int):
        self._samples = samples
        self._length = length

    def __len__(self) -> int:
        return self._length

    def __getitem__(self, i: int) -> CanonicalSample:
        if not 0 <= i < self._length:
            raise IndexError(f"index {i} out of range for view of length {self._length}")
        return self._samples[i]

    def __iter__(self) -> Iterator[CanonicalSample]:
        for i in range(self._length):
            yield self._samples[i]


class CanonicalDataset:
    """Append-only collection of canonical samples with shared metadata."""

    def __init__(self, metadata: DatasetMetadata, anchor_set: "AnchorSet | None" = None):
        if anchor_set is not None and anchor_set.dim != metadata.n + metadata.m:
            raise SchemaError(
                f"anchor dimension {anchor_set.dim} != feature dimension "
                f"{metadata.n + metadata.m}"
            )
        self.metadata = metadata
        self.anchor_set = anchor_set
        self._samples: list[CanonicalSample] = []
        # caches invalidated on append; built lazily by the spatial module
        self._cache_version = 0
        self._feature_cache = None
        self._index_cache = None

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, i: int) -> CanonicalSample:
        return self._samples[i]

    def __iter__(self) -> Iterator[CanonicalSample]:
        return iter(self._samples)

    def view(self) -> DatasetView:
        return DatasetView(self._samples, len(self._samples))

    def append(self, sample: CanonicalSample) -> "CanonicalDataset":
        """Append one sample after validating it against the metadata."""
        md = self.metadata
        if sample.transition.n != md.n or sample.transition.m != md.m:
            raise SchemaError(
                f"sample dims ({sample.transition.n}, {sample.transition.m}) do not "
                f"match dataset dims ({md.n}, {md.m})"
            )
        if self.anchor_set is not None and sample.attribute.spatial is not None:
            if sample.attribute.spatial.size != self.anchor_set.count:
                raise SchemaError(
                    f"spatial attribute length {sample.attribute.spatial.size} != "
                    f"anchor count {self.anchor_set.count}"
                )
        self._samples.append(sample)
        self._cache_version += 1
        return self

    def extend(self, samples: Sequence[CanonicalSample]) -> "CanonicalDataset":
        for s in samples:
            self.append(s)
        return self


def append_sample(dataset: CanonicalDataset, sample: CanonicalSample) -> CanonicalDataset:
    """Functional alias for :meth:`CanonicalDataset.append`."""
    return dataset.append(sample)


class AttributeWindow:
    """Read-only, instrumented view of the trajectory history.

    Exposes trajectory-local indices in ``[earliest, current]`` where
    ``earliest = max(0, current - horizon)``. Reading ``current`` returns a
    provisional sample whose attribute is still empty. Any access outside
    the window raises :class:`CausalityViolation` (future) or
    :class:`LocalityViolation` (beyond horizon); every attempted access is
    appended to the recorder as ``(current, requested)``.
    """

    def __init__(
        self,
        samples: list,
        current: int,
        provisional: CanonicalSample,
        horizon: Optional[int] = None,
        recorder: Optional[list] = None,
    ):
        self._samples = samples
        self._current = current
        self._provisional = provisional
        self._horizon = horizon
        self._recorder = recorder

    @property
    def current_index(self) -> int:
        return self._current

    @property
    def horizon(self) -> Optional[int]:
        return self._horizon

    @property
    def earliest(self) -> int:
        if self._horizon is None:
            return 0
        return max(0, self._current - self._horizon)

    def __len__(self) -> int:
        return self._current - self.earliest + 1

    def __getitem__(self, i: int) -> CanonicalSample:
        if self._recorder is not None:
            self._recorder.append((self._current, i))
        if i < 0:
            raise IndexError("window indices are trajectory-local and must be >= 0")
        if i > self._current:
            raise CausalityViolation(
                self._current, i,
                f"attribute at step {self._current} tried to read future step {i}",
            )
        if i < self.earliest:
            raise LocalityViolation(
                self._current, i,
                f"attribute at step {self._current} tried to read step {i}, beyond "
                f"horizon {self._horizon}",
            )
        if i == self._current:
            return self._provisional
        return self._samples[i]


AttributeFn = Callable[[Transition, AttributeWindow], AttributeRecord]


def empty_attribute_fn(transition: Transition, window: AttributeWindow) -> AttributeRecord:
    """Attribute function that attaches nothing."""
    return AttributeRecord()


def _check_raw(states, actions):
    try:
        states = np.asarray(states, dtype=np.float64)
        actions = np.asarray(actions, dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"raw trajectory is not rectangular numeric data: {exc}") from None
    if states.ndim != 2 or actions.ndim != 2:
        raise SchemaError("states must be (T+1, n), actions must be (T, m)")
    if states.shape[0] < 2:
        raise SchemaError("a trajectory needs at least 2 states")
    if actions.shape[0] != states.shape[0] - 1:
        raise SchemaError(
            f"got {states.shape[0]} states and {actions.shape[0]} actions; "
            f"expected one action per transition"
        )
    if not np.all(np.isfinite(states)) or not np.all(np.isfinite(actions)):
        raise SchemaError("raw trajectory contains non-finite entries")
    return states, actions


def standardize_trajectory(
    states,
    actions,
    attribute_fn: AttributeFn = empty_attribute_fn,
    horizon: Optional[int] = None,
    recorder: Optional[list] = None,
) -> list[CanonicalSample]:
    """Convert a raw trajectory into canonical samples, strictly left to right.

    Args:
        states: array-like of shape (T+1, n); row i is the state before step i.
        actions: array-like of shape (T, m).
        attribute_fn: pure function of (transition, window) -> AttributeRecord.
            It is invoked once per step with a window exposing only steps
            0..i, so the output is identical to online processing.
        horizon: locality horizon w; None means unbounded within the trajectory.
        recorder: optional list collecting every (current, requested) window read.

    Returns:
        One CanonicalSample per transition, in step order.

    Raises:
        SchemaError: on dimension mismatches or non-finite inputs.
        CausalityViolation / LocalityViolation: if the attribute function
            reads outside its window.
    """
    states, actions = _check_raw(states, actions)
    samples: list[CanonicalSample] = []
    for i in range(actions.shape[0]):
        transition = Transition(states[i], actions[i], states[i + 1])
        provisional = CanonicalSample(i, transition, AttributeRecord())
        window = AttributeWindow(samples, i, provisional, horizon, recorder)
        attribute = attribute_fn(transition, window)
        if not isinstance(attribute, AttributeRecord):
            raise SchemaError(
                f"attribute_fn must return an AttributeRecord, got {type(attribute)!r}"
            )
        samples.append(CanonicalSample(i, transition, attribute))
    return samples


@dataclass(frozen=True)
class ContractReport:
    """Result of probing an attribute function's access pattern."""

    causal: bool
    local: bool
    max_lookback: int
    n_reads: int = 0


def check_attribute_contract(
    attribute_fn: AttributeFn,
    probe_trajectories: Sequence[tuple],
    horizon: Optional[int] = None,
) -> ContractReport:
    """Run the attribute function over probe trajectories and audit its reads.

    Violating reads are recorded, the offending step falls back to an empty
    attribute, and processing continues, so a single bad access cannot hide
    later ones.

    Args:
        attribute_fn: function under audit.
        probe_trajectories: non-empty sequence of (states, actions) pairs.
        horizon: declared locality horizon (None = unbounded in-trajectory).

    Returns:
        ContractReport with causal/local flags and the largest observed
        lookback (current - requested over past reads).
    """
    if len(probe_trajectories) == 0:
        raise ValueError("need at least one probe trajectory")
    causal = True
    local = True
    max_lookback = 0
    n_reads = 0
    for states, actions in probe_trajectories:
        states, actions = _check_raw(states, actions)
        samples: list[CanonicalSample] = []
        for i in range(actions.shape[0]):
            transition = Transition(states[i], actions[i], states[i + 1])
            provisional = CanonicalSample(i, transition, AttributeRecord())
            recorder: list = []
            window = AttributeWindow(samples, i, provisional, horizon, recorder)
            try:
                attribute = attribute_fn(transition, window)
            except CausalityViolation:
                causal = False
                attribute = AttributeRecord()
            except LocalityViolation:
                local = False
                attribute = AttributeRecord()
            n_reads += len(recorder)
            for current, requested in recorder:
                if requested > current:
                    causal = False
                else:
                    max_lookback = max(max_lookback, current - requested)
            samples.append(CanonicalSample(i, transition, attribute))
    if horizon is not None and max_lookback > horizon:
        local = False
    return ContractReport(causal=causal, local=local, max_lookback=max_lookback, n_reads=n_reads)
