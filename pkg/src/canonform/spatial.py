"""Anchor-distance attributes and pruned R-neighbor range search.

A sample's feature embedding is the concatenation (beta * x) ++ u. Its
spatial attribute is the vector of Euclidean distances to a fixed anchor
set. By the triangle inequality, any neighbor S within distance R of a
center C must satisfy ``|d(A, S) - d(A, C)| <= R`` for every anchor A, so
the conjunction of per-anchor conditions prunes non-neighbors cheaply; the
few survivors are then verified with an exact distance check. The filter is
necessary, never sufficient, so results match brute force exactly.

All distances go through one routine (:func:`pairwise_distances`) so stored
attributes, filter verification, and the brute-force oracle agree bit for
bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import CanonicalDataset, SchemaError

# Absolute slack added to every filter comparison. Stored anchor distances
# carry rounding of order 1e-13 at the scales used here; without slack a
# boundary neighbor at exactly R could fail a filter condition that holds
# in exact arithmetic (anchors collinear with the pair make the condition
# tight). Slack only admits extra candidates; verification removes them.
FILTER_TOLERANCE = 1e-9


class MissingAttributeError(ValueError):
    """A search required spatial attributes that the dataset lacks."""


def pairwise_distances(points, centers) -> np.ndarray:
    """Euclidean distance matrix; the single distance routine of the package."""
    return cdist(np.atleast_2d(points), np.atleast_2d(centers))


@dataclass(frozen=True)
class AnchorSet:
    """Fixed pivot points in feature space plus the state/action trade-off."""

    anchors: np.ndarray
    beta: float

    def __post_init__(self):
        arr = np.asarray(self.anchors, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("anchors must be a non-empty (count, dim) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError("anchors must be finite")
        if len(np.unique(arr, axis=0)) != arr.shape[0]:
            raise ValueError("anchors must be pairwise distinct")
        if not (self.beta > 0.0):
            raise ValueError(f"beta must be > 0, got {self.beta}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "anchors", arr)

    @property
    def count(self) -> int:
        return self.anchors.shape[0]

    @property
    def dim(self) -> int:
        return self.anchors.shape[1]


def make_axis_anchors(n: int, m: int, beta: float) -> AnchorSet:
    """Build the origin plus +/- unit vectors along each feature axis.

    For feature dimension d = n + m this yields exactly 2d + 1 anchors in
    the order: origin, +e1, -e1, +e2, -e2, ...

    Args:
        n: state dimension (>= 1).
        m: action dimension (>= 0; zero gives a state-only anchor set).
        beta: state/action trade-off scalar (> 0).
    """
    if n < 1 or m < 0:
        raise ValueError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    d = n + m
    anchors = np.zeros((2 * d + 1, d))
    for i in range(d):
        anchors[1 + 2 * i, i] = 1.0
        anchors[2 + 2 * i, i] = -1.0
    return AnchorSet(anchors, beta)


def feature_embed(x, u, beta: float) -> np.ndarray:
    """Embed a state/action pair as (beta * x) ++ u."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if x.ndim != 1 or u.ndim != 1:
        raise SchemaError("x and u must be 1-D vectors")
    return np.concatenate([beta * x, u])


def compute_spatial_attribute(feature, anchor_set: AnchorSet) -> np.ndarray:
    """Distances from one feature vector to every anchor (all >= 0)."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape != (anchor_set.dim,):
        raise SchemaError(
            f"feature has shape {feature.shape}, anchors expect ({anchor_set.dim},)"
        )
    return pairwise_distances(feature, anchor_set.anchors)[0]


def filter_pass(candidate_attr, center_attr, radius: float, tol: float = FILTER_TOLERANCE) -> bool:
    """Conjunction over anchors of |candidate_attr[i] - center_attr[i]| <= radius.

    A true result is necessary but not sufficient for the candidate to lie
    within ``radius`` of the center. ``tol`` widens each comparison to keep
    the condition necessary under floating-point rounding of the stored
    distances; see :data:`FILTER_TOLERANCE`.
    """
    candidate_attr = np.asarray(candidate_attr, dtype=np.float64)
    center_attr = np.asarray(center_attr, dtype=np.float64)
    if candidate_attr.shape != center_attr.shape:
        raise ValueError(
            f"attribute lengths differ: {candidate_attr.shape} vs {center_attr.shape}"
        )
    return bool(np.all(np.abs(candidate_attr - center_attr) <= radius + tol))


@dataclass(frozen=True)
class RNeighborQuery:
    """A range query: feature-space center and radius R > 0."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        if center.ndim != 1 or not np.all(np.isfinite(center)):
            raise ValueError("query center must be a finite 1-D feature vector")
        if not (self.radius > 0.0):
            raise ValueError(f"radius must be > 0, got {self.radius}")
        center = center.copy()
        center.setflags(write=False)
        object.__setattr__(self, "center", center)


@dataclass(frozen=True)
class SearchReport:
    """Outcome of one pruned search: result set, pruning stats, wall times."""

    result_indices: np.ndarray
    candidates_after_filter: int
    total: int
    reject_ratio: float
    wall_time_filtered_ns: int
    wall_time_bruteforce_ns: Optional[int] = None

    def __post_init__(self):
        # the ratio must be derived from the two counters, nothing else
        expected = (self.total - self.candidates_after_filter) / self.total
        if self.reject_ratio != expected:
            raise ValueError(
                f"reject_ratio {self.reject_ratio!r} != (total - candidates)/total "
                f"{expected!r}"
            )

    @classmethod
    def from_counts(
        cls,
        result_indices: np.ndarray,
        candidates_after_filter: int,
        total: int,
        wall_time_filtered_ns: int,
        wall_time_bruteforce_ns: Optional[int] = None,
    ) -> "SearchReport":
        return cls(
            result_indices=result_indices,
            candidates_after_filter=candidates_after_filter,
            total=total,
            reject_ratio=(total - candidates_after_filter) / total,
            wall_time_filtered_ns=wall_time_filtered_ns,
            wall_time_bruteforce_ns=wall_time_bruteforce_ns,
        )


class _FeatureTable:
    """Cached raw state/action matrices and their feature embedding."""

    def __init__(self, dataset: CanonicalDataset):
        n, m = dataset.metadata.n, dataset.metadata.m
        N = len(dataset)
        self.X = np.empty((N, n))
        self.U = np.empty((N, m))
        for i, sample in enumerate(dataset):
            self.X[i] = sample.transition.x
            self.U[i] = sample.transition.u
        self.beta = dataset.metadata.beta
        self.F = np.hstack([self.beta * self.X, self.U])

    def features_for_beta(self, beta: float) -> np.ndarray:
        if beta == self.beta:
            return self.F
        return np.hstack([beta * self.X, self.U])


def _feature_table(dataset: CanonicalDataset) -> _FeatureTable:
    cache = dataset._feature_cache
    if cache is not None and cache[0] == dataset._cache_version:
        return cache[1]
    table = _FeatureTable(dataset)
    dataset._feature_cache = (dataset._cache_version, table)
    return table


def _install_feature_cache(dataset: CanonicalDataset, X: np.ndarray, U: np.ndarray) -> None:
    """Seed the feature cache from prebuilt matrices (generator fast path).

    ``X``/``U`` must be the exact per-sample state/action rows; the feature
    matrix is derived with the same expression as the per-sample embedding,
    so cached and recomputed features agree bit for bit.
    """
    table = _FeatureTable.__new__(_FeatureTable)
    table.X = X
    table.U = U
    table.beta = dataset.metadata.beta
    table.F = np.hstack([table.beta * X, U])
    dataset._feature_cache = (dataset._cache_version, table)


class _SearchIndex:
    """Attribute matrix reordered by the first anchor distance.

    Sorting by the first attribute turns that anchor's filter condition
    into a binary-searchable interval; the remaining anchors are applied in
    fixed order over the shrinking candidate set. The candidate set is
    exactly the set passing :func:`filter_pass`, independent of this layout.
    """

    def __init__(self, dataset: CanonicalDataset):
        if dataset.anchor_set is None:
            raise MissingAttributeError("dataset has no anchor set")
        count = dataset.anchor_set.count
        N = len(dataset)
        att = np.empty((N, count))
        for i, sample in enumerate(dataset):
            spatial = sample.attribute.spatial
            if spatial is None:
                raise MissingAttributeError(f"sample {i} has no spatial attribute")
            att[i] = spatial
        table = _feature_table(dataset)
        self.att = att
        self.order = np.argsort(att[:, 0], kind="stable")
        self.att_sorted_t = np.ascontiguousarray(att[self.order].T)
        self.features_sorted = table.F[self.order]


def _search_index(dataset: CanonicalDataset) -> _SearchIndex:
    cache = dataset._index_cache
    if cache is not None and cache[0] == dataset._cache_version:
        return cache[1]
    index = _SearchIndex(dataset)
    dataset._index_cache = (dataset._cache_version, index)
    return index


def _require_nonempty(dataset: CanonicalDataset):
    if len(dataset) == 0:
        raise ValueError("dataset is empty")


def r_neighbor_bruteforce(dataset: CanonicalDataset, query: RNeighborQuery) -> np.ndarray:
    """All dataset indices within ``query.radius`` of the center, by full scan.

    This is the oracle realization of the R-neighbor set: every feature
    distance is computed and compared against the radius (boundary points
    at exactly R are included).
    """
    _require_nonempty(dataset)
    table = _feature_table(dataset)
    distances = pairwise_distances(table.F, query.center)[:, 0]
    return np.flatnonzero(distances <= query.radius)


def r_neighbor_filtered(
    dataset: CanonicalDataset,
    query: RNeighborQuery,
    time_bruteforce: bool = False,
) -> SearchReport:
    """Pruned R-neighbor search; result set identical to the oracle.

    Every sample must carry a spatial attribute for the dataset's anchor
    set. Filter survivors are verified with an exact distance check before
    being reported.

    Args:
        dataset: dataset with precomputed spatial attributes.
        query: center (already feature-embedded) and radius.
        time_bruteforce: when True, also run and time the brute-force scan
            and record its wall time in the report.

    Raises:
        MissingAttributeError: a sample lacks its spatial attribute.
    """
    _require_nonempty(dataset)
    index = _search_index(dataset)
    center = query.center
    radius = query.radius
    att_t = index.att_sorted_t
    n_anchors = att_t.shape[0]
    total = att_t.shape[1]

    t0 = time.perf_counter_ns()
    center_attr = pairwise_distances(center, dataset.anchor_set.anchors)[0]
    bound = radius + FILTER_TOLERANCE
    lo = np.searchsorted(att_t[0], center_attr[0] - bound, side="left")
    hi = np.searchsorted(att_t[0], center_attr[0] + bound, side="right")
    if n_anchors > 1:
        alive = np.flatnonzero(np.abs(att_t[1][lo:hi] - center_attr[1]) <= bound)
    else:
        alive = np.arange(hi - lo)
    for a in range(2, n_anchors):
        if alive.size == 0:
            break
        alive = alive[np.abs(att_t[a][lo + alive] - center_attr[a]) <= bound]
    if alive.size:
        positions = lo + alive
        distances = pairwise_distances(index.features_sorted[positions], center)[:, 0]
        result = np.sort(index.order[positions[distances <= radius]])
    else:
        result = np.empty(0, dtype=np.int64)
    elapsed = time.perf_counter_ns() - t0

    brute_ns = None
    if time_bruteforce:
        t0 = time.perf_counter_ns()
        r_neighbor_bruteforce(dataset, query)
        brute_ns = time.perf_counter_ns() - t0
    return SearchReport.from_counts(
        result_indices=result,
        candidates_after_filter=int(alive.size),
        total=total,
        wall_time_filtered_ns=elapsed,
        wall_time_bruteforce_ns=brute_ns,
    )


def point_to_dataset_distance(
    dataset: CanonicalDataset,
    x_c,
    u_c,
    radius: float,
    beta: Optional[float] = None,
) -> float:
    """Mean feature distance from a center to its R-neighbor set.

    The center (x_c, u_c) is embedded with ``beta`` (dataset default) and
    compared against every sample. When the neighbor set is empty the
    distance to the single nearest sample is returned instead, so the value
    stays finite and keeps penalizing centers far from the data.
    """
    _require_nonempty(dataset)
    if beta is None:
        beta = dataset.metadata.beta
    center = feature_embed(x_c, u_c, beta)
    features = _feature_table(dataset).features_for_beta(beta)
    distances = pairwise_distances(features, center)[:, 0]
    neighbors = distances[distances <= radius]
    if neighbors.size:
        return float(neighbors.mean())
    return float(distances.min())


def dataset_constraint_loss(
    dataset: CanonicalDataset,
    x_c,
    u_proposed,
    radius: float,
    beta: Optional[float] = None,
) -> float:
    """Point-to-dataset distance of a proposed action at a given state.

    Penalizes actions that would move the queried (state, action) pair away
    from the data support; no gradient is produced.
    """
    return point_to_dataset_distance(dataset, x_c, u_proposed, radius, beta)


def add_spatial_attributes(dataset: CanonicalDataset, anchor_set: AnchorSet) -> CanonicalDataset:
    """Return a new dataset whose samples carry anchor-distance attributes.

    Existing temporal/custom attributes are preserved; spatial attributes
    are (re)computed for every sample against ``anchor_set``.
    """
    from .core import AttributeRecord, CanonicalSample, DatasetMetadata

    md = dataset.metadata
    if anchor_set.dim != md.n + md.m:
        raise SchemaError(
            f"anchor dimension {anchor_set.dim} != feature dimension {md.n + md.m}"
        )
    table = _feature_table(dataset)
    features = table.features_for_beta(anchor_set.beta)
    att = pairwise_distances(features, anchor_set.anchors)
    # the dataset's beta follows the anchor set so features and attributes agree
    out_md = DatasetMetadata(md.n, md.m, anchor_set.beta, md.seed)
    out = CanonicalDataset(out_md, anchor_set)
    for i, sample in enumerate(dataset):
        attribute = AttributeRecord(
            temporal=sample.attribute.temporal,
            spatial=att[i],
            custom=sample.attribute.custom,
        )
        out.append(CanonicalSample(sample.index, sample.transition, attribute))
    return out
