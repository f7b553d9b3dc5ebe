"""Prune an R-neighbor search with precomputed anchor distances.

Every sample stores its distances to a fixed anchor set. By the triangle
inequality a true neighbor must look like a neighbor from every anchor's
point of view, so most samples are rejected without computing a single
fresh distance. Survivors are verified exactly, making the result identical
to a brute-force scan.
"""

import numpy as np

from canonform import (
    RNeighborQuery,
    feature_embed,
    generate_clustered_dataset,
    point_to_dataset_distance,
    r_neighbor_bruteforce,
    r_neighbor_filtered,
)

dataset = generate_clustered_dataset(
    50_000, n=5, m=2, clusters=80, spread=0.25, seed=1, beta=0.2, center_range=8.0
)
print(f"Dataset: {len(dataset)} samples, {dataset.anchor_set.count} anchors")

sample = dataset[123]
center = feature_embed(sample.transition.x, sample.transition.u, 0.2)
query = RNeighborQuery(center, radius=0.5)

report = r_neighbor_filtered(dataset, query)
oracle = r_neighbor_bruteforce(dataset, query)
assert np.array_equal(report.result_indices, oracle)

print(f"Query around sample 123, R={query.radius}")
print(f"  candidates after filtering: {report.candidates_after_filter} / {report.total}")
print(f"  reject ratio: {report.reject_ratio:.4f}")
print(f"  neighbors found: {report.result_indices.size} (matches brute force)")
print(f"  filtered wall time: {report.wall_time_filtered_ns / 1e6:.2f} ms")

timed = r_neighbor_filtered(dataset, query, time_bruteforce=True)
print(f"  brute-force wall time: {timed.wall_time_bruteforce_ns / 1e6:.2f} ms")

d = point_to_dataset_distance(
    dataset, sample.transition.x, sample.transition.u, radius=0.5
)
print(f"Mean distance to the neighbor set (data-support check): {d:.4f}")
