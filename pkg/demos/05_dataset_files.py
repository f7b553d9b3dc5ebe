"""Tour of the on-disk formats: raw trajectory and canonical dataset JSONL.

Writes a short random trajectory, standardizes it into a canonical dataset
with spatial attributes, and round-trips both files. Serialization is
deterministic, so rewriting a read-back dataset reproduces the bytes.
"""

import tempfile
from pathlib import Path

import numpy as np

from canonform import (
    CanonicalDataset,
    DatasetMetadata,
    make_axis_anchors,
    read_dataset,
    read_raw_trajectory,
    standardize_trajectory,
    write_dataset,
    write_raw_trajectory,
)
from canonform.spatial import add_spatial_attributes

N, M, BETA = 3, 2, 0.2
rng = np.random.default_rng(11)
states = np.cumsum(rng.normal(size=(41, N)), axis=0)
actions = rng.uniform(-1.0, 1.0, size=(40, M))

workdir = Path(tempfile.mkdtemp(prefix="canonform_demo_"))
raw_path = workdir / "trajectory.jsonl"
dataset_path = workdir / "dataset.jsonl"

write_raw_trajectory(states, actions, raw_path)
lines = raw_path.read_text().splitlines()
print(f"Raw trajectory ({len(lines)} lines, one per step + final state):")
for line in lines[:3]:
    print(f"  {line}")
print("  ...")

states_back, actions_back = read_raw_trajectory(raw_path)
assert np.array_equal(states, states_back)
assert np.array_equal(actions, actions_back)
print("Raw round trip is exact.")

anchors = make_axis_anchors(N, M, BETA)
dataset = CanonicalDataset(DatasetMetadata(n=N, m=M, beta=BETA), anchors)
dataset.extend(standardize_trajectory(states, actions))
dataset = add_spatial_attributes(dataset, anchors)
write_dataset(dataset, dataset_path)

jsonl = dataset_path.read_text().splitlines()
print(f"\nCanonical dataset JSONL ({len(jsonl)} lines, header + samples):")
print(f"  {jsonl[0][:100]} ...")
print(f"  {jsonl[1][:100]} ...")

reread = read_dataset(dataset_path)
print(f"Read back {len(reread)} samples, "
      f"{reread.anchor_set.count} anchors, beta={reread.metadata.beta}")

rewrite_path = workdir / "dataset_rewrite.jsonl"
write_dataset(reread, rewrite_path)
assert rewrite_path.read_bytes() == dataset_path.read_bytes()
print("Rewrite of the read-back dataset is byte-identical.")
print(f"\nFiles left in {workdir} for inspection.")
