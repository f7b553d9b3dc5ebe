"""File formats: JSON-lines datasets and raw trajectory files.

A dataset file is one header line::

    {"n":..,"m":..,"beta":..,"anchors":[[..],..]|null,"seed":..}

followed by one line per sample::

    {"i":..,"x":[..],"u":[..],"xn":[..],"attr":{"temporal":..,"spatial":..}}

All floats are written with round-trip-exact precision (shortest repr), so
load followed by re-serialize is byte-identical. A sample's ``attr`` object
gains an extra ``"custom"`` key only when custom attributes are present.

A raw trajectory file is one ``{"x":[..],"u":[..]}`` line per step plus a
final ``{"x":[..]}`` line carrying the terminal state.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .core import (
    AttributeRecord,
    CanonicalDataset,
    CanonicalSample,
    DatasetMetadata,
    SchemaError,
    Transition,
)
from .spatial import AnchorSet


class DatasetFormatError(ValueError):
    """A dataset or trajectory file failed to parse; carries the line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _sample_line(sample: CanonicalSample) -> str:
    attr = sample.attribute
    attr_obj = {
        "temporal": attr.temporal,
        "spatial": attr.spatial.tolist() if attr.spatial is not None else None,
    }
    if attr.custom:
        attr_obj["custom"] = dict(attr.custom)
    return _dumps(
        {
            "i": sample.index,
            "x": sample.transition.x.tolist(),
            "u": sample.transition.u.tolist(),
            "xn": sample.transition.x_next.tolist(),
            "attr": attr_obj,
        }
    )


def write_dataset(dataset: CanonicalDataset, path) -> None:
    """Write a dataset as header + JSON-lines samples."""
    md = dataset.metadata
    header = {
        "n": md.n,
        "m": md.m,
        "beta": md.beta,
        "anchors": dataset.anchor_set.anchors.tolist() if dataset.anchor_set else None,
        "seed": md.seed,
    }
    with open(path, "w", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for sample in dataset:
            fh.write(_sample_line(sample) + "\n")


def read_dataset(path) -> CanonicalDataset:
    """Load a dataset file, validating schema line by line.

    Raises:
        DatasetFormatError: malformed JSON, missing fields, or schema
            violations; the exception records the offending line number.
    """
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(1, "empty file; expected a header line")
    try:
        header = json.loads(lines[0])
        n, m, beta, seed = header["n"], header["m"], header["beta"], header["seed"]
        anchors = header["anchors"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetFormatError(1, f"bad header: {exc}") from None
    try:
        metadata = DatasetMetadata(n=n, m=m, beta=beta, seed=seed)
        anchor_set = None
        if anchors is not None:
            anchor_set = AnchorSet(np.asarray(anchors, dtype=np.float64), beta)
        dataset = CanonicalDataset(metadata, anchor_set)
    except (SchemaError, ValueError) as exc:
        raise DatasetFormatError(1, str(exc)) from None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            attr_obj = obj["attr"]
            attribute = AttributeRecord(
                temporal=attr_obj["temporal"],
                spatial=attr_obj["spatial"],
                custom=attr_obj.get("custom"),
            )
            sample = CanonicalSample(
                index=obj["i"],
                transition=Transition(obj["x"], obj["u"], obj["xn"]),
                attribute=attribute,
            )
            dataset.append(sample)
        except (json.JSONDecodeError, KeyError, TypeError, SchemaError) as exc:
            raise DatasetFormatError(lineno, str(exc)) from None
    return dataset


def write_raw_trajectory(states, actions, path) -> None:
    """Write a raw trajectory: per-step state/action lines + final state."""
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    with open(path, "w", newline="\n") as fh:
        for i in range(actions.shape[0]):
            fh.write(_dumps({"x": states[i].tolist(), "u": actions[i].tolist()}) + "\n")
        fh.write(_dumps({"x": states[-1].tolist()}) + "\n")


def read_raw_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a raw trajectory file into (states, actions) arrays.

    Raises:
        DatasetFormatError: on malformed lines, inconsistent dimensions, or
            a missing final state line.
    """
    states: list = []
    actions: list = []
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    saw_final = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            x = obj["x"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetFormatError(lineno, f"bad trajectory line: {exc}") from None
        if saw_final:
            raise DatasetFormatError(lineno, "data after the final state line")
        states.append(x)
        if "u" in obj:
            actions.append(obj["u"])
        else:
            saw_final = True
    if not saw_final:
        raise DatasetFormatError(max(len(lines), 1), "missing final state line (no 'u' key)")
    if len(states) < 2:
        raise DatasetFormatError(max(len(lines), 1), "a trajectory needs at least 2 states")
    try:
        return (
            np.asarray(states, dtype=np.float64),
            np.asarray(actions, dtype=np.float64).reshape(len(actions), -1),
        )
    except ValueError as exc:
        raise DatasetFormatError(len(lines), f"inconsistent dimensions: {exc}") from None
