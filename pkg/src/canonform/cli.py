"""Command-line entry point: reproducible, manifest-driven experiment runs.

Subcommands::

    canonize          raw trajectory file -> canonical dataset file
    bench-spatial     range-search benchmark (per-query CSV + summary)
    fit-ettd          (coordinate, time) samples CSV -> envelope breakpoints CSV
    train-mountaincar tabular training run -> learning-curve CSV
    query             one R-neighbor query against a dataset file

Exit codes: 0 success, 2 usage or parse failure, 3 attribute-contract
violation, 4 missing spatial attributes. Every file-writing run drops a
``<output>.manifest.json`` beside its outputs capturing the subcommand,
config, seed, and paths (never timestamps), so reruns are byte-identical.
Timing numbers are excluded from manifests; the benchmark CSV carries them
in dedicated columns.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .core import CausalityViolation, LocalityViolation, DatasetMetadata, CanonicalDataset
from .envs import SimConfig, generate_clustered_dataset, make_halt_attribute_fn
from .qlearn import TrainConfig, train, write_curve
from .serialize import (
    DatasetFormatError,
    read_dataset,
    read_raw_trajectory,
    write_dataset,
)
from .spatial import (
    MissingAttributeError,
    RNeighborQuery,
    add_spatial_attributes,
    make_axis_anchors,
    r_neighbor_bruteforce,
    r_neighbor_filtered,
)
from .temporal import (
    export_breakpoints,
    fit_event_time_distribution,
    read_event_samples_csv,
)
from .core import standardize_trajectory, AttributeRecord

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONTRACT = 3
EXIT_MISSING_ATTRS = 4

SEED_ENV_VAR = "CANONFORM_SEED"


def _default_seed() -> Optional[int]:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return None


def _future_peek_attribute_fn(transition, window):
    """Diagnostic attribute that reads one step ahead; always violates causality."""
    window[window.current_index + 1]
    return AttributeRecord()


def write_manifest(subcommand: str, args: argparse.Namespace, inputs, outputs) -> None:
    """Write ``<first output>.manifest.json`` describing the run."""
    if not outputs:
        return
    config = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "subcommand")
    }
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": config.get("seed"),
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    path = f"{outputs[0]}.manifest.json"
    with open(path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def cmd_canonize(args) -> int:
    try:
        states, actions = read_raw_trajectory(args.input)
    except DatasetFormatError as exc:
        print(f"canonize: {args.input}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    n, m = states.shape[1], actions.shape[1]

    if args.temporal == "mountaincar-halt":
        if n != 2:
            print(
                f"canonize: temporal events need 2-dim states, got {n}", file=sys.stderr
            )
            return EXIT_USAGE
        sim = SimConfig(
            start_position=args.start_position,
            goal_position=args.goal_position,
            halt_velocity_eps=args.halt_eps,
        )
        attribute_fn = make_halt_attribute_fn(sim)
    elif args.temporal == "future-peek":
        attribute_fn = _future_peek_attribute_fn
    else:
        attribute_fn = lambda t, w: AttributeRecord()  # noqa: E731

    try:
        samples = standardize_trajectory(states, actions, attribute_fn, horizon=args.horizon)
    except (CausalityViolation, LocalityViolation) as exc:
        print(f"canonize: attribute contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT

    metadata = DatasetMetadata(n=n, m=m, beta=args.beta, seed=args.seed)
    dataset = CanonicalDataset(metadata)
    dataset.extend(samples)
    if args.spatial:
        dataset = add_spatial_attributes(dataset, make_axis_anchors(n, m, args.beta))
    write_dataset(dataset, args.output)
    write_manifest("canonize", args, [args.input], [args.output])
    print(f"canonize: wrote {len(dataset)} samples to {args.output}")
    return EXIT_OK


def _load_or_generate(args) -> CanonicalDataset:
    if args.dataset is not None:
        return read_dataset(args.dataset)
    return generate_clustered_dataset(
        n_samples=args.samples,
        n=args.state_dim,
        m=args.action_dim,
        clusters=args.clusters,
        spread=args.spread,
        seed=args.seed if args.seed is not None else 0,
        beta=args.beta,
        center_range=args.center_range,
    )


def cmd_bench_spatial(args) -> int:
    try:
        dataset = _load_or_generate(args)
    except DatasetFormatError as exc:
        print(f"bench-spatial: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    from .spatial import _feature_table  # features of the query samples

    features = _feature_table(dataset).F
    picks = rng.choice(len(dataset), size=args.queries, replace=args.queries > len(dataset))

    audit_fraction = args.audit_fraction
    if audit_fraction is None:
        audit_fraction = 1.0 if args.queries <= 1000 else 1000 / args.queries
    audit_every = max(1, int(round(1.0 / audit_fraction))) if audit_fraction > 0 else 0

    rows = []
    reject_ratios = []
    filtered_ns_total = 0
    brute_ns_total = 0
    mismatches = 0
    for qid, sample_idx in enumerate(picks):
        query = RNeighborQuery(center=features[sample_idx], radius=args.radius)
        audited = audit_every > 0 and qid % audit_every == 0
        try:
            report = r_neighbor_filtered(dataset, query, time_bruteforce=audited)
        except MissingAttributeError as exc:
            print(f"bench-spatial: {exc}", file=sys.stderr)
            return EXIT_MISSING_ATTRS
        if audited:
            oracle = r_neighbor_bruteforce(dataset, query)
            if not np.array_equal(report.result_indices, oracle):
                mismatches += 1
            brute_ns_total += report.wall_time_bruteforce_ns
        filtered_ns_total += report.wall_time_filtered_ns
        reject_ratios.append(report.reject_ratio)
        brute_cell = "" if report.wall_time_bruteforce_ns is None else str(
            report.wall_time_bruteforce_ns
        )
        rows.append(
            f"{qid},{report.total},{report.candidates_after_filter},"
            f"{report.reject_ratio!r},{report.wall_time_filtered_ns},{brute_cell},"
            f"{report.result_indices.size}"
        )

    with open(args.output, "w", newline="\n") as fh:
        fh.write(
            "query_id,total,candidates,reject_ratio,time_filtered_ns,"
            "time_bruteforce_ns,result_size\n"
        )
        for row in rows:
            fh.write(row + "\n")
    write_manifest("bench-spatial", args, [args.dataset] if args.dataset else [], [args.output])

    median_reject = float(np.median(reject_ratios))
    summary = f"queries={args.queries} median_reject_ratio={median_reject:.6f}"
    if brute_ns_total and filtered_ns_total:
        summary += f" speedup={brute_ns_total / filtered_ns_total:.2f}x"
    summary += f" audit_mismatches={mismatches}"
    print(summary)
    if mismatches:
        print("bench-spatial: filtered results diverged from the oracle", file=sys.stderr)
        return 1
    return EXIT_OK


def cmd_fit_ettd(args) -> int:
    try:
        points = read_event_samples_csv(args.input)
    except (ValueError, OSError) as exc:
        print(f"fit-ettd: {args.input}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if len(points) == 0:
        print(f"fit-ettd: {args.input}: no data rows", file=sys.stderr)
        return EXIT_USAGE
    try:
        dist = fit_event_time_distribution(points)
    except ValueError as exc:
        print(f"fit-ettd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    export_breakpoints(dist, args.output)
    write_manifest("fit-ettd", args, [args.input], [args.output])
    print(f"fit-ettd: {len(points)} points -> {len(dist.breakpoints)} breakpoints")
    return EXIT_OK


def cmd_train_mountaincar(args) -> int:
    cfg = TrainConfig(
        episodes=args.episodes,
        shaping="temporal" if args.shaping == "on" else "off",
        kappa=args.kappa,
        seed=args.seed if args.seed is not None else 0,
    )
    result = train(cfg, SimConfig(max_steps=args.max_steps))
    write_curve(result, args.output)
    write_manifest("train-mountaincar", args, [], [args.output])
    final = int(result.eval_lengths[-1]) if len(result.eval_lengths) else None
    print(f"train-mountaincar: {args.episodes} episodes, final greedy length {final}")
    return EXIT_OK


def cmd_query(args) -> int:
    try:
        dataset = read_dataset(args.dataset)
    except DatasetFormatError as exc:
        print(f"query: {args.dataset}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.center is not None:
        try:
            center = np.array([float(v) for v in args.center.split(",")])
        except ValueError:
            print(f"query: malformed center {args.center!r}", file=sys.stderr)
            return EXIT_USAGE
        d = dataset.metadata.n + dataset.metadata.m
        if center.size != d:
            print(
                f"query: center has {center.size} entries, dataset features have {d}",
                file=sys.stderr,
            )
            return EXIT_USAGE
    elif args.center_sample is not None:
        if not 0 <= args.center_sample < len(dataset):
            print(f"query: sample index {args.center_sample} out of range", file=sys.stderr)
            return EXIT_USAGE
        from .spatial import _feature_table

        center = _feature_table(dataset).F[args.center_sample]
    else:
        print("query: provide --center or --center-sample", file=sys.stderr)
        return EXIT_USAGE

    try:
        report = r_neighbor_filtered(dataset, RNeighborQuery(center, args.radius))
    except MissingAttributeError as exc:
        print(f"query: {exc}", file=sys.stderr)
        return EXIT_MISSING_ATTRS
    print("indices:", " ".join(str(i) for i in report.result_indices))
    print(
        f"total={report.total} candidates={report.candidates_after_filter} "
        f"reject_ratio={report.reject_ratio!r} result_size={report.result_indices.size}"
    )
    # wall time varies run to run; keep stdout deterministic
    print(f"time_filtered_ns={report.wall_time_filtered_ns}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canonform",
        description="Canonical transition datasets: attributes, pruned range "
        "search, event-time envelopes, and shaped tabular training.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("canonize", help="standardize a raw trajectory file")
    p.add_argument("input", help="raw trajectory JSON-lines file")
    p.add_argument("output", help="canonical dataset file to write")
    p.add_argument(
        "--temporal",
        choices=["mountaincar-halt", "future-peek"],
        default=None,
        help="attach temporal attributes (future-peek is a diagnostic that "
        "must fail the causality check)",
    )
    p.add_argument("--spatial", action="store_true", help="attach axis-anchor distances")
    p.add_argument("--beta", type=float, default=1.0, help="state/action trade-off")
    p.add_argument("--horizon", type=int, default=None, help="locality horizon (steps)")
    p.add_argument("--start-position", type=float, default=-0.5)
    p.add_argument("--goal-position", type=float, default=0.5)
    p.add_argument("--halt-eps", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(func=cmd_canonize)

    p = sub.add_parser("bench-spatial", help="benchmark pruned vs brute-force search")
    p.add_argument("--dataset", default=None, help="dataset file (default: generate)")
    p.add_argument("--output", required=True, help="per-query CSV to write")
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--audit-fraction", type=float, default=None,
                   help="fraction of queries checked against the oracle "
                   "(default 1.0 when queries <= 1000)")
    p.add_argument("--samples", type=int, default=401_598)
    p.add_argument("--state-dim", type=int, default=11)
    p.add_argument("--action-dim", type=int, default=3)
    p.add_argument("--clusters", type=int, default=300)
    p.add_argument("--spread", type=float, default=0.3)
    p.add_argument("--beta", type=float, default=0.2)
    p.add_argument("--center-range", type=float, default=15.0)
    p.set_defaults(func=cmd_bench_spatial)

    p = sub.add_parser("fit-ettd", help="fit an event-time envelope from samples")
    p.add_argument("input", help="CSV with header 'coordinate,time'")
    p.add_argument("output", help="breakpoints CSV to write")
    p.set_defaults(func=cmd_fit_ettd)

    p = sub.add_parser("train-mountaincar", help="tabular training with/without shaping")
    p.add_argument("--shaping", choices=["on", "off"], required=True)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--max-steps", type=int, default=1000)
    p.add_argument("--output", required=True, help="learning-curve CSV to write")
    p.set_defaults(func=cmd_train_mountaincar)

    p = sub.add_parser("query", help="run one R-neighbor query against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--center", default=None, help="comma-separated feature vector")
    p.add_argument("--center-sample", type=int, default=None,
                   help="use this sample's feature as the center")
    p.add_argument("--radius", type=float, default=0.5)
    p.set_defaults(func=cmd_query)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"{args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
