"""Canonical transition samples with online attributes.

The package standardizes raw trajectories into samples of the form
(transition, attribute), where attributes are computed online under
causality and locality contracts. On top of that schema it provides:

* anchor-distance spatial attributes with exact, pruned R-neighbor search;
* temporal attributes (source-to-sink elapsed steps) summarized by a
  piecewise-linear lower envelope over event coordinates;
* a MountainCar simulator and tabular Q-learning controller wiring the
  envelope into reward shaping;
* JSON-lines dataset files, CSV experiment outputs, and a CLI.
"""

__version__ = "0.1.0"

from .core import (
    AttributeRecord,
    AttributeWindow,
    CanonicalDataset,
    CanonicalSample,
    CausalityViolation,
    ContractReport,
    DatasetMetadata,
    DatasetView,
    LocalityViolation,
    SchemaError,
    Transition,
    WindowViolation,
    append_sample,
    check_attribute_contract,
    standardize_trajectory,
)
from .spatial import (
    AnchorSet,
    FILTER_TOLERANCE,
    MissingAttributeError,
    RNeighborQuery,
    SearchReport,
    add_spatial_attributes,
    compute_spatial_attribute,
    dataset_constraint_loss,
    feature_embed,
    filter_pass,
    make_axis_anchors,
    pairwise_distances,
    point_to_dataset_distance,
    r_neighbor_bruteforce,
    r_neighbor_filtered,
)
from .temporal import (
    EventOccurrence,
    EventSpec,
    EventTimeDistribution,
    export_breakpoints,
    extract_event_points,
    fit_event_time_distribution,
    make_temporal_attribute_fn,
    query_min_time,
    read_breakpoints,
    record_temporal_attributes,
    shaping_reward,
    update_distribution_online,
)
from .envs import (
    MountainCarState,
    SimConfig,
    bang_bang_policy,
    detect_halt,
    generate_clustered_dataset,
    make_halt_attribute_fn,
    make_halt_event,
    make_halt_sink_fires,
    make_start_event,
    mountaincar_step,
    rollout,
)
from .qlearn import QTable, TrainConfig, TrainResult, evaluate, train, write_curve
from .serialize import (
    DatasetFormatError,
    read_dataset,
    read_raw_trajectory,
    write_dataset,
    write_raw_trajectory,
)
