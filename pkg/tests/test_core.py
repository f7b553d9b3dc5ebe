"""Schema validation, online standardization, and window contracts."""

import numpy as np
import pytest

from canonform.core import (
    AttributeRecord,
    AttributeWindow,
    CanonicalDataset,
    CanonicalSample,
    CausalityViolation,
    DatasetMetadata,
    LocalityViolation,
    SchemaError,
    Transition,
    append_sample,
    check_attribute_contract,
    standardize_trajectory,
)


def make_sample(i=0, n=2, m=1, fill=0.0):
    t = Transition(np.full(n, fill), np.full(m, fill), np.full(n, fill + 1))
    return CanonicalSample(i, t, AttributeRecord())


class TestTransition:
    def test_dims_exposed(self):
        t = Transition([1.0, 2.0], [0.5], [1.1, 2.1])
        assert (t.n, t.m) == (2, 1)

    def test_state_dim_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            Transition([1.0, 2.0], [0.5], [1.1])

    def test_non_finite_rejected(self):
        with pytest.raises(SchemaError):
            Transition([np.nan, 0.0], [0.5], [0.0, 0.0])
        with pytest.raises(SchemaError):
            Transition([0.0, 0.0], [np.inf], [0.0, 0.0])

    def test_arrays_read_only(self):
        t = Transition([1.0, 2.0], [0.5], [1.1, 2.1])
        with pytest.raises(ValueError):
            t.x[0] = 9.0


class TestAttributeRecord:
    def test_empty(self):
        assert AttributeRecord().is_empty()

    def test_temporal_must_be_at_least_one(self):
        assert AttributeRecord(temporal=1).temporal == 1
        with pytest.raises(SchemaError):
            AttributeRecord(temporal=0)

    def test_spatial_must_be_nonnegative(self):
        with pytest.raises(SchemaError):
            AttributeRecord(spatial=[0.5, -0.1])

    def test_negative_index_rejected(self):
        t = Transition([0.0], [0.0], [0.0])
        with pytest.raises(SchemaError):
            CanonicalSample(-1, t, AttributeRecord())


class TestStandardize:
    def test_single_step_identity(self):
        # minimal raw input: two states, one action, no attributes attached
        samples = standardize_trajectory([[1.0, 0.0], [2.0, 0.0]], [[0.5]])
        assert len(samples) == 1
        s = samples[0]
        assert s.index == 0
        assert s.attribute.is_empty()
        np.testing.assert_array_equal(s.transition.x, [1.0, 0.0])
        np.testing.assert_array_equal(s.transition.u, [0.5])
        np.testing.assert_array_equal(s.transition.x_next, [2.0, 0.0])

    def test_requires_two_states(self):
        with pytest.raises(SchemaError):
            standardize_trajectory([[1.0]], np.empty((0, 1)))

    def test_action_count_must_match(self):
        with pytest.raises(SchemaError):
            standardize_trajectory([[1.0], [2.0], [3.0]], [[0.0]])

    def test_ragged_input_rejected(self):
        with pytest.raises(SchemaError):
            standardize_trajectory([[1.0, 2.0], [1.0]], [[0.0]])

    def test_attribute_fn_must_return_record(self):
        with pytest.raises(SchemaError):
            standardize_trajectory([[1.0], [2.0]], [[0.0]], lambda t, w: 3)

    def test_prefix_consistency_with_history_reader(self):
        # attribute looks back one step; every prefix must reproduce the full run
        def fn(t, w):
            i = w.current_index
            if i == 0:
                return AttributeRecord()
            prev = w[i - 1].transition.x[0]
            return AttributeRecord(custom={"delta": float(t.x[0] - prev)})

        rng = np.random.default_rng(5)
        states = rng.normal(size=(12, 3))
        actions = rng.normal(size=(11, 2))
        full = standardize_trajectory(states, actions, fn)
        for k in range(1, 12):
            prefix = standardize_trajectory(states[: k + 1], actions[:k], fn)
            assert len(prefix) == k
            for a, b in zip(prefix, full[:k]):
                assert a.attribute.custom == b.attribute.custom
                np.testing.assert_array_equal(a.transition.x, b.transition.x)


class TestWindow:
    def window(self, current=3, horizon=None, recorder=None):
        samples = [make_sample(i, fill=float(i)) for i in range(current)]
        provisional = make_sample(current, fill=float(current))
        return AttributeWindow(samples, current, provisional, horizon, recorder)

    def test_reads_past_and_current(self):
        w = self.window()
        assert w[1].transition.x[0] == 1.0
        assert w[3].transition.x[0] == 3.0  # provisional current sample
        assert w[3].attribute.is_empty()

    def test_future_access_raises(self):
        w = self.window()
        with pytest.raises(CausalityViolation):
            w[4]

    def test_horizon_enforced(self):
        w = self.window(horizon=1)
        assert w.earliest == 2
        w[2]
        with pytest.raises(LocalityViolation):
            w[1]

    def test_negative_index_rejected(self):
        with pytest.raises(IndexError):
            self.window()[-1]

    def test_recorder_sees_all_attempts(self):
        rec = []
        w = self.window(recorder=rec)
        w[2]
        with pytest.raises(CausalityViolation):
            w[9]
        assert rec == [(3, 2), (3, 9)]


class TestDataset:
    def metadata(self):
        return DatasetMetadata(n=2, m=1)

    def test_append_grows(self):
        ds = CanonicalDataset(self.metadata())
        append_sample(ds, make_sample())
        assert len(ds) == 1

    def test_append_rejects_dim_mismatch(self):
        ds = CanonicalDataset(self.metadata())
        with pytest.raises(SchemaError):
            ds.append(make_sample(n=3))

    def test_view_is_snapshot(self):
        ds = CanonicalDataset(self.metadata())
        ds.append(make_sample(0))
        view = ds.view()
        ds.append(make_sample(1))
        assert len(view) == 1 and len(ds) == 2
        with pytest.raises(IndexError):
            view[1]

    def test_metadata_validation(self):
        with pytest.raises(SchemaError):
            DatasetMetadata(n=0, m=1)
        with pytest.raises(SchemaError):
            DatasetMetadata(n=1, m=1, beta=0.0)


class TestContractChecker:
    def trajectories(self, k=3, T=6):
        rng = np.random.default_rng(2)
        return [(rng.normal(size=(T + 1, 2)), rng.normal(size=(T, 1))) for _ in range(k)]

    def test_constant_fn_clean_report(self):
        report = check_attribute_contract(lambda t, w: AttributeRecord(), self.trajectories())
        assert report.causal and report.local
        assert report.max_lookback == 0

    def test_future_read_flagged(self):
        def fn(t, w):
            w[w.current_index + 1]
            return AttributeRecord()

        report = check_attribute_contract(fn, self.trajectories())
        assert not report.causal

    def test_lookback_measured_against_horizon(self):
        def fn(t, w):
            i = w.current_index
            if i >= 2:
                w[i - 2]
            return AttributeRecord()

        unbounded = check_attribute_contract(fn, self.trajectories())
        assert unbounded.causal and unbounded.local
        assert unbounded.max_lookback == 2
        tight = check_attribute_contract(fn, self.trajectories(), horizon=1)
        assert not tight.local

    def test_needs_probes(self):
        with pytest.raises(ValueError):
            check_attribute_contract(lambda t, w: AttributeRecord(), [])
