import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from screenmatch import (
    ConfigError,
    ConstraintSpec,
    DistributionSpec,
    InputError,
    Instance,
    Item,
    derive_seed,
    dummy_items,
    is_dummy_id,
    read_constraint_spec,
    read_distribution_spec,
    read_instance,
    sample_instance,
    validate_instance,
    validate_items,
    write_constraint_spec,
    write_distribution_spec,
    write_instance,
)
from screenmatch.core import DUMMY_ID_BASE, format_value


class TestConstraintSpec:
    def test_derived_counts(self):
        spec = ConstraintSpec((1, 2, 3))
        assert spec.d == 3
        assert spec.k == 6

    def test_rejects_empty(self):
        with pytest.raises(ConfigError):
            ConstraintSpec(())

    @pytest.mark.parametrize("caps", [(0,), (-1, 2), (1.5,)])
    def test_rejects_bad_caps(self, caps):
        with pytest.raises(ConfigError):
            ConstraintSpec(caps)


class TestDistributionSpec:
    def test_single_property_requires_d1(self):
        DistributionSpec("single-property-uniform", 1)
        with pytest.raises(ConfigError):
            DistributionSpec("single-property-uniform", 2)

    def test_overlap_needs_membership(self):
        DistributionSpec("overlap-bernoulli", 2, membership=(0.5, 0.7))
        with pytest.raises(ConfigError):
            DistributionSpec("overlap-bernoulli", 2)
        with pytest.raises(ConfigError):
            DistributionSpec("overlap-bernoulli", 2, membership=(0.5,))
        with pytest.raises(ConfigError):
            DistributionSpec("overlap-bernoulli", 2, membership=(0.0, 0.0))
        with pytest.raises(ConfigError):
            DistributionSpec("overlap-bernoulli", 2, membership=(0.5, 1.2))

    def test_membership_rejected_elsewhere(self):
        with pytest.raises(ConfigError):
            DistributionSpec("disjoint-properties-uniform", 2, membership=(0.5, 0.5))

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            DistributionSpec("zipf", 1)


class TestDeriveSeed:
    def test_stable(self):
        assert derive_seed(1, "stream", 0) == derive_seed(1, "stream", 0)

    def test_distinct_across_labels_and_indices(self):
        seeds = {
            derive_seed(1, "stream", 0),
            derive_seed(1, "stream", 1),
            derive_seed(1, "train", 0),
            derive_seed(2, "stream", 0),
        }
        assert len(seeds) == 4

    def test_fits_in_63_bits(self):
        for t in range(50):
            assert 0 <= derive_seed(999, "x", t) < 2**63


class TestSampling:
    def test_empty(self):
        inst = sample_instance(DistributionSpec("single-property-uniform", 1), 0, 1)
        assert inst.n == 0

    def test_deterministic(self):
        dist = DistributionSpec("overlap-bernoulli", 3, membership=(0.6, 0.3, 0.9))
        a = sample_instance(dist, 40, 5)
        b = sample_instance(dist, 40, 5)
        assert a == b

    def test_ids_are_positions(self):
        inst = sample_instance(DistributionSpec("disjoint-properties-uniform", 2), 30, 7)
        assert [item.id for item in inst] == list(range(30))
        assert validate_instance(inst, ConstraintSpec((1, 1))) == ()

    def test_single_property_shape(self):
        inst = sample_instance(DistributionSpec("single-property-uniform", 1), 100, 3)
        for item in inst:
            assert set(item.props) == {0}
            assert 0.0 <= item.props[0] <= 1.0

    def test_disjoint_class_frequencies(self):
        # each class frequency within 5 binomial sd of 1/d
        d, n = 4, 100_000
        inst = sample_instance(DistributionSpec("disjoint-properties-uniform", d), n, 9)
        counts = [0] * d
        for item in inst:
            (p,) = item.props
            counts[p] += 1
        sd = math.sqrt(n * (1 / d) * (1 - 1 / d))
        for c in counts:
            assert abs(c - n / d) <= 5 * sd
        assert abs(counts[0] / n - 0.25) <= 0.01

    def test_overlap_always_nonempty(self):
        dist = DistributionSpec("overlap-bernoulli", 3, membership=(0.1, 0.05, 0.1))
        inst = sample_instance(dist, 300, 11)
        for item in inst:
            assert len(item.props) >= 1
            for v in item.props.values():
                assert 0.0 <= v <= 1.0

    def test_negative_n(self):
        with pytest.raises(ConfigError):
            sample_instance(DistributionSpec("single-property-uniform", 1), -1, 0)


class TestDummies:
    @pytest.mark.parametrize(
        "caps,count", [((1, 2), 3), ((2,), 2), ((1,), 1)]
    )
    def test_count_and_shape(self, caps, count):
        spec = ConstraintSpec(caps)
        ds = dummy_items(spec)
        assert len(ds) == count
        for item in ds:
            assert is_dummy_id(item.id)
            assert item.props == {p: 0.0 for p in range(spec.d)}

    def test_pass_relaxed_validation(self):
        spec = ConstraintSpec((2, 1))
        assert validate_items(dummy_items(spec), spec) == ()


class TestValidation:
    SPEC = ConstraintSpec((1, 1))

    def test_valid_instance_empty_report(self):
        inst = Instance((Item(0, {0: 0.5}), Item(1, {1: 0.25})))
        assert validate_instance(inst, self.SPEC) == ()

    def test_value_out_of_range(self):
        report = validate_items([Item(0, {0: 1.5})], self.SPEC)
        assert [v.kind for v in report] == ["value-out-of-range"]

    def test_nan_value(self):
        report = validate_items([Item(0, {0: float("nan")})], self.SPEC)
        assert [v.kind for v in report] == ["value-out-of-range"]

    def test_unknown_property(self):
        report = validate_items([Item(0, {2: 0.5})], self.SPEC)
        assert [v.kind for v in report] == ["unknown-property"]

    def test_duplicate_ids(self):
        report = validate_items([Item(0, {0: 0.1}), Item(0, {1: 0.2})], self.SPEC)
        assert "duplicate-id" in {v.kind for v in report}

    def test_empty_props(self):
        report = validate_items([Item(0, {})], self.SPEC)
        assert "empty-props" in {v.kind for v in report}

    def test_instance_rejects_dummy_and_misplaced_ids(self):
        inst = Instance((Item(5, {0: 0.3}), Item(DUMMY_ID_BASE, {0: 0.0, 1: 0.0})))
        kinds = {v.kind for v in validate_instance(inst, self.SPEC)}
        assert "id-position-mismatch" in kinds
        assert "dummy-id" in kinds


unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestSerialization:
    @given(st.lists(unit, min_size=0, max_size=20))
    def test_instance_round_trip_bit_exact(self, values):
        inst = Instance(tuple(Item(i, {0: v}) for i, v in enumerate(values)))
        buf = io.StringIO()
        write_instance(inst, buf)
        assert read_instance(io.StringIO(buf.getvalue())) == inst

    @given(unit)
    def test_format_value_round_trips(self, v):
        assert float(format_value(v)) == v

    def test_line_shape(self):
        buf = io.StringIO()
        write_instance(Instance((Item(0, {1: 0.5, 0: 0.25}),)), buf)
        obj = json.loads(buf.getvalue())
        assert obj == {"id": 0, "props": [[0, 0.25], [1, 0.5]]}

    def test_read_reports_line_number(self):
        with pytest.raises(InputError, match=":2:"):
            read_instance(io.StringIO('{"id": 0, "props": [[0, 0.5]]}\nnot json\n'))

    def test_read_enforces_positional_ids(self):
        with pytest.raises(InputError):
            read_instance(io.StringIO('{"id": 3, "props": [[0, 0.5]]}\n'))

    def test_read_names_source(self):
        with pytest.raises(InputError, match="stream.jsonl"):
            read_instance(io.StringIO("[]\n"), source="stream.jsonl")

    def test_constraint_spec_round_trip(self):
        spec = ConstraintSpec((2, 1, 4))
        buf = io.StringIO()
        write_constraint_spec(spec, buf)
        assert read_constraint_spec(io.StringIO(buf.getvalue())) == spec

    def test_constraint_spec_bad_file(self):
        with pytest.raises(InputError):
            read_constraint_spec(io.StringIO('{"caps": [0]}'))

    @pytest.mark.parametrize(
        "dist",
        [
            DistributionSpec("single-property-uniform", 1),
            DistributionSpec("disjoint-properties-uniform", 3),
            DistributionSpec("overlap-bernoulli", 2, membership=(0.25, 1.0)),
        ],
    )
    def test_distribution_round_trip(self, dist):
        buf = io.StringIO()
        write_distribution_spec(dist, buf)
        assert read_distribution_spec(io.StringIO(buf.getvalue())) == dist

    def test_distribution_bad_kind_becomes_input_error(self):
        with pytest.raises(InputError):
            read_distribution_spec(io.StringIO('{"kind": "zipf", "d": 1}'))
