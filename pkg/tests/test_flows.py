import pytest

from flowtriage.flows import (
    CLASS_ORDER,
    ClassLabel,
    Dataset,
    FeatureVector,
    LabeledFlow,
    PortClass,
    Provenance,
    validate_flow,
)

from conftest import make_flow


class TestValidateFlow:
    def test_in_range_record_is_ok(self):
        assert validate_flow(make_flow()).ok

    def test_port_out_of_range(self):
        result = validate_flow(make_flow(src_port=70000))
        assert not result.ok
        assert [v.field for v in result.violations] == ["src_port"]

    def test_ttl_ordering_violation(self):
        result = validate_flow(make_flow(ip_min_ttl=64, ip_max_ttl=32))
        assert not result.ok
        assert any(v.field == "ip_min_ttl" for v in result.violations)

    def test_multiple_violations_all_enumerated(self):
        record = make_flow(dst_port=-1, tcp_rate=1.5, pkt_asym=-3.0, duration=-1.0)
        fields = {v.field for v in validate_flow(record).violations}
        assert fields == {"dst_port", "tcp_rate", "pkt_asym", "duration"}

    def test_bad_destination_address(self):
        result = validate_flow(make_flow(ip_destination="not-an-ip"))
        assert [v.field for v in result.violations] == ["ip_destination"]

    def test_negative_bitfield(self):
        result = validate_flow(make_flow(tcp_aggr_anomaly=-5))
        assert [v.field for v in result.violations] == ["tcp_aggr_anomaly"]


class TestClassLabel:
    def test_index_round_trip_is_bijective(self):
        seen = set()
        for label in ClassLabel:
            idx = label.index
            assert ClassLabel.from_index(idx) is label
            seen.add(idx)
        assert seen == {0, 1, 2}

    def test_name_round_trip_is_bijective(self):
        for label in ClassLabel:
            assert ClassLabel.from_name(label.value) is label

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError):
            ClassLabel.from_name("exfiltration")

    def test_fixed_order(self):
        assert CLASS_ORDER == (
            ClassLabel.NORMAL_TRAFFIC,
            ClassLabel.SERVICE_INCIDENT,
            ClassLabel.DOS_ATTACK,
        )


class TestPortClass:
    @pytest.mark.parametrize("port,expected", [
        (0, PortClass.WELL_KNOWN),
        (1023, PortClass.WELL_KNOWN),
        (1024, PortClass.REGISTERED),
        (49151, PortClass.REGISTERED),
        (49152, PortClass.DYNAMIC),
        (65535, PortClass.DYNAMIC),
    ])
    def test_iana_boundaries(self, port, expected):
        assert PortClass.from_port(port) is expected


class TestValueTypes:
    def test_labeled_flow_rejects_non_positive_weight(self):
        with pytest.raises(ValueError):
            LabeledFlow(make_flow(), ClassLabel.NORMAL_TRAFFIC, weight=0.0)
        with pytest.raises(ValueError):
            LabeledFlow(make_flow(), ClassLabel.NORMAL_TRAFFIC, weight=-1.0)

    def test_feature_vector_enforces_width(self):
        with pytest.raises(ValueError):
            FeatureVector((0.5,) * 21, flow_index=1)

    def test_feature_vector_enforces_unit_interval(self):
        values = [0.5] * 22
        values[7] = 1.5
        with pytest.raises(ValueError):
            FeatureVector(tuple(values), flow_index=1)

    def test_dataset_lengths_must_agree(self):
        fv = FeatureVector((0.5,) * 22, flow_index=1)
        with pytest.raises(ValueError):
            Dataset((fv,), (ClassLabel.NORMAL_TRAFFIC,), (1.0, 1.0))

    def test_dataset_concat_sums_lengths(self):
        fv = FeatureVector((0.5,) * 22, flow_index=1)
        a = Dataset((fv,), (ClassLabel.NORMAL_TRAFFIC,), (1.0,))
        b = Dataset((fv, fv), (ClassLabel.DOS_ATTACK,) * 2, (1.0, 2.0))
        merged = Dataset.concat([a, b], Provenance.MERGED)
        assert len(merged) == 3
        assert merged.weights == (1.0, 1.0, 2.0)
        assert merged.provenance is Provenance.MERGED
