import numpy as np
import pytest

from flowtriage.etl import filter_relevant
from flowtriage.flows import ClassLabel, validate_flow
from flowtriage.simulate import (
    ScenarioSpec,
    generate_corpus,
    generate_labeled_flows,
    generate_scenario,
)


class TestGenerateScenario:
    def test_deterministic_per_seed(self):
        spec = ScenarioSpec(ClassLabel.DOS_ATTACK, 100, seed=7)
        assert generate_scenario(spec) == generate_scenario(spec)

    def test_different_seeds_differ(self):
        a = generate_scenario(ScenarioSpec(ClassLabel.DOS_ATTACK, 50, seed=1))
        b = generate_scenario(ScenarioSpec(ClassLabel.DOS_ATTACK, 50, seed=2))
        assert a != b

    def test_normal_batch_ack_asymmetry_near_zero(self):
        flows = generate_scenario(ScenarioSpec(ClassLabel.NORMAL_TRAFFIC, 400, seed=3))
        mean = float(np.mean([lf.flow.tcp_ack_cnt_asym for lf in flows]))
        assert -0.15 <= mean <= 0.15

    @pytest.mark.parametrize("kind", list(ClassLabel))
    def test_every_record_passes_validation(self, kind):
        flows = generate_scenario(ScenarioSpec(kind, 300, seed=11))
        for lf in flows:
            result = validate_flow(lf.flow)
            assert result.ok, result.violations

    @pytest.mark.parametrize("kind", list(ClassLabel))
    def test_no_record_is_filtered_out(self, kind):
        flows = generate_scenario(ScenarioSpec(kind, 200, seed=12))
        assert len(filter_relevant([lf.flow for lf in flows])) == len(flows)

    def test_labels_match_request(self):
        flows = generate_scenario(ScenarioSpec(ClassLabel.SERVICE_INCIDENT, 30, seed=4))
        assert all(lf.label is ClassLabel.SERVICE_INCIDENT for lf in flows)

    def test_dos_signature_extremes(self):
        flows = generate_scenario(ScenarioSpec(ClassLabel.DOS_ATTACK, 300, seed=5))
        asym = np.abs([lf.flow.tcp_ack_cnt_asym for lf in flows])
        assert float(np.mean(asym)) > 0.7
        per_ps = np.array([lf.flow.per_ps for lf in flows])
        assert float(np.median(per_ps)) > 1e5

    def test_incident_signature_low_rate(self):
        flows = generate_scenario(ScenarioSpec(ClassLabel.SERVICE_INCIDENT, 300, seed=6))
        per_ps = np.array([lf.flow.per_ps for lf in flows])
        assert float(np.median(per_ps)) < 10.0
        faults = np.array([lf.flow.tcp_ack_fcnt_rate for lf in flows])
        assert float(np.mean(faults)) > 0.3

    def test_overrides_shift_distribution(self):
        spec = ScenarioSpec(
            ClassLabel.NORMAL_TRAFFIC, 200, seed=8,
            overrides={"ack_asym": (0.8, 0.05)},
        )
        flows = generate_scenario(spec)
        assert float(np.mean([lf.flow.tcp_ack_cnt_asym for lf in flows])) > 0.6

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            ScenarioSpec(ClassLabel.NORMAL_TRAFFIC, 0, seed=0)


class TestGenerateCorpus:
    def test_size_bounded_by_request(self):
        corpus = generate_corpus(100, seed=9)
        assert len(corpus) <= 300

    def test_class_proportions_near_balanced(self):
        corpus = generate_corpus(100, seed=10)
        for label in ClassLabel:
            share = sum(1 for l in corpus.labels if l is label) / len(corpus)
            assert abs(share - 1 / 3) < 0.1 / 3 + 0.034  # within +-10% of balance

    def test_seed_determinism_bitwise(self):
        from flowtriage.etl import serialize_dataset
        assert serialize_dataset(generate_corpus(30, seed=13)) == \
            serialize_dataset(generate_corpus(30, seed=13))

    def test_flow_indices_unique(self):
        flows = generate_labeled_flows(50, seed=14)
        indices = [lf.flow.flow_index for lf in flows]
        assert len(set(indices)) == len(indices)

    def test_minimum_per_class_enforced(self):
        with pytest.raises(ValueError):
            generate_corpus(5, seed=0)
