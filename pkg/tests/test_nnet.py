import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowtriage.flows import CLASS_ORDER, ClassLabel, Dataset, FeatureVector
from flowtriage.nnet import (
    AdamState,
    ClassDistribution,
    CorruptWeightsError,
    Gradients,
    Network,
    NetworkShapeError,
    TrainConfig,
    TrainingError,
    WeightFormatError,
    adam_update,
    backward,
    forward,
    init_network,
    leaky_relu,
    leaky_relu_grad,
    load_weights,
    loss,
    predict,
    save_weights,
    softmax,
    train,
    weights_checksum,
)


class TestLeakyRelu:
    def test_positive_branch(self):
        assert leaky_relu(2.0, 0.01) == 2.0

    def test_zero_alpha_matches_plain_rectifier(self):
        assert leaky_relu(-1.0, 0.0) == 0.0

    def test_negative_branch_scales_by_alpha(self):
        assert leaky_relu(-2.0, 0.01) == pytest.approx(-0.02, abs=1e-15)

    def test_zero_alpha_equals_max_on_grid(self):
        xs = np.linspace(-50, 50, 10_001)
        out = leaky_relu(xs, 0.0)
        expected = np.maximum(xs, 0.0)
        assert np.array_equal(out == 0.0, expected == 0.0)
        assert (out == expected).all()

    def test_gradient_definition(self):
        assert leaky_relu_grad(3.0, 0.01) == 1.0
        assert leaky_relu_grad(-3.0, 0.01) == 0.01
        assert leaky_relu_grad(0.0, 0.01) == 1.0  # defined as 1 at the kink


class TestSoftmax:
    def test_zero_logits_uniform(self):
        dist = softmax([0.0, 0.0, 0.0])
        assert dist.probs == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-15)

    def test_hand_value_one_zero_zero(self):
        # e/(e+2) and 1/(e+2), frozen from a 50-digit evaluation
        dist = softmax([1.0, 0.0, 0.0])
        assert dist.probs[0] == pytest.approx(0.5761168847658291, abs=1e-6)
        assert dist.probs[1] == pytest.approx(0.21194155761708544, abs=1e-6)
        assert dist.probs[2] == pytest.approx(0.21194155761708544, abs=1e-6)

    def test_shift_invariance_with_huge_offset(self):
        base = softmax([1000.0, 0.0, 0.0])
        shifted = softmax([2000.0, 1000.0, 1000.0])
        for a, b in zip(base.probs, shifted.probs):
            assert a == pytest.approx(b, abs=1e-12)

    def test_overflow_safe(self):
        dist = softmax([10_000.0, 0.0, -10_000.0])
        assert math.isfinite(sum(dist.probs))
        assert dist.predicted is ClassLabel.NORMAL_TRAFFIC

    def test_sums_to_one_random(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            dist = softmax(rng.normal(0, 10, size=3))
            assert abs(sum(dist.probs) - 1.0) < 1e-9

    @given(st.lists(st.floats(min_value=-100, max_value=100), min_size=3, max_size=3))
    @settings(max_examples=300, deadline=None)
    def test_argmax_preserved(self, logits):
        z = np.asarray(logits)
        if len(np.flatnonzero(z == z.max())) != 1:
            return  # ties are resolved by logit order; only unique maxima asserted
        dist = softmax(z)
        assert dist.predicted is CLASS_ORDER[int(np.argmax(z))]

    def test_rejects_non_finite(self):
        with pytest.raises(NetworkShapeError):
            softmax([float("nan"), 0.0, 0.0])


class TestForward:
    def test_zero_network_gives_uniform(self):
        sizes = (22, 8, 8, 3)
        zero = Network(
            sizes,
            tuple(np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])),
            tuple(np.zeros(b) for b in sizes[1:]),
            alpha=0.01,
        )
        dist, _ = forward(zero, np.full(22, 0.7))
        assert dist.probs == pytest.approx((1 / 3, 1 / 3, 1 / 3), abs=1e-15)

    def test_toy_network_hand_computed(self):
        # 1-1-1-3 chain, alpha 0.5: x=2 -> z1=2*1.5+0.5=3.5 -> a1=3.5
        # z2=3.5*-2+1=-6 -> a2=-3 -> z3 = (-3*[1,0,-1]) + [0.1,0.2,0.3]
        net = Network(
            (1, 1, 1, 3),
            (np.array([[1.5]]), np.array([[-2.0]]), np.array([[1.0, 0.0, -1.0]])),
            (np.array([0.5]), np.array([1.0]), np.array([0.1, 0.2, 0.3])),
            alpha=0.5,
        )
        dist, cache = forward(net, [2.0])
        z3 = np.array([-3.0 + 0.1, 0.2, 3.0 + 0.3])
        expected = np.exp(z3 - z3.max())
        expected /= expected.sum()
        assert dist.probs == pytest.approx(tuple(expected), abs=1e-12)
        assert cache.z1 == pytest.approx([3.5])
        assert cache.a2 == pytest.approx([-3.0])

    def test_wrong_width_is_shape_error(self):
        net = init_network((22, 8, 8, 3), seed=1)
        with pytest.raises(NetworkShapeError):
            forward(net, np.zeros(21))

    def test_predict_matches_forward(self):
        net = init_network((22, 8, 8, 3), seed=2)
        x = np.random.default_rng(3).uniform(0, 1, 22)
        dist, _ = forward(net, x)
        assert predict(net, x).probs == dist.probs

    def test_accepts_feature_vector(self):
        net = init_network(seed=4)
        fv = FeatureVector((0.5,) * 22, flow_index=9)
        assert sum(predict(net, fv).probs) == pytest.approx(1.0, abs=1e-9)


class TestLoss:
    def test_perfect_prediction_zero_loss(self):
        dist = ClassDistribution((1.0, 0.0, 0.0), ClassLabel.NORMAL_TRAFFIC)
        assert loss(dist, ClassLabel.NORMAL_TRAFFIC, 1.0) == 0.0

    def test_uniform_is_ln3(self):
        dist = ClassDistribution((1 / 3, 1 / 3, 1 / 3), ClassLabel.NORMAL_TRAFFIC)
        assert loss(dist, ClassLabel.DOS_ATTACK, 1.0) == pytest.approx(
            1.0986122886681098, abs=1e-12
        )

    def test_linear_in_weight(self):
        dist = ClassDistribution((1 / 3, 1 / 3, 1 / 3), ClassLabel.NORMAL_TRAFFIC)
        assert loss(dist, ClassLabel.DOS_ATTACK, 2.0) == pytest.approx(
            2 * loss(dist, ClassLabel.DOS_ATTACK, 1.0), rel=1e-15
        )

    def test_probability_floor_keeps_loss_finite(self):
        dist = ClassDistribution((1.0, 0.0, 0.0), ClassLabel.NORMAL_TRAFFIC)
        value = loss(dist, ClassLabel.DOS_ATTACK, 1.0)
        assert math.isfinite(value)
        assert value == pytest.approx(-math.log(1e-12))


def numeric_gradients(net: Network, x, target, weight, step=1e-5) -> Gradients:
    """Central finite differences of the scalar loss over every parameter.

    Independent oracle: evaluates the loss through forward() only.
    """
    def loss_at(candidate: Network) -> float:
        dist, _ = forward(candidate, x)
        return loss(dist, target, weight)

    def perturb(block_kind: str, layer: int, index: tuple) -> float:
        def shifted(delta: float) -> Network:
            weights = [w.copy() for w in net.weights]
            biases = [b.copy() for b in net.biases]
            if block_kind == "w":
                weights[layer][index] += delta
            else:
                biases[layer][index] += delta
            return Network(net.layer_sizes, tuple(weights), tuple(biases), net.alpha)
        return (loss_at(shifted(step)) - loss_at(shifted(-step))) / (2 * step)

    grad_w, grad_b = [], []
    for layer, w in enumerate(net.weights):
        g = np.zeros_like(w)
        for index in np.ndindex(w.shape):
            g[index] = perturb("w", layer, index)
        grad_w.append(g)
    for layer, b in enumerate(net.biases):
        g = np.zeros_like(b)
        for index in np.ndindex(b.shape):
            g[index] = perturb("b", layer, index)
        grad_b.append(g)
    return Gradients(tuple(grad_w), tuple(grad_b))


def max_relative_error(analytic: Gradients, numeric: Gradients) -> float:
    worst = 0.0
    for a, n in zip(analytic.weights + analytic.biases, numeric.weights + numeric.biases):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-3)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


class TestBackward:
    def test_output_delta_uniform_target_zero(self):
        sizes = (4, 3, 3, 3)
        zero = Network(
            sizes,
            tuple(np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])),
            tuple(np.zeros(b) for b in sizes[1:]),
        )
        _, cache = forward(zero, np.ones(4))
        grads = backward(zero, cache, ClassLabel.NORMAL_TRAFFIC, 1.0)
        # final bias gradient IS the output delta
        assert grads.biases[2] == pytest.approx([-2 / 3, 1 / 3, 1 / 3], abs=1e-12)

    def test_weight_scales_gradients_linearly(self):
        net = init_network((6, 5, 4, 3), seed=11)
        x = np.random.default_rng(12).uniform(0, 1, 6)
        _, cache = forward(net, x)
        full = backward(net, cache, ClassLabel.DOS_ATTACK, 1.0)
        half = backward(net, cache, ClassLabel.DOS_ATTACK, 0.5)
        for a, b in zip(full.weights + full.biases, half.weights + half.biases):
            assert b == pytest.approx(a * 0.5, rel=1e-12)

    def test_matches_finite_differences_small_net(self):
        rng = np.random.default_rng(13)
        net = init_network((5, 4, 4, 3), alpha=0.01, seed=13)
        x = rng.uniform(0, 1, 5)
        _, cache = forward(net, x)
        analytic = backward(net, cache, ClassLabel.SERVICE_INCIDENT, 1.3)
        numeric = numeric_gradients(net, x, ClassLabel.SERVICE_INCIDENT, 1.3)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_matches_finite_differences_with_zero_alpha(self):
        rng = np.random.default_rng(14)
        net = init_network((5, 4, 4, 3), alpha=0.0, seed=14)
        x = rng.uniform(0, 1, 5)
        _, cache = forward(net, x)
        analytic = backward(net, cache, ClassLabel.NORMAL_TRAFFIC, 1.0)
        numeric = numeric_gradients(net, x, ClassLabel.NORMAL_TRAFFIC, 1.0)
        assert max_relative_error(analytic, numeric) < 1e-4

    def test_mismatched_cache_is_shape_error(self):
        net_a = init_network((5, 4, 4, 3), seed=15)
        net_b = init_network((6, 4, 4, 3), seed=15)
        _, cache = forward(net_a, np.zeros(5))
        with pytest.raises(NetworkShapeError):
            backward(net_b, cache, ClassLabel.NORMAL_TRAFFIC, 1.0)


class TestAdam:
    def _scalar_net(self, w: float) -> Network:
        return Network(
            (1, 1, 1, 3),
            (np.array([[w]]), np.array([[1.0]]), np.array([[1.0, 1.0, 1.0]])),
            (np.array([0.0]), np.array([0.0]), np.array([0.0, 0.0, 0.0])),
        )

    def test_zero_gradient_is_fixed_point(self):
        net = init_network((4, 3, 3, 3), seed=20)
        state = AdamState.fresh(net)
        zeros = Gradients(
            tuple(np.zeros_like(w) for w in net.weights),
            tuple(np.zeros_like(b) for b in net.biases),
        )
        updated, new_state = adam_update(net, zeros, state)
        for before, after in zip(net.weights + net.biases, updated.weights + updated.biases):
            assert np.array_equal(before, after)
        assert new_state.step_count == 1
        for m in new_state.first_moment:
            assert not m.any()

    def test_hand_computed_first_step(self):
        # one parameter w=1, gradient 1, defaults: the bias-corrected step is
        # exactly lr * 1/(sqrt(1)+eps); arithmetic spelled out by hand below.
        net = self._scalar_net(1.0)
        state = AdamState.fresh(net)
        grads = Gradients(
            (np.array([[1.0]]), np.zeros((1, 1)), np.zeros((1, 3))),
            (np.zeros(1), np.zeros(1), np.zeros(3)),
        )
        updated, _ = adam_update(net, grads, state)
        m = 0.9 * 0.0 + 0.1 * 1.0
        v = 0.999 * 0.0 + 0.001 * 1.0
        m_hat = m / (1 - 0.9 ** 1)
        v_hat = v / (1 - 0.999 ** 1)
        expected = 1.0 - 1e-3 * m_hat / (math.sqrt(v_hat) + 1e-8)
        assert updated.weights[0][0, 0] == pytest.approx(expected, abs=1e-12)
        assert updated.weights[0][0, 0] == pytest.approx(1 - 1e-3 / (1 + 1e-8), abs=1e-12)

    def test_quadratic_converges_within_budget(self):
        # minimize f(w) = w^2 from w=5 using the optimizer's own update rule
        net = self._scalar_net(5.0)
        state = AdamState.fresh(net)
        steps_to_converge = None
        for step in range(1, 10_001):
            w = float(net.weights[0][0, 0])
            grads = Gradients(
                (np.array([[2 * w]]), np.zeros((1, 1)), np.zeros((1, 3))),
                (np.zeros(1), np.zeros(1), np.zeros(3)),
            )
            net, state = adam_update(net, grads, state)
            if abs(float(net.weights[0][0, 0])) < 1e-3:
                steps_to_converge = step
                break
        assert steps_to_converge is not None and steps_to_converge <= 10_000

    def test_non_finite_gradient_names_block(self):
        net = init_network((4, 3, 3, 3), seed=21)
        state = AdamState.fresh(net)
        bad = Gradients(
            (np.zeros((4, 3)), np.full((3, 3), np.nan), np.zeros((3, 3))),
            (np.zeros(3), np.zeros(3), np.zeros(3)),
        )
        with pytest.raises(TrainingError, match="W2"):
            adam_update(net, bad, state)


def toy_dataset(n_per_class=40, seed=0) -> Dataset:
    """Two linearly separable unit-interval clusters for classes 0 and 2."""
    rng = np.random.default_rng(seed)
    features, labels = [], []
    for cls, center in ((ClassLabel.NORMAL_TRAFFIC, 0.2), (ClassLabel.DOS_ATTACK, 0.8)):
        for i in range(n_per_class):
            vec = np.clip(rng.normal(center, 0.05, size=22), 0.0, 1.0)
            features.append(FeatureVector(tuple(float(v) for v in vec), len(features)))
            labels.append(cls)
    return Dataset(tuple(features), tuple(labels), (1.0,) * len(features))


class TestTrain:
    def test_separable_clusters_reach_full_accuracy(self):
        data = toy_dataset()
        net = init_network(seed=31)
        net, report = train(net, data, TrainConfig(epochs=200, batch_size=16, seed=31))
        assert report.final_accuracy == 1.0
        assert len(report.epoch_losses) == 200

    def test_zero_epochs_returns_input_network(self):
        data = toy_dataset()
        net = init_network(seed=32)
        trained, report = train(net, data, TrainConfig(epochs=0, batch_size=16, seed=32))
        for before, after in zip(net.weights + net.biases, trained.weights + trained.biases):
            assert np.array_equal(before, after)
        assert report.epoch_losses == ()

    def test_same_seed_bitwise_identical(self):
        data = toy_dataset()
        config = TrainConfig(epochs=20, batch_size=16, seed=33)
        _, report_a = train(init_network(seed=33), data, config)
        _, report_b = train(init_network(seed=33), data, config)
        assert report_a == report_b

    def test_different_seed_differs(self):
        data = toy_dataset()
        _, report_a = train(init_network(seed=1), data, TrainConfig(epochs=5, batch_size=16, seed=1))
        _, report_b = train(init_network(seed=2), data, TrainConfig(epochs=5, batch_size=16, seed=2))
        assert report_a != report_b

    def test_empty_dataset_rejected(self):
        empty = Dataset((), (), ())
        with pytest.raises(TrainingError):
            train(init_network(seed=0), empty, TrainConfig(epochs=1, batch_size=1, seed=0))

    def test_oversized_batch_rejected(self):
        data = toy_dataset(n_per_class=5)
        with pytest.raises(TrainingError):
            train(init_network(seed=0), data, TrainConfig(epochs=1, batch_size=64, seed=0))

    def test_validation_split_reported(self):
        data = toy_dataset()
        config = TrainConfig(epochs=5, batch_size=8, seed=34, validation_fraction=0.25)
        _, report = train(init_network(seed=34), data, config)
        assert len(report.validation_accuracies) == 5
        assert report.samples == 60


class TestPersistence:
    def test_round_trip_bitwise_equal_predictions(self, tmp_path):
        net = init_network(seed=40)
        path = tmp_path / "model.json"
        save_weights(net, path, dataset_checksum="abc123")
        restored = load_weights(path)
        rng = np.random.default_rng(41)
        for _ in range(100):
            x = rng.uniform(0, 1, 22)
            assert predict(net, x).probs == predict(restored, x).probs

    def test_round_trip_bitwise_equal_parameters(self, tmp_path):
        net = init_network(seed=42)
        path = tmp_path / "model.json"
        save_weights(net, path)
        restored = load_weights(path)
        assert restored.layer_sizes == net.layer_sizes
        assert restored.alpha == net.alpha
        for a, b in zip(net.weights + net.biases, restored.weights + restored.biases):
            assert np.array_equal(a, b)

    def test_truncated_file_is_corruption(self, tmp_path):
        path = tmp_path / "model.json"
        save_weights(init_network(seed=43), path)
        path.write_text(path.read_text()[:200])
        with pytest.raises(CorruptWeightsError):
            load_weights(path)

    def test_tampered_parameter_fails_checksum(self, tmp_path):
        path = tmp_path / "model.json"
        save_weights(init_network(seed=44), path)
        import json as json_mod
        doc = json_mod.loads(path.read_text())
        doc["weights"][0][0] += 1.0
        path.write_text(json_mod.dumps(doc))
        with pytest.raises(CorruptWeightsError):
            load_weights(path)

    def test_four_class_file_rejected_against_taxonomy(self, tmp_path):
        sizes = (22, 8, 8, 4)
        rng = np.random.default_rng(45)
        net4 = Network(
            sizes,
            tuple(rng.normal(size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])),
            tuple(np.zeros(b) for b in sizes[1:]),
        )
        path = tmp_path / "model4.json"
        save_weights(net4, path)
        with pytest.raises(NetworkShapeError):
            load_weights(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        save_weights(init_network(seed=46), path)
        import json as json_mod
        doc = json_mod.loads(path.read_text())
        doc["format_version"] = 99
        path.write_text(json_mod.dumps(doc))
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_weights_checksum_tracks_parameters(self):
        a = init_network(seed=47)
        b = init_network(seed=48)
        assert weights_checksum(a) == weights_checksum(a)
        assert weights_checksum(a) != weights_checksum(b)
