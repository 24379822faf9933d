"""From-scratch fully connected feed-forward classifier.

Four layers (input, two hidden, output). Hidden layers use a leaky
rectifier f(x) = x for x >= 0 and alpha*x otherwise, so alpha = 0 gives the
plain max(x, 0) rectifier. The output layer is a softmax over the three
incident classes. Training is mini-batch gradient descent with
adaptive moment estimation and weighted cross-entropy loss.

All math is float64; gradients are exact analytic derivatives and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .flows import CLASS_ORDER, NUM_CLASSES, ClassLabel, Dataset, FeatureVector

WEIGHTS_FORMAT_ID = "flowtriage-weights"
WEIGHTS_FORMAT_VERSION = 1

DEFAULT_HIDDEN = (16, 16)
DEFAULT_ALPHA = 0.01
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8

_PROB_FLOOR = 1e-12


class NetworkShapeError(Exception):
    """Input or parameter shapes do not chain through the network."""


class TrainingError(Exception):
    """Training aborted (bad config, empty data, or non-finite numbers)."""


class WeightFormatError(Exception):
    """Weight file is unreadable or from an unsupported format version."""


class CorruptWeightsError(WeightFormatError):
    """Weight file fails its integrity checksum."""


@dataclass(frozen=True)
class Network:
    """Immutable parameter container. weights[l] has shape (fan_in, fan_out)."""

    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if len(self.layer_sizes) != 4:
            raise NetworkShapeError(f"expected 4 layers, got {len(self.layer_sizes)}")
        if any(s <= 0 for s in self.layer_sizes):
            raise NetworkShapeError(f"layer sizes must be positive: {self.layer_sizes}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        expected = list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise NetworkShapeError("expected 3 weight matrices and 3 bias vectors")
        for l, (w, b, shape) in enumerate(zip(self.weights, self.biases, expected)):
            if w.shape != shape:
                raise NetworkShapeError(f"weights[{l}] shape {w.shape}, expected {shape}")
            if b.shape != (shape[1],):
                raise NetworkShapeError(f"biases[{l}] shape {b.shape}, expected ({shape[1]},)")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NetworkShapeError(f"layer {l} contains non-finite parameters")


@dataclass(frozen=True)
class ClassDistribution:
    """Softmax probabilities in the fixed class order, plus the argmax class."""

    probs: tuple[float, ...]
    predicted: ClassLabel

    def __post_init__(self):
        if len(self.probs) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} probabilities")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")
        if any(p < 0.0 or p > 1.0 for p in self.probs):
            raise ValueError("probabilities must lie in [0,1]")

    @classmethod
    def from_probs(cls, probs: Sequence[float]) -> "ClassDistribution":
        probs = tuple(float(p) for p in probs)
        return cls(probs, CLASS_ORDER[int(np.argmax(probs))])

    def prob_of(self, label: ClassLabel) -> float:
        return self.probs[label.index]


@dataclass(frozen=True)
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    first_moment: tuple[np.ndarray, ...]
    second_moment: tuple[np.ndarray, ...]
    step_count: int = 0
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON

    @classmethod
    def fresh(cls, net: Network, **hyper) -> "AdamState":
        blocks = list(net.weights) + list(net.biases)
        return cls(
            first_moment=tuple(np.zeros_like(p) for p in blocks),
            second_moment=tuple(np.zeros_like(p) for p in blocks),
            step_count=0,
            **hyper,
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.0
    loss: str = "weighted_cross_entropy"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in [0,1)")
        if self.loss != "weighted_cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")


@dataclass(frozen=True)
class TrainReport:
    epoch_losses: tuple[float, ...]
    epoch_accuracies: tuple[float, ...]
    validation_accuracies: tuple[float, ...]
    samples: int
    mode: str = "train"
    data_checksum: str = ""

    @property
    def final_accuracy(self) -> float:
        return self.epoch_accuracies[-1] if self.epoch_accuracies else 0.0


@dataclass(frozen=True)
class Gradients:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


def leaky_relu(x, alpha: float):
    """x for x >= 0, alpha*x otherwise; alpha = 0 is the plain rectifier."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, x, alpha * x)
    return float(out) if out.ndim == 0 else out


def leaky_relu_grad(x, alpha: float):
    """Derivative: 1 for x > 0, alpha for x < 0, defined as 1 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 0, 1.0, alpha)
    return float(out) if out.ndim == 0 else out


def softmax(logits) -> ClassDistribution:
    """Normalized exponentials with max-subtraction for overflow safety."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1:
        raise NetworkShapeError(f"logits must be a vector, got shape {z.shape}")
    if not np.isfinite(z).all():
        raise NetworkShapeError("logits contain non-finite values")
    shifted = z - z.max()
    exps = np.exp(shifted)
    probs = exps / exps.sum()
    # argmax of z, not of probs: equal-probability ties must resolve the
    # same way the logits do.
    return ClassDistribution(tuple(float(p) for p in probs), CLASS_ORDER[int(np.argmax(z))])


def softmax_probs(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax on a 2-D batch of logits (training fast path)."""
    shifted = z - z.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def init_network(
    layer_sizes: Sequence[int] | None = None,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> Network:
    """Seeded uniform init in +-sqrt(6/(fan_in+fan_out)) per layer."""
    sizes = tuple(layer_sizes) if layer_sizes else (22, *DEFAULT_HIDDEN, NUM_CLASSES)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(sizes, tuple(weights), tuple(biases), alpha)


@dataclass(frozen=True)
class ForwardCache:
    """Pre-activations and activations retained for the backward pass."""

    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    z3: np.ndarray
    probs: np.ndarray


def _as_input(net: Network, features) -> np.ndarray:
    if isinstance(features, FeatureVector):
        x = np.asarray(features.values, dtype=np.float64)
    else:
        x = np.asarray(features, dtype=np.float64)
    if x.shape != (net.layer_sizes[0],):
        raise NetworkShapeError(
            f"input has shape {x.shape}, network expects ({net.layer_sizes[0]},)"
        )
    return x


def forward(net: Network, features) -> tuple[ClassDistribution, ForwardCache]:
    """Full forward pass returning the class distribution and the cache."""
    x = _as_input(net, features)
    w1, w2, w3 = net.weights
    b1, b2, b3 = net.biases
    z1 = x @ w1 + b1
    a1 = leaky_relu(z1, net.alpha)
    z2 = a1 @ w2 + b2
    a2 = leaky_relu(z2, net.alpha)
    z3 = a2 @ w3 + b3
    dist = softmax(z3)
    cache = ForwardCache(x, z1, a1, z2, a2, z3, np.asarray(dist.probs))
    return dist, cache


def predict(net: Network, features) -> ClassDistribution:
    """Forward pass without retaining activations; safe for concurrent use."""
    dist, _ = forward(net, features)
    return dist


def loss(dist: ClassDistribution, target: ClassLabel, weight: float = 1.0) -> float:
    """Weighted cross-entropy: weight * -log(p_target), p floored at 1e-12."""
    if weight <= 0:
        raise ValueError("weight must be > 0")
    p = max(dist.prob_of(target), _PROB_FLOOR)
    return float(weight * -np.log(p))


def backward(net: Network, cache: ForwardCache, target: ClassLabel, weight: float = 1.0) -> Gradients:
    """Exact gradients of the weighted cross-entropy for one sample.

    The fused softmax/cross-entropy output delta is (p - onehot) * weight.
    """
    if cache.x.shape != (net.layer_sizes[0],):
        raise NetworkShapeError("cache does not match this network's input width")
    w1, w2, w3 = net.weights
    onehot = np.zeros(NUM_CLASSES)
    onehot[target.index] = 1.0
    delta3 = (cache.probs - onehot) * weight
    dw3 = np.outer(cache.a2, delta3)
    db3 = delta3
    delta2 = (delta3 @ w3.T) * leaky_relu_grad(cache.z2, net.alpha)
    dw2 = np.outer(cache.a1, delta2)
    db2 = delta2
    delta1 = (delta2 @ w2.T) * leaky_relu_grad(cache.z1, net.alpha)
    dw1 = np.outer(cache.x, delta1)
    db1 = delta1
    return Gradients((dw1, dw2, dw3), (db1, db2, db3))


_BLOCK_NAMES = ("W1", "W2", "W3", "b1", "b2", "b3")


def adam_update(net: Network, grads: Gradients, state: AdamState) -> tuple[Network, AdamState]:
    """One bias-corrected adaptive-moment step; returns new net and state."""
    blocks = list(net.weights) + list(net.biases)
    grad_blocks = list(grads.weights) + list(grads.biases)
    for name, g in zip(_BLOCK_NAMES, grad_blocks):
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient in parameter block {name}")
    t = state.step_count + 1
    lr, b1, b2, eps = state.learning_rate, state.beta1, state.beta2, state.epsilon
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(blocks, grad_blocks, state.first_moment, state.second_moment):
        m_next = b1 * m + (1 - b1) * g
        v_next = b2 * v + (1 - b2) * (g * g)
        m_hat = m_next / (1 - b1 ** t)
        v_hat = v_next / (1 - b2 ** t)
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m_next)
        new_v.append(v_next)
    updated = Network(
        net.layer_sizes,
        tuple(new_params[:3]),
        tuple(new_params[3:]),
        net.alpha,
    )
    new_state = replace(
        state,
        first_moment=tuple(new_m),
        second_moment=tuple(new_v),
        step_count=t,
    )
    return updated, new_state


def _dataset_arrays(data: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.array([fv.values for fv in data.features], dtype=np.float64)
    y = np.array([label.index for label in data.labels], dtype=np.int64)
    w = np.array(data.weights, dtype=np.float64)
    return x, y, w


def _batch_forward(net: Network, x: np.ndarray):
    w1, w2, w3 = net.weights
    b1, b2, b3 = net.biases
    z1 = x @ w1 + b1
    a1 = np.where(z1 >= 0, z1, net.alpha * z1)
    z2 = a1 @ w2 + b2
    a2 = np.where(z2 >= 0, z2, net.alpha * z2)
    z3 = a2 @ w3 + b3
    return z1, a1, z2, a2, z3, softmax_probs(z3)


def _batch_gradients(net: Network, x, y, w) -> tuple[Gradients, float]:
    """Mean weighted-cross-entropy gradients over one batch."""
    n = x.shape[0]
    z1, a1, z2, a2, z3, probs = _batch_forward(net, x)
    p_target = np.clip(probs[np.arange(n), y], _PROB_FLOOR, None)
    batch_loss = float(np.mean(w * -np.log(p_target)))
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    delta3 = (probs - onehot) * w[:, None] / n
    w1, w2, w3 = net.weights
    dw3 = a2.T @ delta3
    db3 = delta3.sum(axis=0)
    delta2 = (delta3 @ w3.T) * np.where(z2 >= 0, 1.0, net.alpha)
    dw2 = a1.T @ delta2
    db2 = delta2.sum(axis=0)
    delta1 = (delta2 @ w2.T) * np.where(z1 >= 0, 1.0, net.alpha)
    dw1 = x.T @ delta1
    db1 = delta1.sum(axis=0)
    return Gradients((dw1, dw2, dw3), (db1, db2, db3)), batch_loss


def accuracy(net: Network, data: Dataset) -> float:
    if len(data) == 0:
        return 0.0
    x, y, _ = _dataset_arrays(data)
    *_, probs = _batch_forward(net, x)
    return float(np.mean(np.argmax(probs, axis=1) == y))


def train(net: Network, data: Dataset, config: TrainConfig) -> tuple[Network, TrainReport]:
    """Seeded mini-batch training; deterministic given (seed, data, config)."""
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    x, y, w = _dataset_arrays(data)
    if x.shape[1] != net.layer_sizes[0]:
        raise NetworkShapeError(
            f"dataset features have width {x.shape[1]}, network expects {net.layer_sizes[0]}"
        )
    rng = np.random.default_rng(config.seed)
    n_val = int(round(len(data) * config.validation_fraction))
    order = rng.permutation(len(data))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise TrainingError("validation split left no training samples")
    if config.batch_size > len(train_idx):
        raise TrainingError(
            f"batch_size {config.batch_size} exceeds training set size {len(train_idx)}"
        )
    xt, yt, wt = x[train_idx], y[train_idx], w[train_idx]
    xv, yv = x[val_idx], y[val_idx]

    state = AdamState.fresh(net)
    losses, accuracies, val_accuracies = [], [], []
    for epoch in range(config.epochs):
        perm = rng.permutation(len(xt))
        epoch_loss_sum = 0.0
        for start in range(0, len(xt), config.batch_size):
            idx = perm[start:start + config.batch_size]
            grads, batch_loss = _batch_gradients(net, xt[idx], yt[idx], wt[idx])
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}"
                )
            epoch_loss_sum += batch_loss * len(idx)
            net, state = adam_update(net, grads, state)
        losses.append(epoch_loss_sum / len(xt))
        *_, probs = _batch_forward(net, xt)
        accuracies.append(float(np.mean(np.argmax(probs, axis=1) == yt)))
        if n_val:
            *_, vprobs = _batch_forward(net, xv)
            val_accuracies.append(float(np.mean(np.argmax(vprobs, axis=1) == yv)))
    report = TrainReport(
        epoch_losses=tuple(losses),
        epoch_accuracies=tuple(accuracies),
        validation_accuracies=tuple(val_accuracies),
        samples=len(train_idx),
    )
    return net, report


# --- weight persistence -----------------------------------------------------


def _param_payload(net: Network) -> dict:
    return {
        "layer_sizes": list(net.layer_sizes),
        "alpha": net.alpha,
        "weights": [w.flatten().tolist() for w in net.weights],  # row-major
        "biases": [b.tolist() for b in net.biases],
    }


def _param_checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_weights(net: Network, destination, dataset_checksum: str = "") -> str:
    """Write the versioned weight file; returns its parameter checksum."""
    payload = _param_payload(net)
    document = {
        "format": WEIGHTS_FORMAT_ID,
        "format_version": WEIGHTS_FORMAT_VERSION,
        "class_order": [c.value for c in CLASS_ORDER],
        "dataset_checksum": dataset_checksum,
        "param_checksum": _param_checksum(payload),
        **payload,
    }
    text = json.dumps(document, indent=1)
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    return document["param_checksum"]


def load_weights(source, expected_classes: int = NUM_CLASSES) -> Network:
    """Load and verify a weight file; round-trips parameters bit-exactly."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptWeightsError(f"weight file is not readable JSON: {exc}") from exc
    if document.get("format") != WEIGHTS_FORMAT_ID:
        raise WeightFormatError(f"not a {WEIGHTS_FORMAT_ID} file")
    if document.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise WeightFormatError(
            f"unsupported weight format version {document.get('format_version')!r}"
        )
    try:
        payload = {
            "layer_sizes": document["layer_sizes"],
            "alpha": document["alpha"],
            "weights": document["weights"],
            "biases": document["biases"],
        }
        stored_checksum = document["param_checksum"]
    except KeyError as exc:
        raise CorruptWeightsError(f"weight file missing field {exc}") from exc
    if _param_checksum(payload) != stored_checksum:
        raise CorruptWeightsError("weight file failed its integrity checksum")
    sizes = tuple(int(s) for s in payload["layer_sizes"])
    if sizes[-1] != expected_classes:
        raise NetworkShapeError(
            f"weight file has {sizes[-1]} output classes, taxonomy has {expected_classes}"
        )
    shapes = list(zip(sizes[:-1], sizes[1:]))
    try:
        weights = tuple(
            np.array(flat, dtype=np.float64).reshape(shape)
            for flat, shape in zip(payload["weights"], shapes)
        )
        biases = tuple(np.array(b, dtype=np.float64) for b in payload["biases"])
    except ValueError as exc:
        raise NetworkShapeError(f"weight file shapes are inconsistent: {exc}") from exc
    return Network(sizes, weights, biases, float(payload["alpha"]))


def weights_checksum(net: Network) -> str:
    """Checksum identifying this exact parameter set (the model version)."""
    return _param_checksum(_param_payload(net))
