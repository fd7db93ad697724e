"""Hand-rolled backprop, minibatch SGD, and layer-sensitivity experiments.

Everything is deterministic from (spec, config): shuffles, noise draws and
initialization all come from splittable streams, and gradient accumulation
keeps a fixed summation order. Derivatives take the convention phi' = 0 at
kinks (relu at 0, hard tanh at +-1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .net import Network, NetworkSpec, init_network, phi, phi_grad
from .rng import stream
from .trajectory import layer_image_length, make_trajectory

LOSSES = ("softmax_cross_entropy", "squared_error")


class NonFiniteLoss(RuntimeError):
    def __init__(self, batch_index: int):
        super().__init__(f"non-finite loss at batch index {batch_index}")
        self.batch_index = batch_index


@dataclass(frozen=True)
class TrainConfig:
    """Plain SGD settings; trainable_layers masks weight layers (None = all).

    learning_rate 0 is allowed for freeze checks even though any real run
    wants it positive.
    """

    learning_rate: float
    batch_size: int
    epochs: int
    loss: str = "softmax_cross_entropy"
    trainable_layers: tuple[bool, ...] | None = None
    eval_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.trainable_layers is not None and not any(self.trainable_layers):
            raise ValueError("at least one layer must be trainable")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TrainHistory:
    """Evaluation records collected during one training run."""

    steps: list[int] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    test_accuracy: list[float] = field(default_factory=list)
    weight_scales: list[np.ndarray] = field(default_factory=list)
    extras: list = field(default_factory=list)
    diverged: bool = False


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _forward_layers(layers, x, activation):
    pres = []
    acts = [x]
    z = x
    last = len(layers) - 1
    for d, (w, b) in enumerate(layers):
        h = z @ w.T + b
        pres.append(h)
        if d < last:
            z = phi(h, activation)
            acts.append(z)
    return pres, acts


def _loss_and_delta(outputs: np.ndarray, labels: np.ndarray, loss: str, num_classes: int):
    """Mean loss and d(loss)/d(outputs)."""
    n = outputs.shape[0]
    targets = _one_hot(labels, num_classes)
    if loss == "softmax_cross_entropy":
        shifted = outputs - outputs.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_p = shifted - log_z
        value = float(-(log_p[np.arange(n), labels]).mean())
        delta = (np.exp(log_p) - targets) / n
    else:
        diff = outputs - targets
        value = float(0.5 * (diff**2).sum() / n)
        delta = diff / n
    return value, delta


def backprop_grads(net_or_layers, batch_inputs, batch_labels, loss: str, num_classes: int | None = None, trainable=None, activation: str | None = None):
    """Exact gradients of the mean batch loss; frozen layers get zero blocks.

    Accepts either a Network or a raw layer list (with activation given).
    Returns (grads, loss_value) with grads mirroring the layer shapes.
    """
    if isinstance(net_or_layers, Network):
        layers = net_or_layers.layers
        activation = net_or_layers.spec.activation
        if num_classes is None:
            num_classes = net_or_layers.spec.output_dim
    else:
        layers = net_or_layers
        if activation is None or num_classes is None:
            raise TypeError("raw layers need explicit activation and num_classes")
    x = np.asarray(batch_inputs, dtype=np.float64)
    y = np.asarray(batch_labels)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a nonempty 2-D array")
    if x.shape[1] != layers[0][0].shape[1]:
        raise ValueError("batch feature dimension does not match the first layer")
    pres, acts = _forward_layers(layers, x, activation)
    outputs = pres[-1]
    if not np.isfinite(outputs).all():
        bad = int(np.nonzero(~np.isfinite(outputs).all(axis=1))[0][0])
        raise NonFiniteLoss(bad)
    value, delta = _loss_and_delta(outputs, y, loss, num_classes)
    if not math.isfinite(value):
        raise NonFiniteLoss(0)
    grads = []
    g = delta
    for d in range(len(layers) - 1, -1, -1):
        w, _ = layers[d]
        dw = g.T @ acts[d]
        db = g.sum(axis=0)
        grads.append((dw, db))
        if d > 0:
            g = (g @ w) * phi_grad(pres[d - 1], activation)
    grads.reverse()
    if trainable is not None:
        for d, on in enumerate(trainable):
            if not on:
                grads[d] = (np.zeros_like(grads[d][0]), np.zeros_like(grads[d][1]))
    return grads, value


def evaluate_accuracy(layers, dataset: Dataset, activation: str) -> float:
    pres, _ = _forward_layers(layers, dataset.inputs, activation)
    return float((pres[-1].argmax(axis=1) == dataset.labels).mean())


def weight_scale_estimates(layers, spec: NetworkSpec) -> np.ndarray:
    """Per-layer sigma_w estimate: empirical std of W entries times sqrt(fan_in)."""
    dims = spec.layer_dims()
    return np.asarray([float(w.std()) * math.sqrt(dims[d][0]) for d, (w, _) in enumerate(layers)])


def sgd_train(
    net: Network,
    train_set: Dataset,
    config: TrainConfig,
    test_set: Dataset | None = None,
    snapshot_fn=None,
) -> tuple[Network, TrainHistory]:
    """Plain minibatch SGD from the given network.

    History records step 0, every eval_every steps, and the final step.
    snapshot_fn(layers) output (if any) lands in history.extras per record.
    Divergence (non-finite loss) aborts with the history so far flagged.
    """
    spec = net.spec
    if train_set.num_classes != spec.output_dim:
        raise ValueError("output_dim must equal num_classes for classification training")
    layers = [(w.copy(), b.copy()) for w, b in net.layers]
    trainable = config.trainable_layers
    if trainable is not None and len(trainable) != len(layers):
        raise ValueError(f"trainable mask needs {len(layers)} entries")
    history = TrainHistory()

    def record(step: int) -> None:
        history.steps.append(step)
        history.train_accuracy.append(evaluate_accuracy(layers, train_set, spec.activation))
        history.test_accuracy.append(
            evaluate_accuracy(layers, test_set, spec.activation) if test_set is not None else math.nan
        )
        history.weight_scales.append(weight_scale_estimates(layers, spec))
        if snapshot_fn is not None:
            history.extras.append(snapshot_fn(layers))

    record(0)
    step = 0
    n = train_set.size
    for epoch in range(config.epochs):
        perm = stream(config.seed, "shuffle", epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            try:
                grads, _ = backprop_grads(
                    layers,
                    train_set.inputs[idx],
                    train_set.labels[idx],
                    config.loss,
                    num_classes=spec.output_dim,
                    trainable=trainable,
                    activation=spec.activation,
                )
            except NonFiniteLoss:
                history.diverged = True
                return net.with_layers(layers), history
            for d, (dw, db) in enumerate(grads):
                if trainable is None or trainable[d]:
                    layers[d] = (layers[d][0] - config.learning_rate * dw, layers[d][1] - config.learning_rate * db)
            step += 1
            if step % config.eval_every == 0:
                record(step)
    if not history.steps or history.steps[-1] != step:
        record(step)
    return net.with_layers(layers), history


def layer_noise_robustness(
    net: Network,
    test_set: Dataset,
    noise_magnitudes,
    num_seeds: int = 5,
    seed: int = 0,
) -> np.ndarray:
    """accuracy[layer][magnitude] under relative Gaussian weight noise.

    Magnitude eta perturbs layer d only, with std eta * std(W(d)); accuracies
    average over num_seeds independent draws. The input network is never
    mutated (verified against its baseline accuracy after every layer sweep).
    """
    magnitudes = [float(m) for m in noise_magnitudes]
    if any(m < 0 for m in magnitudes):
        raise ValueError("noise magnitudes must be nonnegative")
    spec = net.spec
    base_layers = list(net.layers)
    baseline = evaluate_accuracy(base_layers, test_set, spec.activation)
    out = np.zeros((len(base_layers), len(magnitudes)))
    for d in range(len(base_layers)):
        w_d, b_d = base_layers[d]
        w_std = float(w_d.std())
        for mi, eta in enumerate(magnitudes):
            accs = []
            for r in range(num_seeds):
                noise = stream(seed, "noise", d, mi, r).normal(size=w_d.shape) * (eta * w_std)
                noisy = list(base_layers)
                noisy[d] = (w_d + noise, b_d)
                accs.append(evaluate_accuracy(noisy, test_set, spec.activation))
            out[d, mi] = float(np.mean(accs))
        if evaluate_accuracy(base_layers, test_set, spec.activation) != baseline:
            raise RuntimeError("noise sweep mutated the network under test")
    return out


@dataclass(frozen=True)
class SingleLayerResult:
    layer: int
    train_accuracy: float
    test_accuracy: float


def train_single_layer_experiment(
    spec: NetworkSpec,
    train_set: Dataset,
    test_set: Dataset,
    config: TrainConfig,
    layers: list[int] | None = None,
) -> list[SingleLayerResult]:
    """Train exactly one weight layer from a shared random initialization.

    Default candidates are hidden layers 1..n-1 (skipping layer 0 keeps the
    trained parameter count fixed) plus the output layer n. All other layers
    stay frozen at initialization.
    """
    n = spec.depth
    if n < 3 and layers is None:
        raise ValueError("single-layer comparison needs depth >= 3")
    candidates = layers if layers is not None else [*range(1, n), n]
    base = init_network(spec)
    results = []
    for d in candidates:
        if not 0 <= d <= n:
            raise ValueError(f"layer index {d} out of range")
        mask = tuple(i == d for i in range(n + 1))
        cfg = TrainConfig(
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            epochs=config.epochs,
            loss=config.loss,
            trainable_layers=mask,
            eval_every=config.eval_every,
            seed=config.seed,
        )
        _, history = sgd_train(base, train_set, cfg, test_set=test_set)
        results.append(
            SingleLayerResult(
                layer=d,
                train_accuracy=history.train_accuracy[-1],
                test_accuracy=history.test_accuracy[-1],
            )
        )
    return results


@dataclass
class TrainingLengthResult:
    """Per-snapshot hidden-layer lengths for the two probe trajectories."""

    steps: list[int]
    lengths_data: np.ndarray  # (snapshots, depth + 1): datapoint interpolation
    lengths_random: np.ndarray  # (snapshots, depth + 1): random-point interpolation
    weight_scales: np.ndarray  # (snapshots, depth + 1)
    train_accuracy: list[float]
    test_accuracy: list[float]


def trajectory_length_during_training(
    spec: NetworkSpec,
    train_set: Dataset,
    test_set: Dataset,
    config: TrainConfig,
    num_points: int = 257,
    rel_tol: float = 1e-3,
) -> TrainingLengthResult:
    """Track per-layer trajectory lengths and weight scales while training.

    Probes are circular arcs between two training datapoints and between two
    random Gaussian points of matching scale; lengths cover input and hidden
    layers only (the affine output layer is excluded).
    """
    g = stream(config.seed, "probe_pair")
    i, j = map(int, g.choice(train_set.size, size=2, replace=False))
    traj_data = make_trajectory("circular_arc", train_set.inputs[i], train_set.inputs[j])
    scale = float(np.linalg.norm(train_set.inputs, axis=1).mean())
    r0 = g.normal(size=train_set.dim)
    r1 = g.normal(size=train_set.dim)
    traj_rand = make_trajectory(
        "circular_arc",
        r0 / np.linalg.norm(r0) * scale,
        r1 / np.linalg.norm(r1) * scale,
    )
    net = init_network(spec)

    def snapshot(layers):
        snap = net.with_layers(layers)
        return (
            layer_image_length(snap, traj_data, num_points=num_points, rel_tol=rel_tol).lengths,
            layer_image_length(snap, traj_rand, num_points=num_points, rel_tol=rel_tol).lengths,
        )

    _, history = sgd_train(net, train_set, config, test_set=test_set, snapshot_fn=snapshot)
    lengths_data = np.stack([e[0] for e in history.extras])
    lengths_random = np.stack([e[1] for e in history.extras])
    return TrainingLengthResult(
        steps=history.steps,
        lengths_data=lengths_data,
        lengths_random=lengths_random,
        weight_scales=np.stack(history.weight_scales),
        train_accuracy=history.train_accuracy,
        test_accuracy=history.test_accuracy,
    )
