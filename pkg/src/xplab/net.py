"""Fully connected piecewise-linear networks with traced evaluation.

Weight layer d maps z(d) to the pre-activation h(d) = W(d) z(d) + b(d);
hidden activations follow as z(d+1) = phi(h(d)). The last weight layer is a
plain affine readout: no nonlinearity is applied to it, so the network output
is the final pre-activation. Counting measures (activation patterns,
transitions) are defined over hidden neurons only; the output sign is tracked
separately where a labelling is needed.

Weights are sampled i.i.d. Gaussian with variance sigma_w_sq / fan_in and
biases with variance sigma_b_sq, each from its own splittable stream, so a
(spec, seed) pair maps to one bit-exact network.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import stream

ACTIVATIONS = ("relu", "hard_tanh", "tanh")
# pattern alphabets: relu {0,1}, hard_tanh {-1,0,1}; tanh has no linear regions
PATTERN_ACTIVATIONS = ("relu", "hard_tanh")


class UnsupportedActivation(ValueError):
    """Raised when an operation needs linear regions but gets tanh."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture and initialization scales of a fully connected net."""

    input_dim: int
    hidden_widths: tuple[int, ...]
    output_dim: int
    activation: str
    sigma_w_sq: float
    sigma_b_sq: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        if len(self.hidden_widths) < 1 or any(w < 1 for w in self.hidden_widths):
            raise ValueError("need at least one hidden layer, every width >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.sigma_w_sq < 0 or self.sigma_b_sq < 0:
            raise ValueError("variance scales must be nonnegative")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    @property
    def depth(self) -> int:
        """Number of hidden layers n."""
        return len(self.hidden_widths)

    @property
    def total_hidden(self) -> int:
        return sum(self.hidden_widths)

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) for each of the depth+1 weight layers."""
        sizes = [self.input_dim, *self.hidden_widths, self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))

    def with_seed(self, seed: int) -> "NetworkSpec":
        return replace(self, seed=seed)

    def to_json(self) -> str:
        return json.dumps(
            {
                "input_dim": self.input_dim,
                "hidden_widths": list(self.hidden_widths),
                "output_dim": self.output_dim,
                "activation": self.activation,
                "sigma_w_sq": self.sigma_w_sq,
                "sigma_b_sq": self.sigma_b_sq,
                "seed": self.seed,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "NetworkSpec":
        d = json.loads(text)
        d["hidden_widths"] = tuple(d["hidden_widths"])
        return NetworkSpec(**d)


@dataclass(frozen=True)
class Network:
    """Sampled weights; layers[d] = (W, b) with W shaped (fan_out, fan_in)."""

    spec: NetworkSpec
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def num_weight_layers(self) -> int:
        return len(self.layers)

    def with_layers(self, layers) -> "Network":
        """Same spec, replaced weights (used by training and noise sweeps)."""
        frozen = []
        for (w_ref, b_ref), (w, b) in zip(self.layers, layers):
            w = np.ascontiguousarray(w, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if w.shape != w_ref.shape or b.shape != b_ref.shape:
                raise ValueError("replacement layer shapes do not match the spec")
            w.flags.writeable = False
            b.flags.writeable = False
            frozen.append((w, b))
        return Network(spec=self.spec, layers=tuple(frozen))


@dataclass(frozen=True)
class LayerTrace:
    """Per-layer record of one forward evaluation.

    pre_activations[d] = h(d) for d = 0..n (the last one is the output);
    activations[d] = z(d) with z(0) = x.
    """

    input: np.ndarray
    pre_activations: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]
    activation: str

    @property
    def output(self) -> np.ndarray:
        return self.pre_activations[-1]


@dataclass(frozen=True, eq=False)
class ActivationPattern:
    """Linear-region codes of every hidden neuron, flattened layer-major."""

    codes: np.ndarray = field(repr=False)
    activation: str = "relu"

    def __len__(self) -> int:
        return int(self.codes.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ActivationPattern):
            return NotImplemented
        return self.activation == other.activation and np.array_equal(self.codes, other.codes)

    def __hash__(self) -> int:
        return hash((self.activation, self.codes.tobytes()))


def phi(h: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(h, 0.0)
    if activation == "hard_tanh":
        return np.clip(h, -1.0, 1.0)
    if activation == "tanh":
        return np.tanh(h)
    raise ValueError(f"unknown activation {activation!r}")


def phi_grad(h: np.ndarray, activation: str) -> np.ndarray:
    """Derivative with the kink convention phi'(kink) = 0."""
    if activation == "relu":
        return (h > 0.0).astype(np.float64)
    if activation == "hard_tanh":
        return ((h > -1.0) & (h < 1.0)).astype(np.float64)
    if activation == "tanh":
        t = np.tanh(h)
        return 1.0 - t * t
    raise ValueError(f"unknown activation {activation!r}")


def init_network(spec: NetworkSpec) -> Network:
    """Sample a Network from the spec; pure function of (spec, seed)."""
    layers = []
    for d, (fan_in, fan_out) in enumerate(spec.layer_dims()):
        w_std = np.sqrt(spec.sigma_w_sq / fan_in)
        b_std = np.sqrt(spec.sigma_b_sq)
        w = stream(spec.seed, "init", d, "w").normal(0.0, 1.0, size=(fan_out, fan_in)) * w_std
        b = stream(spec.seed, "init", d, "b").normal(0.0, 1.0, size=fan_out) * b_std
        w.flags.writeable = False
        b.flags.writeable = False
        layers.append((w, b))
    return Network(spec=spec, layers=tuple(layers))


def forward(net: Network, x) -> LayerTrace:
    """Evaluate one input, recording every pre-activation and activation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.spec.input_dim,):
        raise ValueError(f"input shape {x.shape} does not match input_dim {net.spec.input_dim}")
    pres = []
    acts = [x]
    z = x
    last = net.num_weight_layers - 1
    for d, (w, b) in enumerate(net.layers):
        h = w @ z + b
        pres.append(h)
        if d < last:
            z = phi(h, net.spec.activation)
            acts.append(z)
    return LayerTrace(
        input=x,
        pre_activations=tuple(pres),
        activations=tuple(acts),
        activation=net.spec.activation,
    )


def forward_batch(net: Network, xs: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Batched forward; returns (pre_activations, activations) per layer.

    xs has shape (batch, input_dim); activations[0] is xs itself and the last
    pre-activation is the batched output.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.spec.input_dim:
        raise ValueError("batch must be 2-D with input_dim columns")
    pres: list[np.ndarray] = []
    acts: list[np.ndarray] = [xs]
    z = xs
    last = net.num_weight_layers - 1
    for d, (w, b) in enumerate(net.layers):
        h = z @ w.T + b
        pres.append(h)
        if d < last:
            z = phi(h, net.spec.activation)
            acts.append(z)
    return pres, acts


def hidden_codes(h: np.ndarray, activation: str) -> np.ndarray:
    """Linear-region code of pre-activation values, int8.

    relu: 1 iff h > 0 else 0. hard_tanh: -1 iff h <= -1, 0 iff -1 < h < 1,
    1 iff h >= 1. Exact-threshold inputs get these codes deterministically.
    """
    if activation == "relu":
        return (h > 0.0).astype(np.int8)
    if activation == "hard_tanh":
        return ((h >= 1.0).astype(np.int8) - (h <= -1.0).astype(np.int8)).astype(np.int8)
    raise UnsupportedActivation(f"no linear regions for activation {activation!r}")


def activation_pattern(trace: LayerTrace) -> ActivationPattern:
    """Codes of all hidden neurons for one traced input."""
    activation = trace.activation
    if activation not in PATTERN_ACTIVATIONS:
        raise UnsupportedActivation(f"activation patterns undefined for {activation!r}")
    hidden = trace.pre_activations[:-1]
    codes = np.concatenate([hidden_codes(h, activation) for h in hidden])
    codes.flags.writeable = False
    return ActivationPattern(codes=codes, activation=activation)


def network_pattern(net: Network, x) -> ActivationPattern:
    """Convenience wrapper: forward then pattern."""
    return activation_pattern(forward(net, x))


# ---------------------------------------------------------------------------
# serialization: flat little-endian binary container, magic "XPNL"
# ---------------------------------------------------------------------------

MAGIC = b"XPNL"
FORMAT_VERSION = 1
_ACT_CODE = {"relu": 0, "hard_tanh": 1, "tanh": 2}
_ACT_NAME = {v: k for k, v in _ACT_CODE.items()}


def save_network(net: Network, path) -> None:
    spec = net.spec
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIIB", FORMAT_VERSION, spec.input_dim, spec.depth, spec.output_dim, _ACT_CODE[spec.activation]))
        f.write(struct.pack("<ddQ", spec.sigma_w_sq, spec.sigma_b_sq, spec.seed))
        f.write(struct.pack(f"<{spec.depth}I", *spec.hidden_widths))
        for w, b in net.layers:
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_network(path) -> Network:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    off = 4
    version, input_dim, depth, output_dim, act = struct.unpack_from("<IIIIB", data, off)
    off += struct.calcsize("<IIIIB")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version}")
    sigma_w_sq, sigma_b_sq, seed = struct.unpack_from("<ddQ", data, off)
    off += struct.calcsize("<ddQ")
    widths = struct.unpack_from(f"<{depth}I", data, off)
    off += 4 * depth
    spec = NetworkSpec(
        input_dim=input_dim,
        hidden_widths=widths,
        output_dim=output_dim,
        activation=_ACT_NAME[act],
        sigma_w_sq=sigma_w_sq,
        sigma_b_sq=sigma_b_sq,
        seed=seed,
    )
    layers = []
    for fan_in, fan_out in spec.layer_dims():
        w = np.frombuffer(data, dtype="<f8", count=fan_out * fan_in, offset=off).reshape(fan_out, fan_in)
        off += 8 * fan_out * fan_in
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        layers.append((w.astype(np.float64), b.astype(np.float64)))
    if off != len(data):
        raise ValueError("container has trailing or missing bytes")
    net = Network(spec=spec, layers=tuple(layers))
    return net.with_layers(net.layers)
