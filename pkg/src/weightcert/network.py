"""Bias-free dense ReLU networks, forward evaluation, and the margin function.

A network is an ordered list of weight matrices W^1 ... W^L with shapes
chaining d -> d_1 -> ... -> d_L (no bias terms anywhere).  ReLU is applied
after every layer except the last, so the whole map is positively homogeneous
in the input.  The pairwise margin f^{ij} = [f]_i - [f]_j and the margin
M(f(x), y) = [f]_y - max_{y' != y} [f]_{y'} follow that sign convention
throughout the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError

_ACTIVATIONS = ("relu",)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: layer_dims = (d, d_1, ..., d_L), ReLU activation."""

    layer_dims: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.num_layers < 2:
            raise ValueError("need at least 2 layers (L >= 2)")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError("all layer dimensions must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]


@dataclass
class Network:
    spec: NetworkSpec
    weights: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        dims = self.spec.layer_dims
        if len(self.weights) != self.spec.num_layers:
            raise DimensionError(
                f"expected {self.spec.num_layers} weight matrices, got {len(self.weights)}"
            )
        ws = []
        for k, w in enumerate(self.weights, start=1):
            w = np.asarray(w, dtype=np.float64)
            if w.shape != (dims[k], dims[k - 1]):
                raise DimensionError(
                    f"layer {k}: expected shape {(dims[k], dims[k - 1])}, got {w.shape}"
                )
            if not np.all(np.isfinite(w)):
                raise ValueError(f"layer {k}: non-finite weight entries")
            ws.append(w)
        self.weights = ws

    @property
    def num_layers(self) -> int:
        return self.spec.num_layers

    def weight(self, k: int) -> np.ndarray:
        """1-based layer access: weight(1) = W^1, ..., weight(L) = W^L."""
        return self.weights[k - 1]

    def copy(self) -> "Network":
        return Network(self.spec, [w.copy() for w in self.weights])


def initialize(spec: NetworkSpec, seed: int) -> Network:
    """Uniform [-a, a] init with a = sqrt(6 / (d_in + d_out)), seeded."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims
    weights = []
    for k in range(1, spec.num_layers + 1):
        d_out, d_in = dims[k], dims[k - 1]
        a = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-a, a, size=(d_out, d_in)))
    return Network(spec, weights)


@dataclass
class ForwardTrace:
    logits: np.ndarray
    layer_outputs: list[np.ndarray]  # z^1 ... z^{L-1}, post-activation


def forward(net: Network, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.spec.input_dim,):
        raise DimensionError(
            f"input dim {x.shape} does not match network input {net.spec.input_dim}"
        )
    z = x
    outputs = []
    for w in net.weights[:-1]:
        z = np.maximum(w @ z, 0.0)
        outputs.append(z)
    logits = net.weights[-1] @ z
    return ForwardTrace(logits=logits, layer_outputs=outputs)


def forward_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs (rows of xs)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.spec.input_dim:
        raise DimensionError(f"bad batch shape {xs.shape}")
    z = xs
    for w in net.weights[:-1]:
        z = np.maximum(z @ w.T, 0.0)
    return z @ net.weights[-1].T


def margin(logits, y: int) -> float:
    """M(f(x), y) = [f]_y - max_{y' != y} [f]_{y'}."""
    logits = np.asarray(logits, dtype=np.float64)
    k = logits.shape[0]
    if k < 2:
        raise ValueError("margin needs at least 2 classes")
    if not 0 <= y < k:
        raise ValueError(f"label {y} out of range [0, {k})")
    competitors = np.delete(logits, y)
    return float(logits[y] - np.max(competitors))


def pairwise_margin(logits, i: int, j: int) -> float:
    """f^{ij} = [f]_i - [f]_j."""
    logits = np.asarray(logits, dtype=np.float64)
    return float(logits[i] - logits[j])


def predict(net: Network, x) -> int:
    """Argmax label; ties broken by lowest index."""
    return int(np.argmax(forward(net, x).logits))


def predict_batch(net: Network, xs: np.ndarray) -> np.ndarray:
    return np.argmax(forward_batch(net, xs), axis=1)


def accuracy(net: Network, dataset) -> float:
    """Fraction of correct predictions over a Dataset."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    preds = predict_batch(net, dataset.inputs)
    return float(np.mean(preds == dataset.labels))


# -- JSON serialization (field names fixed for the CLI round trip) -----------

def to_json_dict(net: Network) -> dict:
    return {
        "layer_dims": list(net.spec.layer_dims),
        "activation": net.spec.activation,
        "weights": [w.reshape(-1).tolist() for w in net.weights],
    }


def from_json_dict(doc: dict) -> Network:
    spec = NetworkSpec(tuple(doc["layer_dims"]), doc["activation"])
    dims = spec.layer_dims
    weights = []
    for k, flat in enumerate(doc["weights"], start=1):
        weights.append(
            np.asarray(flat, dtype=np.float64).reshape(dims[k], dims[k - 1])
        )
    return Network(spec, weights)


def save_network(net: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(net), fh)


def load_network(path) -> Network:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
