"""Deep sigmoid MLP ("DELM") trained by per-layer error signals and additive updates.

Notation used in the code:

* ``weights[l]`` has shape ``(fan_in, fan_out)``; the last entry connects the
  last hidden layer to the output layer.
* error signals follow the convention ``signal = (target - out) * out * (1 - out)``
  at the output, so a weight delta ``outer(input_activation, signal)`` already
  points downhill and updates are *added*.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

SERIAL_VERSION = 1


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    hidden_widths: tuple[int, ...] = (20, 20, 20, 20, 20, 20)
    output_dim: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.hidden_widths:
            raise ShapeError("need at least one hidden layer")
        if min((self.input_dim, self.output_dim) + self.hidden_widths) < 1:
            raise ShapeError(f"all layer widths must be >= 1: {self.layer_sizes}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    def to_dict(self):
        return {"input_dim": self.input_dim, "hidden_widths": list(self.hidden_widths),
                "output_dim": self.output_dim, "seed": self.seed}


@dataclass
class NetworkWeights:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: NetworkConfig | None = None

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("weights/biases layer count mismatch")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {l}: weight {w.shape} incompatible with bias {b.shape}")
            if l and self.weights[l - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {l}: fan_in {w.shape[0]} != previous fan_out {self.weights[l - 1].shape[1]}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def copy(self) -> "NetworkWeights":
        return NetworkWeights([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.config)

    def arrays(self) -> list[np.ndarray]:
        """Flat list in canonical order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays, config=None) -> "NetworkWeights":
        return cls(list(arrays[0::2]), list(arrays[1::2]), config)

    def same_shape(self, other: "NetworkWeights") -> bool:
        return [a.shape for a in self.arrays()] == [a.shape for a in other.arrays()]

    def equals(self, other: "NetworkWeights") -> bool:
        return self.same_shape(other) and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    # -- serialisation -----------------------------------------------------

    def canonical_bytes(self) -> bytes:
        """Byte-stable binary record: version, layer sizes, big-endian float64 row-major values."""
        sizes = self.layer_sizes
        head = struct.pack(">4sII", b"DELM", SERIAL_VERSION, len(sizes)) + struct.pack(f">{len(sizes)}I", *sizes)
        body = b"".join(np.ascontiguousarray(a, dtype=">f8").tobytes() for a in self.arrays())
        return head + body

    def digest(self) -> bytes:
        return hashlib.sha256(self.canonical_bytes()).digest()

    def to_dict(self) -> dict:
        return {
            "version": SERIAL_VERSION,
            "config": self.config.to_dict() if self.config else None,
            "layer_sizes": list(self.layer_sizes),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkWeights":
        if d.get("version") != SERIAL_VERSION:
            raise ValueError(f"unsupported weights version {d.get('version')!r}")
        sizes = d["layer_sizes"]
        ws = [np.array(v, dtype=float).reshape(sizes[l], sizes[l + 1]) for l, v in enumerate(d["weights"])]
        bs = [np.array(v, dtype=float) for v in d["biases"]]
        cfg = d.get("config")
        cfg = NetworkConfig(cfg["input_dim"], tuple(cfg["hidden_widths"]), cfg["output_dim"], cfg["seed"]) if cfg else None
        return cls(ws, bs, cfg)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


@dataclass
class Activations:
    """``layers[0]`` is the input, ``layers[1:-1]`` hidden layers, ``layers[-1]`` the output."""

    layers: list[np.ndarray]

    @property
    def input(self) -> np.ndarray:
        return self.layers[0]

    @property
    def hidden(self) -> list[np.ndarray]:
        return self.layers[1:-1]

    @property
    def output(self) -> np.ndarray:
        return self.layers[-1]


@dataclass
class Gradients:
    signals: list[np.ndarray]          # per non-input layer, output layer last
    weight_deltas: list[np.ndarray]
    bias_deltas: list[np.ndarray]

    @property
    def output_signal(self):
        return self.signals[-1]


@dataclass(frozen=True)
class TrainingHyper:
    learning_rate: float = 0.1
    batch_size: int = 1
    max_epochs: int = 100
    loss_tolerance: float = 0.0
    shuffle_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0 or self.loss_tolerance < 0:
            raise ValueError("max_epochs and loss_tolerance must be non-negative")

    def to_dict(self):
        return {"learning_rate": self.learning_rate, "batch_size": self.batch_size, "max_epochs": self.max_epochs,
                "loss_tolerance": self.loss_tolerance, "shuffle_seed": self.shuffle_seed}


def sigmoid(z):
    # |z| <= 36 keeps the result strictly inside (0, 1) in float64
    z = np.clip(np.asarray(z, dtype=float), -36.0, 36.0)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_network(config: NetworkConfig) -> NetworkWeights:
    rng = np.random.default_rng(config.seed)
    sizes = config.layer_sizes
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return NetworkWeights(ws, bs, config)


def forward(w: NetworkWeights, x) -> Activations:
    """Propagate one input vector (or a batch, one row per sample) through the network."""
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != w.input_dim:
        raise ShapeError(f"input of shape {x.shape} does not fit a network with {w.input_dim} inputs")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    layers = [x]
    for W, b in zip(w.weights, w.biases):
        layers.append(sigmoid(b + layers[-1] @ W))
    return Activations(layers)


def compute_loss(target, output) -> float:
    """Half squared error, summed over outputs (and over rows for a batch)."""
    target, output = np.asarray(target, dtype=float), np.asarray(output, dtype=float)
    if target.shape != output.shape:
        raise ShapeError(f"target {target.shape} vs output {output.shape}")
    return 0.5 * float(np.sum((target - output) ** 2))


def backward(w: NetworkWeights, a: Activations, target) -> Gradients:
    """Error signals and descent-direction deltas; batch inputs give batch-mean deltas."""
    target = np.asarray(target, dtype=float)
    if len(a.layers) != len(w.weights) + 1:
        raise ShapeError("activations do not match network depth")
    for l, W in enumerate(w.weights):
        if a.layers[l].shape[-1] != W.shape[0] or a.layers[l + 1].shape[-1] != W.shape[1]:
            raise ShapeError(f"activation shapes do not match layer {l}")
    out = a.output
    if target.shape != out.shape:
        raise ShapeError(f"target {target.shape} vs output {out.shape}")

    batched = out.ndim == 2
    n = out.shape[0] if batched else 1
    signal = (target - out) * out * (1.0 - out)
    signals = [signal]
    for l in range(len(w.weights) - 1, 0, -1):
        phi = a.layers[l]
        signal = (signal @ w.weights[l].T) * phi * (1.0 - phi)
        signals.append(signal)
    signals.reverse()

    wd, bd = [], []
    for l, sig in enumerate(signals):
        inp = a.layers[l]
        if batched:
            wd.append(inp.T @ sig / n)
            bd.append(sig.mean(axis=0))
        else:
            wd.append(np.outer(inp, sig))
            bd.append(sig.copy())
    return Gradients(signals, wd, bd)


def apply_update(w: NetworkWeights, g: Gradients, learning_rate: float) -> NetworkWeights:
    if len(g.weight_deltas) != len(w.weights):
        raise ShapeError("gradient depth does not match network")
    ws, bs = [], []
    for W, b, dW, db in zip(w.weights, w.biases, g.weight_deltas, g.bias_deltas):
        if dW.shape != W.shape or db.shape != b.shape:
            raise ShapeError(f"delta {dW.shape}/{db.shape} vs weight {W.shape}/{b.shape}")
        ws.append(W + learning_rate * dW)
        bs.append(b + learning_rate * db)
    return NetworkWeights(ws, bs, w.config)


def _targets(labels: np.ndarray, output_dim: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=float)
    return labels.reshape(-1, 1) if labels.ndim == 1 and output_dim == 1 else labels.reshape(len(labels), -1)


def train_client(w: NetworkWeights, train, hyper: TrainingHyper) -> tuple[NetworkWeights, list[float]]:
    """Mini-batch training on a Dataset-like object (``features``, ``labels``).

    Returns the trained weights and the mean per-sample loss of each epoch
    (measured on the forward passes that produced that epoch's updates).
    """
    X = np.asarray(train.features, dtype=float)
    if len(X) == 0:
        raise ValueError("cannot train on an empty dataset")
    if X.shape[1] != w.input_dim:
        raise ShapeError(f"dataset has {X.shape[1]} features, network expects {w.input_dim}")
    Y = _targets(train.labels, w.layer_sizes[-1])
    rng = np.random.default_rng(hyper.shuffle_seed)
    history: list[float] = []
    w = w.copy()
    S = hyper.batch_size
    for _ in range(hyper.max_epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), S):
            idx = order[start:start + S]
            act = forward(w, X[idx])
            total += compute_loss(Y[idx], act.output)
            w = apply_update(w, backward(w, act, Y[idx]), hyper.learning_rate)
        history.append(total / len(X))
        if history[-1] <= hyper.loss_tolerance:
            break
    return w, history


def predict_scores(w: NetworkWeights, X) -> np.ndarray:
    """First output unit for every row."""
    return forward(w, np.atleast_2d(np.asarray(X, dtype=float))).output[:, 0]


def predict(w: NetworkWeights, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_scores(w, X) >= threshold).astype(np.int64)
