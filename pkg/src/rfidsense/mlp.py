"""Feedforward ReLU/softmax classifier trained with Adam on cross-entropy.

Parameters for the whole network live in one contiguous float64 buffer; the
per-layer weight matrices (fan_in x fan_out) and bias vectors are views into
it, so an optimizer step is a single kernel call.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _core
from .domain import DomainError, FeatureMode, FeatureVector, MaterialClass
from .features import StandardizationParams, standardize_matrix

FORMAT_VERSION = 1
MAX_XENT = -math.log(1e-12)


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_layers: Tuple[int, ...]
    output_dim: int
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if min((self.input_dim, self.output_dim) + self.hidden_layers) < 1:
            raise DomainError("all layer widths must be >= 1")

    @property
    def widths(self) -> Tuple[int, ...]:
        return (self.input_dim,) + self.hidden_layers + (self.output_dim,)

    @property
    def param_count(self) -> int:
        w = self.widths
        return sum((w[i] + 1) * w[i + 1] for i in range(len(w) - 1))

    def with_seed(self, seed: int) -> "NetworkSpec":
        return NetworkSpec(self.input_dim, self.hidden_layers, self.output_dim, seed)


PRESETS: Dict[str, NetworkSpec] = {
    "single": NetworkSpec(2, (128, 64, 32, 16), 7),
    "onesec": NetworkSpec(4, (128, 64, 32), 7),
    "dist": NetworkSpec(5, (32, 16, 32), 4),
}

PRESET_MODES: Dict[str, FeatureMode] = {
    "single": FeatureMode.SinglePoint,
    "onesec": FeatureMode.WindowStats,
    "dist": FeatureMode.WindowStatsDist,
}


def _layer_views(spec: NetworkSpec, flat: np.ndarray):
    weights, biases = [], []
    pos = 0
    w = spec.widths
    for i in range(len(w) - 1):
        n = w[i] * w[i + 1]
        weights.append(flat[pos:pos + n].reshape(w[i], w[i + 1]))
        pos += n
        biases.append(flat[pos:pos + w[i + 1]])
        pos += w[i + 1]
    return weights, biases


class Network:
    def __init__(self, spec: NetworkSpec, flat: Optional[np.ndarray] = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.param_count)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (spec.param_count,):
            raise DomainError(f"expected {spec.param_count} parameters, got {flat.shape}")
        self.flat = flat
        self.weights, self.biases = _layer_views(spec, flat)

    @property
    def param_count(self) -> int:
        return self.flat.size

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Network":
        return Network(self.spec, self.flat.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.flat, other.flat)


class Gradients(Network):
    """Same layout as a Network; holds d(loss)/d(parameter)."""


def init_network(spec: NetworkSpec) -> Network:
    """He-uniform weights, zero biases."""
    rng = np.random.default_rng(spec.seed)
    net = Network(spec)
    for W in net.weights:
        bound = math.sqrt(6.0 / W.shape[0])
        W[...] = rng.uniform(-bound, bound, W.shape)
    return net


def _as_batch(net: Network, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        x = x.values
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise DomainError(f"input has {x.shape[-1]} features, network expects {net.spec.input_dim}")
    return x


def _forward_pass(net: Network, x: np.ndarray):
    acts = [x]
    a = x
    last = net.n_layers - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W + b
        a = np.maximum(z, 0.0) if i < last else z
        acts.append(a)
    return acts


def logits(net: Network, x) -> np.ndarray:
    x = _as_batch(net, x)
    return _forward_pass(net, x)[-1]


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: Network, x) -> np.ndarray:
    """Class probabilities; a single input gives a 1-D vector, a batch a 2-D array."""
    single = np.ndim(x.values if isinstance(x, FeatureVector) else x) == 1
    p = softmax(logits(net, x))
    return p[0] if single else p


def cross_entropy(pred, label: int) -> float:
    p = float(np.asarray(pred, dtype=np.float64)[label])
    return -math.log(max(p, 1e-12))


def cross_entropy_from_logits(z, label: int) -> float:
    z = np.asarray(z, dtype=np.float64)
    mx = z.max()
    lse = mx + math.log(float(np.exp(z - mx).sum()))
    return min(lse - float(z[label]), MAX_XENT)


def loss_and_grads(net: Network, x, labels) -> Tuple[float, Gradients]:
    """Mean cross-entropy over the batch and its gradient."""
    x = _as_batch(net, x)
    labels = np.ascontiguousarray(np.atleast_1d(labels), dtype=np.int64)
    if labels.shape[0] != x.shape[0]:
        raise DomainError("label count does not match batch size")
    if labels.min() < 0 or labels.max() >= net.spec.output_dim:
        raise DomainError("label outside network output range")
    acts = _forward_pass(net, x)
    _, loss, dz = _core.softmax_xent(np.ascontiguousarray(acts[-1]), labels)
    n = x.shape[0]
    dz = dz / n
    grads = Gradients(net.spec)
    for i in range(net.n_layers - 1, -1, -1):
        a_prev = acts[i]
        grads.weights[i][...] = a_prev.T @ dz
        grads.biases[i][...] = dz.sum(axis=0)
        if i > 0:
            # relu'(z) > 0 exactly where the stored activation is positive
            dz = (dz @ net.weights[i].T) * (a_prev > 0.0)
    return float(loss.mean()), grads


def backward(net: Network, x, label: int) -> Gradients:
    return loss_and_grads(net, x, [label])[1]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, net: Network) -> "AdamState":
        return cls(np.zeros(net.param_count), np.zeros(net.param_count), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.t)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    learning_rate: float = 0.001
    max_epochs: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 10
    min_delta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise DomainError("batch_size must be >= 1")
        if self.patience < 1:
            raise DomainError("patience must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")

    @classmethod
    def from_dict(cls, data) -> "TrainConfig":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


def _adam_inplace(state: AdamState, net: Network, grads: Network, lr: float,
                  beta1: float, beta2: float, eps: float) -> None:
    state.t += 1
    _core.adam_update(net.flat, grads.flat, state.m, state.v, float(lr), beta1, beta2, eps,
                      1.0 - beta1 ** state.t, 1.0 - beta2 ** state.t)


def adam_step(state: AdamState, net: Network, grads: Network, lr: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> Tuple[Network, AdamState]:
    if grads.flat.shape != net.flat.shape or state.m.shape != net.flat.shape:
        raise DomainError("optimizer state, gradients and network shapes differ")
    new_net, new_state = net.copy(), state.copy()
    _adam_inplace(new_state, new_net, grads, lr, beta1, beta2, eps)
    return new_net, new_state


@dataclass
class History:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    train_acc: List[float] = field(default_factory=list)
    val_acc: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "train_acc": self.train_acc,
            "val_acc": self.val_acc,
            "best_epoch": self.best_epoch,
            "epochs": self.epochs,
            "stopped_early": self.stopped_early,
        }


def evaluate_loss(net: Network, x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Mean loss and accuracy over a full set, without gradients."""
    z = _forward_pass(net, x)[-1]
    probs, loss, _ = _core.softmax_xent(np.ascontiguousarray(z), y)
    acc = float(np.mean(np.argmax(probs, axis=1) == y))
    return float(loss.mean()), acc


def train(net: Network, train_set, val_set, cfg: TrainConfig = TrainConfig()) -> Tuple[Network, History]:
    """Mini-batch Adam with per-epoch shuffling and early stopping on validation loss.

    ``train_set``/``val_set`` are ``(x, y)`` pairs with ``y`` holding output indices.
    Returns a copy of the network at the best validation epoch.
    """
    xtr, ytr = train_set
    xva, yva = val_set
    xtr = _as_batch(net, xtr)
    xva = _as_batch(net, xva)
    ytr = np.ascontiguousarray(ytr, dtype=np.int64)
    yva = np.ascontiguousarray(yva, dtype=np.int64)
    if xtr.shape[0] == 0 or xva.shape[0] == 0:
        raise DomainError("training and validation sets must be non-empty")
    if ytr.shape[0] != xtr.shape[0] or yva.shape[0] != xva.shape[0]:
        raise DomainError("feature and label counts differ")

    work = net.copy()
    state = AdamState.zeros(work)
    rng = np.random.default_rng(cfg.seed)
    hist = History()
    best = work.copy()
    best_val = math.inf
    wait = 0
    n = xtr.shape[0]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            _, grads = loss_and_grads(work, xtr[idx], ytr[idx])
            _adam_inplace(state, work, grads, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        tl, ta = evaluate_loss(work, xtr, ytr)
        vl, va = evaluate_loss(work, xva, yva)
        hist.train_loss.append(tl)
        hist.train_acc.append(ta)
        hist.val_loss.append(vl)
        hist.val_acc.append(va)
        if vl < best_val - cfg.min_delta:
            best_val = vl
            best = work.copy()
            hist.best_epoch = epoch + 1
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                hist.stopped_early = True
                break
    return best, hist


def predict(net: Network, features) -> Tuple[int, np.ndarray]:
    p = forward(net, features)
    if p.ndim != 1:
        raise DomainError("predict takes one feature vector; use predict_batch")
    return int(np.argmax(p)), p


def predict_batch(net: Network, x) -> Tuple[np.ndarray, np.ndarray]:
    p = softmax(logits(net, x))
    return np.argmax(p, axis=1), p


@dataclass
class ClassifierModel:
    """A trained network plus everything needed to apply it to raw features."""

    network: Network
    standardization: StandardizationParams
    classes: Tuple[MaterialClass, ...]
    feature_mode: FeatureMode
    preset: str = ""
    circular_phase: bool = True

    def __post_init__(self) -> None:
        self.classes = tuple(self.classes)
        if len(self.classes) != self.network.spec.output_dim:
            raise DomainError("class list length must equal network output_dim")
        if self.feature_mode.length != self.network.spec.input_dim:
            raise DomainError("feature mode does not match network input_dim")

    def label_to_output(self, labels: Sequence[MaterialClass]) -> np.ndarray:
        pos = {c: i for i, c in enumerate(self.classes)}
        try:
            return np.array([pos[c] for c in labels], dtype=np.int64)
        except KeyError as exc:
            raise DomainError(f"class {exc.args[0]} not in model class list") from None

    def prepare(self, x) -> np.ndarray:
        x = np.asarray(x.values if isinstance(x, FeatureVector) else x, dtype=np.float64)
        return standardize_matrix(self.standardization, x)

    def predict_proba(self, x) -> np.ndarray:
        return forward(self.network, self.prepare(x))

    def predict(self, f: FeatureVector) -> Tuple[MaterialClass, float, np.ndarray]:
        k, p = predict(self.network, self.prepare(f))
        return self.classes[k], float(p[k]), p


def save_model(model: ClassifierModel, path: Union[str, Path]) -> None:
    spec = model.network.spec
    doc = {
        "format": "rfidsense-mlp",
        "format_version": FORMAT_VERSION,
        "preset": model.preset,
        "feature_mode": model.feature_mode.value,
        "phase_stats": "circular" if model.circular_phase else "naive",
        "classes": [c.name for c in model.classes],
        "spec": {
            "input_dim": spec.input_dim,
            "hidden_layers": list(spec.hidden_layers),
            "output_dim": spec.output_dim,
            "seed": spec.seed,
        },
        "activation": {"hidden": "relu", "output": "softmax"},
        "layers": [
            {"shape": list(W.shape), "weights": W.reshape(-1).tolist(), "biases": b.tolist()}
            for W, b in zip(model.network.weights, model.network.biases)
        ],
        "standardization": {
            "mean": model.standardization.mean.tolist(),
            "std": model.standardization.std.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path: Union[str, Path]) -> ClassifierModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "rfidsense-mlp":
        raise DomainError(f"{path}: not a model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DomainError(f"{path}: unsupported model format version {doc.get('format_version')}")
    s = doc["spec"]
    spec = NetworkSpec(s["input_dim"], tuple(s["hidden_layers"]), s["output_dim"], s.get("seed", 0))
    net = Network(spec)
    for layer, W, b in zip(doc["layers"], net.weights, net.biases):
        if tuple(layer["shape"]) != W.shape:
            raise DomainError(f"{path}: layer shape {layer['shape']} does not match spec")
        W[...] = np.array(layer["weights"], dtype=np.float64).reshape(W.shape)
        b[...] = np.array(layer["biases"], dtype=np.float64)
    mode = FeatureMode.parse(doc["feature_mode"])
    std = StandardizationParams(
        np.array(doc["standardization"]["mean"], dtype=np.float64),
        np.array(doc["standardization"]["std"], dtype=np.float64),
        mode,
    )
    classes = tuple(MaterialClass.parse(c) for c in doc["classes"])
    circular = doc.get("phase_stats", "circular") == "circular"
    return ClassifierModel(net, std, classes, mode, doc.get("preset", ""), circular)
