"""Feed-forward acoustic model: spliced features in, pdf posteriors out.

Hidden layers use relu/sigmoid/tanh; the final layer is always softmax over
pdfs. Weights are float32 end to end; the backward pass is dtype-generic so a
float64 clone can be checked against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, TrainingError

MODEL_MAGIC = b"RAMDEC01"
ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax")
_ACT_CODE = {name: i for i, name in enumerate(ACTIVATIONS)}


@dataclass
class Layer:
    weight: np.ndarray  # (out_dim, in_dim), row-major
    bias: np.ndarray  # (out_dim,)
    activation: str

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass
class MlpModel:
    input_dim: int
    layers: list[Layer] = field(default_factory=list)

    def __post_init__(self) -> None:
        validate_model(self)

    @property
    def num_pdfs(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")


@dataclass
class EpochReport:
    epoch: int
    mean_cross_entropy: float
    frame_accuracy: float


def validate_model(model: MlpModel) -> None:
    if model.input_dim < 1:
        raise ModelError(f"input_dim must be positive, got {model.input_dim}")
    if not model.layers:
        raise ModelError("model must have at least one layer")
    prev = model.input_dim
    for i, layer in enumerate(model.layers):
        if layer.activation not in ACTIVATIONS:
            raise ModelError(f"layer {i}: unknown activation {layer.activation!r}")
        last = i == len(model.layers) - 1
        if last and layer.activation != "softmax":
            raise ModelError(f"final layer must be softmax, got {layer.activation!r}")
        if not last and layer.activation == "softmax":
            raise ModelError(f"layer {i}: softmax is only allowed on the final layer")
        if layer.weight.ndim != 2 or layer.bias.ndim != 1:
            raise ModelError(f"layer {i}: weight must be 2-D and bias 1-D")
        if layer.in_dim != prev:
            raise ModelError(f"layer {i}: in_dim {layer.in_dim} does not chain with previous out_dim {prev}")
        if layer.bias.shape[0] != layer.out_dim:
            raise ModelError(f"layer {i}: bias length {layer.bias.shape[0]} != out_dim {layer.out_dim}")
        if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
            raise ModelError(f"layer {i}: non-finite parameters")
        prev = layer.out_dim


def init_model(input_dim: int, layer_dims: list[int], seed: int = 0) -> MlpModel:
    """Uniform(-a, a) weights with a = sqrt(6 / (in + out)) per layer, zero biases.

    Hidden layers use relu; the final layer is softmax. Deterministic for a
    fixed seed.
    """
    if not layer_dims:
        raise ModelError("layer_dims must not be empty")
    if any(d < 1 for d in layer_dims):
        raise ModelError(f"layer dimensions must be positive, got {layer_dims}")
    rng = np.random.default_rng(seed)
    layers = []
    prev = input_dim
    for i, out in enumerate(layer_dims):
        a = np.sqrt(6.0 / (prev + out))
        weight = rng.uniform(-a, a, size=(out, prev)).astype(np.float32)
        bias = np.zeros(out, dtype=np.float32)
        activation = "softmax" if i == len(layer_dims) - 1 else "relu"
        layers.append(Layer(weight, bias, activation))
        prev = out
    return MlpModel(input_dim, layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction; rows sum to 1 within float noise."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    # float64 normalizer keeps row sums within 1e-6 even for wide output layers
    return (e / e.sum(axis=1, keepdims=True, dtype=np.float64)).astype(logits.dtype)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0)
    if activation == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if activation == "tanh":
        return np.tanh(z)
    return softmax(z)


def _forward_cached(model: MlpModel, batch: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first; used by both forward and backward."""
    if batch.ndim != 2 or batch.shape[1] != model.input_dim:
        raise ModelError(f"batch shape {batch.shape} does not match input_dim {model.input_dim}")
    acts = [batch]
    for layer in model.layers:
        z = acts[-1] @ layer.weight.T + layer.bias
        acts.append(_activate(z, layer.activation))
    return acts


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Posterior matrix for a batch: one probability row per input row."""
    batch = np.asarray(batch)
    if batch.dtype not in (np.float32, np.float64):
        batch = batch.astype(np.float32)
    return _forward_cached(model, batch)[-1]


def cross_entropy_grads(
    model: MlpModel, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, int, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy, correct-prediction count, and per-layer (dW, db)."""
    acts = _forward_cached(model, batch)
    probs = acts[-1]
    n = batch.shape[0]
    picked = probs[np.arange(n), labels]
    loss = float(-np.log(np.maximum(picked, 1e-30)).sum(dtype=np.float64) / n)
    correct = int((probs.argmax(axis=1) == labels).sum())

    delta = probs.copy()
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(model.layers)  # type: ignore[list-item]
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i > 0:
            upstream = delta @ layer.weight
            a = acts[i]
            prev_act = model.layers[i - 1].activation
            if prev_act == "relu":
                delta = upstream * (a > 0)
            elif prev_act == "sigmoid":
                delta = upstream * a * (1.0 - a)
            else:  # tanh
                delta = upstream * (1.0 - a * a)
    return loss, correct, grads


def train_sgd(
    model: MlpModel,
    shards: list[tuple[np.ndarray, np.ndarray]],
    cfg: TrainConfig,
) -> tuple[MlpModel, list[EpochReport]]:
    """Minibatch SGD on mean cross-entropy; shuffles per epoch from cfg.seed.

    Mutates and returns the model, together with per-epoch loss/accuracy.
    """
    xs = [x for x, _ in shards if x.shape[0]]
    ys = [y for _, y in shards if y.shape[0]]
    if not xs:
        raise TrainingError("no training frames")
    x = np.concatenate(xs, axis=0).astype(np.float32, copy=False)
    y = np.concatenate(ys, axis=0).astype(np.int64, copy=False)
    if x.shape[1] != model.input_dim:
        raise ModelError(f"training inputs have dim {x.shape[1]}, model expects {model.input_dim}")
    if y.size and int(y.max()) >= model.num_pdfs:
        raise ModelError(f"label {int(y.max())} out of range for {model.num_pdfs} pdfs")

    n = x.shape[0]
    rng = np.random.default_rng(cfg.seed)
    reports = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            loss, batch_correct, grads = cross_entropy_grads(model, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}")
            loss_sum += loss * idx.shape[0]
            correct += batch_correct
            for layer, (dw, db) in zip(model.layers, grads):
                layer.weight -= (cfg.learning_rate * dw).astype(layer.weight.dtype)
                layer.bias -= (cfg.learning_rate * db).astype(layer.bias.dtype)
        reports.append(EpochReport(epoch, loss_sum / n, correct / n))
    return model, reports


def save_model(model: MlpModel, dest) -> None:
    """Serialize to the RAMDEC01 container (see module docs for the layout)."""
    validate_model(model)
    with open(dest, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<II", len(model.layers), model.input_dim))
        for layer in model.layers:
            f.write(struct.pack("<IB", layer.out_dim, _ACT_CODE[layer.activation]))
            f.write(np.ascontiguousarray(layer.weight, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    at = f.tell()
    buf = f.read(n)
    if len(buf) != n:
        raise ModelError(f"truncated model file at byte {at}: expected {n} bytes of {what}")
    return buf


def load_model(source) -> MlpModel:
    """Parse and validate a RAMDEC01 model file."""
    with open(source, "rb") as f:
        magic = _read_exact(f, 8, "magic")
        if magic != MODEL_MAGIC:
            raise ModelError(f"unsupported model magic {magic!r}, expected {MODEL_MAGIC.decode()!r}")
        num_layers, input_dim = struct.unpack("<II", _read_exact(f, 8, "header"))
        if num_layers < 1:
            raise ModelError("model file declares zero layers")
        if input_dim < 1:
            raise ModelError(f"model file declares input_dim {input_dim}")
        layers = []
        prev = input_dim
        for i in range(num_layers):
            out_dim, act_code = struct.unpack("<IB", _read_exact(f, 5, f"layer {i} header"))
            if out_dim < 1:
                raise ModelError(f"layer {i}: out_dim {out_dim} invalid")
            if act_code >= len(ACTIVATIONS):
                raise ModelError(f"layer {i}: unknown activation code {act_code}")
            weight = np.frombuffer(
                _read_exact(f, out_dim * prev * 4, f"layer {i} weights"), dtype="<f4"
            ).reshape(out_dim, prev).copy()
            bias = np.frombuffer(_read_exact(f, out_dim * 4, f"layer {i} biases"), dtype="<f4").copy()
            layers.append(Layer(weight, bias, ACTIVATIONS[act_code]))
            prev = out_dim
        trailing = f.read(1)
        if trailing:
            raise ModelError(f"trailing bytes after model payload at byte {f.tell() - 1}")
    return MlpModel(int(input_dim), layers)


def models_equal(a: MlpModel, b: MlpModel) -> bool:
    if a.input_dim != b.input_dim or len(a.layers) != len(b.layers):
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.activation != lb.activation:
            return False
        if not (np.array_equal(la.weight, lb.weight) and np.array_equal(la.bias, lb.bias)):
            return False
    return True
