"""Small MLP, local SGD training, and the parameter-vector utilities used
by clients: flattening with a layer index, last-layer views, L2
normalization, and round-delta clipping."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import DataError, NormalizationError, ParameterError, ShapeError


@dataclass(frozen=True)
class ModelArch:
    layer_dims: Tuple[int, ...] = (784, 64, 10)
    activation: str = "relu"
    loss: str = "cross_entropy"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2:
            raise ParameterError("need at least input and output dims")
        if any(d < 1 for d in dims):
            raise ParameterError("layer dims must be positive")
        if self.activation != "relu":
            raise ParameterError(f"unsupported activation {self.activation}")
        if self.loss != "cross_entropy":
            raise ParameterError(f"unsupported loss {self.loss}")

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def param_count(self) -> int:
        return sum(
            i * o + o
            for i, o in zip(self.layer_dims[:-1], self.layer_dims[1:])
        )


@dataclass
class ParamVector:
    """Flat parameters plus (offset, length, name) spans.

    Per linear layer the bias span precedes the weight span, so the final
    span is always the last layer's weight matrix.
    """

    values: np.ndarray
    layer_index: List[Tuple[int, int, str]]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        total = sum(length for _, length, _ in self.layer_index)
        if total != self.values.size:
            raise ShapeError("layer index does not cover the value vector")

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), list(self.layer_index))

    def span(self, name: str) -> np.ndarray:
        for off, length, n in self.layer_index:
            if n == name:
                return self.values[off:off + length]
        raise ShapeError(f"no span named {name!r}")


@dataclass
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 64
    local_epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ParameterError("lr must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.local_epochs < 1:
            raise ParameterError("local_epochs must be >= 1")


def _index_for(arch: ModelArch) -> List[Tuple[int, int, str]]:
    index = []
    off = 0
    for li, (fan_in, fan_out) in enumerate(
        zip(arch.layer_dims[:-1], arch.layer_dims[1:])
    ):
        index.append((off, fan_out, f"fc{li}.bias"))
        off += fan_out
        index.append((off, fan_in * fan_out, f"fc{li}.weight"))
        off += fan_in * fan_out
    return index


def init_model(arch: ModelArch, seed: int) -> ParamVector:
    """Uniform(-a, a) weights with a = sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    values = np.zeros(arch.param_count)
    index = _index_for(arch)
    pv = ParamVector(values, index)
    for li, (fan_in, fan_out) in enumerate(
        zip(arch.layer_dims[:-1], arch.layer_dims[1:])
    ):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, fan_in * fan_out)
        pv.span(f"fc{li}.weight")[:] = w
    return pv


def _unpack(pv: ParamVector, arch: ModelArch):
    layers = []
    for li, (fan_in, fan_out) in enumerate(
        zip(arch.layer_dims[:-1], arch.layer_dims[1:])
    ):
        w = pv.span(f"fc{li}.weight").reshape(fan_out, fan_in)
        b = pv.span(f"fc{li}.bias")
        layers.append((w, b))
    return layers


def _forward(layers, x):
    """Returns activations per layer; final entry is the logits."""
    acts = [x]
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    return acts

def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(pv: ParamVector, arch: ModelArch, x, y):
    """Mean cross-entropy over a batch and the gradient as a flat vector."""
    layers = _unpack(pv, arch)
    acts = _forward(layers, x)
    logits = acts[-1]
    probs = _softmax(logits)
    n = x.shape[0]
    logp = np.log(np.clip(probs[np.arange(n), y], 1e-300, None))
    loss = -float(logp.mean())

    grad = ParamVector(np.zeros_like(pv.values), list(pv.layer_index))
    glayers = _unpack(grad, arch)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        gw, gb = glayers[i]
        gw[:] += delta.T @ acts[i]
        gb[:] += delta.sum(axis=0)
        if i > 0:
            delta = (delta @ w) * (acts[i] > 0)
    return loss, grad.values


def train_local(start: ParamVector, data, cfg: TrainConfig) -> ParamVector:
    """Mini-batch SGD with momentum (v = mu*v + g; w -= lr*v).

    Deterministic: shuffle order is a pure function of cfg.seed.
    """
    if len(data.labels) == 0:
        raise DataError("cannot train on an empty dataset")
    arch = _arch_of(start)
    pv = start.copy()
    rng = np.random.default_rng(cfg.seed)
    velocity = np.zeros_like(pv.values)
    n = len(data.labels)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            _, g = loss_and_grad(pv, arch, data.features[idx],
                                 data.labels[idx])
            velocity = cfg.momentum * velocity + g
            pv.values -= cfg.lr * velocity
    return pv


def evaluate(pv: ParamVector, data) -> Tuple[float, float]:
    """(argmax accuracy, mean cross-entropy loss) over a dataset."""
    if len(data.labels) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    arch = _arch_of(pv)
    layers = _unpack(pv, arch)
    logits = _forward(layers, data.features)[-1]
    pred = logits.argmax(axis=1)
    acc = float((pred == data.labels).mean())
    probs = _softmax(logits)
    n = len(data.labels)
    logp = np.log(np.clip(probs[np.arange(n), data.labels], 1e-300, None))
    return acc, -float(logp.mean())


def _arch_of(pv: ParamVector) -> ModelArch:
    """Reconstruct the architecture from the layer index."""
    dims = []
    for off, length, name in pv.layer_index:
        if name.endswith(".weight"):
            fan_out = next(
                ln for _, ln, n in pv.layer_index
                if n == name.replace(".weight", ".bias")
            )
            dims.append(length // fan_out)
    last_out = pv.layer_index[-2][1]  # final bias span length
    dims.append(last_out)
    return ModelArch(tuple(dims))


def last_layer(pv: ParamVector) -> np.ndarray:
    """Copy of the final span (the last linear layer's weights)."""
    off, length, _ = pv.layer_index[-1]
    return pv.values[off:off + length].copy()


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """v / ||v||_2; rejects zero vectors."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not np.isfinite(norm):
        raise NormalizationError("cannot normalize a zero or non-finite vector")
    return v / norm


def clip_global(prev: ParamVector, incoming: ParamVector,
                tau: float) -> ParamVector:
    """L2-clip the round delta: prev + d * min(1, tau/||d||), d = incoming-prev."""
    if prev.values.shape != incoming.values.shape:
        raise ShapeError("parameter shapes differ")
    if tau <= 0:
        raise ParameterError("tau must be positive")
    d = incoming.values - prev.values
    norm = float(np.linalg.norm(d))
    if norm <= tau:
        return incoming.copy()
    return ParamVector(prev.values + d * (tau / norm),
                       list(incoming.layer_index))
