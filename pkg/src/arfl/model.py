"""Feed-forward classifier exposing both its logit and penultimate features."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from arfl import autodiff as ad
from arfl.autodiff import Tensor
from arfl.errors import ConfigError, DimensionError, ParseError

DEFAULT_LAYERS = (2, 10, 10, 1)


@dataclass
class MlpModel:
    weights: list
    biases: list
    hidden_activation: str = "tanh"
    layer_sizes: tuple = field(default=DEFAULT_LAYERS)

    @property
    def parameters(self) -> list:
        params = []
        for W, b in zip(self.weights, self.biases):
            params.extend((W, b))
        return params

    def named_parameters(self):
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            yield f"W{i}", W
            yield f"b{i}", b

    def num_parameters(self) -> int:
        return sum(p.values.size for p in self.parameters)

    def zero_grad(self):
        for p in self.parameters:
            p.zero_grad()

    def clone(self) -> "MlpModel":
        return MlpModel(
            [Tensor(W.values.copy(), True) for W in self.weights],
            [Tensor(b.values.copy(), True) for b in self.biases],
            self.hidden_activation,
            tuple(self.layer_sizes),
        )

    def state(self) -> list:
        return [p.values.copy() for p in self.parameters]


@dataclass
class ForwardResult:
    logit: Tensor
    features: Tensor


def _check_sizes(layer_sizes):
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigError(f"need at least input and output sizes, got {sizes}")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must be positive, got {sizes}")
    if sizes[-1] != 1:
        raise ConfigError(f"binary classifier must end in one logit, got {sizes}")
    return sizes


def init_mlp(layer_sizes=DEFAULT_LAYERS, seed: int = 0, hidden_activation: str = "tanh") -> MlpModel:
    """Glorot-uniform weights, zero biases, all drawn from ``seed``."""
    sizes = _check_sizes(layer_sizes)
    if hidden_activation not in ("tanh", "relu", "sigmoid"):
        raise ConfigError(f"unsupported hidden activation {hidden_activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(Tensor(rng.uniform(-limit, limit, size=(fan_out, fan_in)), True))
        biases.append(Tensor(np.zeros(fan_out), True))
    return MlpModel(weights, biases, hidden_activation, sizes)


def forward(model: MlpModel, x) -> ForwardResult:
    """Run ``x`` (one point or a batch of rows) through the network.

    For a single point the logit is a 0-d tensor; for a batch of rows it has
    one entry per row. ``features`` are the activations after the last hidden
    nonlinearity (the input itself when the net has no hidden layer).
    """
    x = x if isinstance(x, Tensor) else ad.tensor(x)
    if x.values.ndim not in (1, 2) or x.shape[-1] != model.layer_sizes[0]:
        raise DimensionError(f"input shape {x.shape} does not match first layer size {model.layer_sizes[0]}")
    h = x
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = ad.affine(W, b, h)
        if i < last:
            h = ad.elementwise(model.hidden_activation, z)
    logit = ad.reshape(z, x.shape[:-1])
    return ForwardResult(logit, h)


def logits(model: MlpModel, xs) -> np.ndarray:
    return forward(model, np.asarray(xs, dtype=np.float64)).logit.values


def predict(model: MlpModel, x):
    """+1 where the logit is non-negative, else -1 (ties go to +1)."""
    z = logits(model, x)
    out = np.where(z >= 0.0, 1, -1)
    return int(out) if out.ndim == 0 else out


# --- checkpoints ---------------------------------------------------------------


def save_model(model: MlpModel, path) -> None:
    lines = [f"# arfl-mlp activation={model.hidden_activation} sizes={','.join(map(str, model.layer_sizes))}"]
    for name, p in model.named_parameters():
        rows, cols = p.values.shape if p.values.ndim == 2 else (1, p.values.size)
        # repr of a float round-trips exactly
        lines.append(" ".join([name, str(rows), str(cols)] + [repr(float(a)) for a in p.values.reshape(-1)]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> MlpModel:
    text = Path(path).read_text().splitlines()
    activation, sizes = "tanh", None
    tensors = {}
    for lineno, line in enumerate(text, 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("activation="):
                    activation = tok.split("=", 1)[1]
                elif tok.startswith("sizes="):
                    sizes = tuple(int(s) for s in tok.split("=", 1)[1].split(","))
            continue
        parts = line.split()
        try:
            name, rows, cols = parts[0], int(parts[1]), int(parts[2])
            vals = np.array([float(s) for s in parts[3:]], dtype=np.float64)
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed tensor record: {exc}", lineno) from None
        if vals.size != rows * cols:
            raise ParseError(f"{name}: expected {rows * cols} values, got {vals.size}", lineno)
        tensors[name] = vals.reshape(rows, cols) if name.startswith("W") else vals
    n_layers = sum(1 for k in tensors if k.startswith("W"))
    weights = [Tensor(tensors[f"W{i}"], True) for i in range(n_layers)]
    biases = [Tensor(tensors[f"b{i}"], True) for i in range(n_layers)]
    if sizes is None:
        sizes = tuple([weights[0].shape[1]] + [W.shape[0] for W in weights])
    return MlpModel(weights, biases, activation, sizes)
