"""Standard, adversarial, dual (mixed) and TRADES training with optional ARFL.

A batch is split by the mixing ratio ``r``: the first ``ceil(r * B)`` shuffled
samples stay clean and the rest are replaced by adversarial counterparts
generated from the current parameters. The per-sample objectives are averaged
over the whole batch, so the counts carry the ``r`` / ``1 - r`` weighting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from arfl import autodiff as ad
from arfl.attacks import AttackSpec, attack_points
from arfl.datasets import Dataset, batches
from arfl.errors import ConfigError, ContractError, TrainingError
from arfl.losses import bce_loss, robust_loss, trades_surrogate
from arfl.model import DEFAULT_LAYERS, MlpModel, forward, init_mlp, predict

log = logging.getLogger(__name__)

SCHEMES = ("standard", "adversarial", "dual", "trades")
DEFAULT_R = {"standard": 1.0, "adversarial": 0.0, "dual": 0.5, "trades": 1.0}
ARFL_MODES = ("consistent", "flipped")


def derive_seed(seed: int, *tags: int) -> int:
    """Independent 63-bit stream seed for ``(seed, *tags)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(t) for t in tags))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# stream tags for derive_seed
INIT_STREAM, SHUFFLE_STREAM, ATTACK_STREAM = 1, 2, 3


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str = "adam"
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ConfigError(f"optimizer must be adam or sgd, got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")


@dataclass
class OptimizerState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel) -> "OptimizerState":
        return cls(0, [np.zeros_like(p.values) for p in model.parameters], [np.zeros_like(p.values) for p in model.parameters])


def optimizer_step(model: MlpModel, state: OptimizerState, spec: OptimizerSpec) -> None:
    """Update parameters in place from their ``.grad`` and advance ``state``."""
    state.step += 1
    t = state.step
    lr = spec.learning_rate
    for i, p in enumerate(model.parameters):
        g = p.grad
        if spec.kind == "sgd":
            if spec.momentum:
                state.m[i] = spec.momentum * state.m[i] + g
                g = state.m[i]
            p.values -= lr * g
            continue
        state.m[i] = spec.beta1 * state.m[i] + (1.0 - spec.beta1) * g
        state.v[i] = spec.beta2 * state.v[i] + (1.0 - spec.beta2) * g * g
        m_hat = state.m[i] / (1.0 - spec.beta1**t)
        v_hat = state.v[i] / (1.0 - spec.beta2**t)
        p.values -= lr * m_hat / (np.sqrt(v_hat) + spec.eps)


@dataclass(frozen=True)
class TrainConfig:
    scheme: str = "standard"
    use_arfl: bool = False
    r: float | None = None
    lam: float = 0.5
    arfl_mode: str = "consistent"
    attack: AttackSpec = field(default_factory=AttackSpec)
    epochs: int = 50
    batch_size: int = 128
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    seed: int = 0
    beta: float = 6.0
    layer_sizes: tuple = DEFAULT_LAYERS
    hidden_activation: str = "tanh"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.arfl_mode not in ARFL_MODES:
            raise ConfigError(f"ARFL mode must be one of {ARFL_MODES}, got {self.arfl_mode!r}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if self.scheme == "trades" and self.use_arfl:
            raise ConfigError("ARFL is not combined with the TRADES baseline")
        r = self.ratio
        if not 0.0 <= r <= 1.0:
            raise ConfigError(f"mixing ratio must lie in [0, 1], got {r}")
        if self.scheme == "standard" and r != 1.0:
            raise ConfigError(f"standard training uses r = 1, got {r}")
        if self.scheme == "adversarial" and r != 0.0:
            raise ConfigError(f"adversarial training uses r = 0, got {r}")
        if self.scheme == "dual" and not 0.0 < r < 1.0:
            raise ConfigError(f"dual training needs 0 < r < 1, got {r}")

    @property
    def ratio(self) -> float:
        return DEFAULT_R[self.scheme] if self.r is None else float(self.r)

    @property
    def key(self) -> str:
        return self.scheme + ("+arfl" if self.use_arfl else "")

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)


@dataclass
class Batch:
    xs: np.ndarray
    ys: np.ndarray

    def __len__(self):
        return len(self.ys)


@dataclass
class EpochRecord:
    epoch: int
    objective: float
    clean_train_acc: float


def split_count(r: float, size: int) -> int:
    """Number of clean samples in a batch of ``size`` at mixing ratio ``r``."""
    # round first so r * size landing a hair above an integer is not bumped up
    return min(size, math.ceil(round(r * size, 9)))


def compose_batch(model: MlpModel, xs, ys, cfg: TrainConfig):
    """Split a shuffled batch into (clean, adversarial) parts.

    Adversarial members are attacked from the current ``model`` with the
    training attack (budget epsilon_1).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys)
    if len(ys) == 0:
        raise ContractError("empty batch")
    n_std = split_count(cfg.ratio, len(ys))
    std = Batch(xs[:n_std], ys[:n_std])
    adv_x = xs[n_std:]
    if len(adv_x):
        adv_x = attack_points(model, adv_x, ys[n_std:], replace(cfg.attack, objective="bce"))
    return std, Batch(adv_x, ys[n_std:])


def batch_objective(model: MlpModel, std: Batch, adv: Batch, cfg: TrainConfig) -> ad.Tensor:
    """Mean per-sample objective over the mixed batch.

    Clean samples contribute BCE (+ lambda * robust loss with ARFL).
    Adversarial samples contribute BCE at the perturbed point plus the ARFL
    term, whose sign is + in ``consistent`` mode and - in ``flipped``
    mode.
    """
    n_std, n_adv = len(std), len(adv)
    if n_std + n_adv == 0:
        raise ContractError("both batch parts are empty")
    xs = np.concatenate([std.xs, adv.xs]) if n_std and n_adv else (std.xs if n_std else adv.xs)
    ys = np.concatenate([std.ys, adv.ys]) if n_std and n_adv else (std.ys if n_std else adv.ys)
    out = forward(model, xs)
    per_sample = bce_loss(out.logit, ys)
    if cfg.use_arfl and cfg.lam > 0:
        adv_sign = 1.0 if cfg.arfl_mode == "consistent" else -1.0
        coef = np.concatenate([np.full(n_std, cfg.lam), np.full(n_adv, adv_sign * cfg.lam)])
        per_sample = ad.add(per_sample, ad.mul(robust_loss(out.features, ys), coef))
    return ad.mean(per_sample)


def trades_batch_objective(model: MlpModel, xs, ys, cfg: TrainConfig, rng) -> ad.Tensor:
    x_adv = attack_points(model, xs, ys, cfg.attack, objective="kl", rng=rng)
    return ad.mean(trades_surrogate(model, xs, x_adv, ys, cfg.beta))


def step_objective(model: MlpModel, xs, ys, cfg: TrainConfig, rng=None) -> ad.Tensor:
    if cfg.scheme == "trades":
        return trades_batch_objective(model, xs, ys, cfg, rng)
    std, adv = compose_batch(model, xs, ys, cfg)
    return batch_objective(model, std, adv, cfg)


def train(cfg: TrainConfig, train_set: Dataset, history: list | None = None, model: MlpModel | None = None) -> MlpModel:
    """Run ``cfg.epochs`` epochs of optimizer steps and return the final model.

    Per-epoch ``EpochRecord`` entries are appended to ``history`` when given.
    """
    if len(train_set) == 0:
        raise ContractError("empty training set")
    if model is None:
        sizes = (train_set.dim,) + tuple(cfg.layer_sizes[1:])
        model = init_mlp(sizes, derive_seed(cfg.seed, INIT_STREAM), cfg.hidden_activation)
    state = OptimizerState.for_model(model)
    shuffle_seed = derive_seed(cfg.seed, SHUFFLE_STREAM)
    xs_all, ys_all = train_set.xs, train_set.ys
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for b, idx in enumerate(batches(len(train_set), cfg.batch_size, shuffle_seed, epoch)):
            rng = np.random.default_rng([derive_seed(cfg.seed, ATTACK_STREAM), epoch, b]) if cfg.scheme == "trades" else None
            obj = step_objective(model, xs_all[idx], ys_all[idx], cfg, rng)
            value = obj.item()
            if not math.isfinite(value):
                raise TrainingError(epoch, b, value)
            ad.backward(obj)
            optimizer_step(model, state, cfg.optimizer)
            total += value * len(idx)
            count += len(idx)
        acc = float(np.mean(predict(model, xs_all) == ys_all))
        record = EpochRecord(epoch + 1, total / count, acc)
        if history is not None:
            history.append(record)
        log.debug("%s epoch %d objective %.6f acc %.4f", cfg.key, record.epoch, record.objective, acc)
    return model


def write_train_log(history, path) -> None:
    lines = ["epoch,objective,clean_train_acc"]
    lines += [f"{r.epoch},{r.objective:.6f},{r.clean_train_acc:.6f}" for r in history]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
