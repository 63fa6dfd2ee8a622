"""L-infinity sign-gradient attacks (FGSM and PGD).

Attacks operate on whole batches at once. Every per-sample loss depends only
on its own input row, so the gradient of the summed loss with respect to the
batch holds each sample's own input gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from arfl import autodiff as ad
from arfl.errors import ConfigError
from arfl.losses import bce_objective, make_kl_objective
from arfl.model import MlpModel, logits

FAMILIES = ("fgsm", "pgd")
OBJECTIVES = ("bce", "kl")
# KL is flat at x' = x, so the KL ascent starts from a small jitter
KL_START_STD = 1e-3


@dataclass(frozen=True)
class AttackSpec:
    family: str = "fgsm"
    epsilon: float = 0.05
    steps: int = 7
    step_size: float | None = None
    objective: str = "bce"
    random_start: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"attack family must be one of {FAMILIES}, got {self.family!r}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"attack objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.family == "pgd":
            if self.steps < 1:
                raise ConfigError(f"PGD needs at least one step, got {self.steps}")
            if self.step_size is not None and not self.step_size > 0:
                raise ConfigError(f"PGD step size must be positive, got {self.step_size}")

    @property
    def alpha(self) -> float:
        """Per-step size; defaults to 2.5 * epsilon / steps."""
        if self.step_size is not None:
            return float(self.step_size)
        return 2.5 * self.epsilon / self.steps

    def with_epsilon(self, epsilon: float) -> "AttackSpec":
        return replace(self, epsilon=epsilon)


def frozen(model: MlpModel) -> MlpModel:
    """View of ``model`` whose parameters carry no gradients (arrays are shared)."""
    return MlpModel(
        [ad.Tensor(W.values) for W in model.weights],
        [ad.Tensor(b.values) for b in model.biases],
        model.hidden_activation,
        model.layer_sizes,
    )


def input_gradient(model: MlpModel, loss_fn, x, y) -> np.ndarray:
    """Gradient of ``sum(loss_fn(model, x, y))`` with respect to ``x`` only."""
    xt = ad.Tensor(np.array(x, dtype=np.float64), True)
    total = ad.sum(loss_fn(frozen(model), xt, y))
    ad.backward(total)
    return xt.grad


def project_linf(x_candidate, x_center, epsilon: float) -> np.ndarray:
    x_candidate = np.asarray(x_candidate, dtype=np.float64)
    x_center = np.asarray(x_center, dtype=np.float64)
    if x_candidate.shape != x_center.shape:
        raise ValueError(f"shapes {x_candidate.shape} and {x_center.shape} differ")
    return np.clip(x_candidate, x_center - epsilon, x_center + epsilon)


def fgsm(model: MlpModel, loss_fn, x, y, epsilon: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if epsilon == 0:
        return x.copy()
    return x + epsilon * np.sign(input_gradient(model, loss_fn, x, y))


def pgd(model: MlpModel, loss_fn, x, y, spec: AttackSpec, rng=None, start=None) -> np.ndarray:
    """Iterated sign-gradient ascent, projected back onto the ball after every step."""
    x = np.asarray(x, dtype=np.float64)
    eps = spec.epsilon
    if eps == 0:
        return x.copy()
    if start is not None:
        x_k = project_linf(start, x, eps)
    elif spec.random_start:
        rng = rng if rng is not None else np.random.default_rng(0)
        x_k = x + rng.uniform(-eps, eps, size=x.shape)
    else:
        x_k = x.copy()
    alpha = spec.alpha
    for _ in range(spec.steps):
        g = input_gradient(model, loss_fn, x_k, y)
        x_k = project_linf(x_k + alpha * np.sign(g), x, eps)
    return x_k


def attack_points(model: MlpModel, xs, ys, spec: AttackSpec, objective=None, clean_logits=None, rng=None):
    """Adversarial counterparts of ``xs`` under ``spec``.

    ``objective`` overrides ``spec.objective``. The KL objective needs the
    clean logits and, since its gradient vanishes at the clean point, starts
    from a small Gaussian jitter drawn from ``rng``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    objective = objective or spec.objective
    if spec.epsilon == 0 or len(xs) == 0:
        return xs.copy()
    if objective == "bce":
        loss_fn = bce_objective
        start = None
    else:
        if clean_logits is None:
            clean_logits = logits(model, xs)
        loss_fn = make_kl_objective(clean_logits)
        rng = rng if rng is not None else np.random.default_rng(0)
        start = xs + KL_START_STD * rng.standard_normal(xs.shape)
    if spec.family == "fgsm":
        if start is None:
            return fgsm(model, loss_fn, xs, ys, spec.epsilon)
        g = input_gradient(model, loss_fn, start, ys)
        return project_linf(start + spec.epsilon * np.sign(g), xs, spec.epsilon)
    return pgd(model, loss_fn, xs, ys, spec, rng=rng, start=start)
