"""Training objectives.

All losses are computed per sample: a batch of logits gives a vector of
losses and the caller decides how to reduce them. Labels are +1/-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from arfl import autodiff as ad
from arfl.autodiff import Tensor
from arfl.errors import ConfigError, ContractError
from arfl.model import forward, logits

KL_CLAMP = 1e-7


@dataclass(frozen=True)
class ArflConfig:
    lam: float = 0.5
    feature_source: str = "penultimate"

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.feature_source != "penultimate":
            raise ConfigError(f"unsupported feature source {self.feature_source!r}")


def _labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ContractError("labels must be +1 or -1")
    return y


def bce_loss(logit, y) -> Tensor:
    """``log(1 + exp(-y * logit))``: cross-entropy of sigmoid(logit) against (y+1)/2."""
    return ad.softplus(ad.mul(logit, -_labels(y)))


def robust_loss(features, y) -> Tensor:
    """Negative mean of sigmoid(|f * y|) over the feature vector of each sample.

    ``features`` is one vector or a (rows, width) batch; the result has one
    entry per row. Values lie in (-1, -0.5].
    """
    f = features if isinstance(features, Tensor) else ad.tensor(features)
    if f.values.size == 0 or f.shape[-1] == 0:
        raise ContractError("robust loss needs at least one feature")
    y = _labels(y)
    yb = y[:, None] if f.values.ndim == 2 and y.ndim == 1 else y
    corr = ad.sigmoid(ad.absolute(ad.mul(f, yb)))
    return ad.neg(ad.mean(corr, axis=-1 if f.values.ndim == 2 else None))


def overall_loss(logit, features, y, cfg: ArflConfig) -> Tensor:
    loss = bce_loss(logit, y)
    if cfg.lam == 0:
        return loss
    return ad.add(loss, ad.scale(robust_loss(features, y), cfg.lam))


def kl_bernoulli(p, q) -> Tensor:
    """KL divergence between Bernoulli(p) and Bernoulli(q), both clamped away from 0 and 1."""
    p = ad.clip(p, KL_CLAMP, 1.0 - KL_CLAMP)
    q = ad.clip(q, KL_CLAMP, 1.0 - KL_CLAMP)
    one_p = ad.sub(1.0, p)
    one_q = ad.sub(1.0, q)
    a = ad.mul(p, ad.sub(ad.log(p), ad.log(q)))
    b = ad.mul(one_p, ad.sub(ad.log(one_p), ad.log(one_q)))
    return ad.add(a, b)


def kl_value(p: float, q: float) -> float:
    return float(kl_bernoulli(np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)).values)


# --- loss_fn adapters used by attacks and saliency ------------------------------
# signature: loss_fn(model, x: Tensor, y) -> per-sample loss tensor


def bce_objective(model, x, y) -> Tensor:
    return bce_loss(forward(model, x).logit, y)


def make_overall_objective(cfg: ArflConfig):
    def objective(model, x, y):
        out = forward(model, x)
        return overall_loss(out.logit, out.features, y, cfg)

    return objective


def make_kl_objective(clean_logits):
    """KL between fixed clean predictions and predictions at the moving point."""
    p_clean = ad.sigmoid(np.asarray(clean_logits, dtype=np.float64)).values

    def objective(model, x, y):
        return kl_bernoulli(p_clean, ad.sigmoid(forward(model, x).logit))

    return objective


def trades_surrogate(model, x, x_adv, y, beta: float) -> Tensor:
    """Per-sample ``BCE(f(x), y) + beta * KL(p(x) || p(x_adv))`` with ``x_adv`` held fixed."""
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    clean = forward(model, x)
    loss = bce_loss(clean.logit, y)
    if beta == 0:
        return loss
    kl = kl_bernoulli(ad.sigmoid(clean.logit), ad.sigmoid(forward(model, x_adv).logit))
    return ad.add(loss, ad.scale(kl, beta))


def trades_objective(model, x, y, beta: float, attack, rng=None) -> Tensor:
    """TRADES surrogate where ``x_adv`` maximizes the KL term inside the attack ball."""
    from arfl.attacks import attack_points

    xs = np.asarray(x.values if isinstance(x, Tensor) else x, dtype=np.float64)
    if beta == 0:
        return trades_surrogate(model, xs, xs, y, beta)
    x_adv = attack_points(model, xs, y, attack, objective="kl", clean_logits=logits(model, xs), rng=rng)
    return trades_surrogate(model, xs, x_adv, y, beta)
