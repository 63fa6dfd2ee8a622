"""Accuracy, AUC, Mann-Whitney U, decision-boundary grids and saliency maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from arfl import autodiff as ad
from arfl.attacks import AttackSpec, attack_points, input_gradient
from arfl.datasets import Dataset
from arfl.errors import ConfigError, ContractError, UndefinedMetricError
from arfl.losses import bce_objective
from arfl.model import MlpModel, logits, predict

DEFAULT_BOUNDS = (-1.5, 2.5, -1.25, 1.75)


@dataclass(frozen=True)
class EvalReport:
    standard_metric: float
    adversarial_metric: float

    @property
    def mean_metric(self) -> float:
        return (self.standard_metric + self.adversarial_metric) / 2


def _accuracy(model, xs, ys) -> float:
    if len(ys) == 0:
        raise ContractError("accuracy of an empty dataset is undefined")
    return float(np.mean(predict(model, xs) == np.asarray(ys)))


def accuracy(model: MlpModel, dataset: Dataset) -> float:
    return _accuracy(model, dataset.xs, dataset.ys)


def adversarial_points(model: MlpModel, dataset: Dataset, spec: AttackSpec) -> np.ndarray:
    """White-box attacks on ``dataset`` against ``model`` itself (BCE objective)."""
    return attack_points(model, dataset.xs, dataset.ys, spec, objective="bce")


def adversarial_accuracy(model: MlpModel, dataset: Dataset, spec: AttackSpec) -> float:
    if len(dataset) == 0:
        raise ContractError("accuracy of an empty dataset is undefined")
    return _accuracy(model, adversarial_points(model, dataset, spec), dataset.ys)


def evaluate(model: MlpModel, dataset: Dataset, spec: AttackSpec, metric: str = "accuracy") -> EvalReport:
    if metric == "accuracy":
        return EvalReport(accuracy(model, dataset), adversarial_accuracy(model, dataset, spec))
    if metric == "auc":
        x_adv = adversarial_points(model, dataset, spec)
        return EvalReport(auc(logits(model, dataset.xs), dataset.ys), auc(logits(model, x_adv), dataset.ys))
    raise ConfigError(f"metric must be accuracy or auc, got {metric!r}")


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both positive and negative samples")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def mann_whitney_u(a, b):
    """U statistic for sample ``a`` and the two-sided normal-approximation p-value.

    The variance carries the tie correction and the z-score a 0.5 continuity
    correction. The approximation is rough below roughly eight samples per
    group; treat such p-values as indicative.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n_a, n_b = len(a), len(b)
    if n_a == 0 or n_b == 0:
        raise ContractError("both samples need at least one value")
    ranks = rankdata(np.concatenate([a, b]))
    u = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    n = n_a + n_b
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = float(np.sum(counts**3 - counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = (abs(u - n_a * n_b / 2.0) - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return u, min(1.0, p)


# --- decision boundary -------------------------------------------------------------


@dataclass
class BoundaryGrid:
    xs: np.ndarray  # (m,) evenly spaced
    ys: np.ndarray  # (n,) evenly spaced
    probs: np.ndarray  # (n, m): row i is y = ys[i]

    def rows(self):
        for i, yv in enumerate(self.ys):
            for j, xv in enumerate(self.xs):
                yield float(xv), float(yv), float(self.probs[i, j])


def decision_boundary_grid(model: MlpModel, bounds=DEFAULT_BOUNDS, resolution=(200, 200)) -> BoundaryGrid:
    """sigmoid(logit) on an evenly spaced mesh; ``resolution`` is (columns, rows)."""
    xmin, xmax, ymin, ymax = map(float, bounds)
    nx, ny = map(int, resolution)
    if xmin >= xmax or ymin >= ymax:
        raise ConfigError(f"degenerate bounds {bounds}")
    if nx < 2 or ny < 2:
        raise ConfigError(f"resolution must be at least 2x2, got {resolution}")
    gx = np.linspace(xmin, xmax, nx)
    gy = np.linspace(ymin, ymax, ny)
    mesh = np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)
    probs = ad.sigmoid(logits(model, mesh)).values.reshape(ny, nx)
    return BoundaryGrid(gx, gy, probs)


def write_grid_csv(grid: BoundaryGrid, path) -> None:
    lines = ["x,y,prob"] + [f"{x:.6f},{y:.6f},{p:.6f}" for x, y, p in grid.rows()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# --- saliency ------------------------------------------------------------------------


@dataclass
class SaliencyMap:
    grad: np.ndarray
    scaled: np.ndarray
    constant: bool  # min-max scaling had zero range; scaled is all 0.5


def saliency(model: MlpModel, x, y, loss_fn=bce_objective) -> SaliencyMap:
    """Input gradient of ``loss_fn`` at ``x`` plus its min-max scaling to [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    grad = input_gradient(model, loss_fn, x, y)
    lo, hi = float(grad.min()), float(grad.max())
    if hi - lo == 0:
        return SaliencyMap(grad, np.full_like(grad, 0.5), True)
    return SaliencyMap(grad, (grad - lo) / (hi - lo), False)


def write_saliency_csv(smap: SaliencyMap, path) -> None:
    lines = ["dim,grad,scaled"]
    lines += [f"{i},{g:.6f},{s:.6f}" for i, (g, s) in enumerate(zip(smap.grad.reshape(-1), smap.scaled.reshape(-1)))]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
