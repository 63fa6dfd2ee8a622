"""Two-moon generation, CSV ingestion and seeded mini-batching."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from arfl.errors import ConfigError, ParseError, SchemaError


@dataclass(frozen=True)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys).astype(np.int64)
        if xs.ndim != 2:
            raise SchemaError(f"points must be a 2-D array, got shape {xs.shape}")
        if len(xs) != len(ys):
            raise SchemaError(f"{len(xs)} points but {len(ys)} labels")
        if not np.all((ys == 1) | (ys == -1)):
            raise SchemaError("labels must be +1 or -1")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return len(self.ys)

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.xs[idx], self.ys[idx], self.name)


def make_moons(n: int, noise: float = 0.2, seed: int = 0) -> Dataset:
    """Interleaved half circles: upper moon labelled +1, lower moon -1.

    Angles sit on an even grid over [0, pi]; all randomness comes from the
    Gaussian jitter and the final shuffle, both drawn from ``seed``.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 samples, got {n}")
    if noise < 0:
        raise ConfigError(f"noise must be non-negative, got {noise}")
    n_up = (n + 1) // 2
    n_low = n // 2
    t_up = np.linspace(0.0, np.pi, n_up)
    t_low = np.linspace(0.0, np.pi, n_low)
    upper = np.column_stack([np.cos(t_up), np.sin(t_up)])
    lower = np.column_stack([1.0 - np.cos(t_low), 0.5 - np.sin(t_low)])
    xs = np.vstack([upper, lower])
    ys = np.concatenate([np.ones(n_up, dtype=np.int64), -np.ones(n_low, dtype=np.int64)])
    rng = np.random.default_rng(seed)
    if noise > 0:
        xs = xs + rng.normal(0.0, noise, size=xs.shape)
    order = rng.permutation(n)
    return Dataset(xs[order], ys[order], name=f"moons(n={n},noise={noise},seed={seed})")


def load_csv(path, header: bool = False) -> Dataset:
    """Rows of numeric features followed by a label in {+1,-1} or {1,0}."""
    xs, ys = [], []
    dim = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError(f"expected features and a label, got {row!r}", lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"non-numeric field in {row!r}", lineno) from None
            label = vals[-1]
            if label in (1.0,):
                y = 1
            elif label in (-1.0, 0.0):
                y = -1
            else:
                raise ParseError(f"label must be one of 1, -1, 0; got {row[-1]!r}", lineno)
            feats = vals[:-1]
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise SchemaError(f"line {lineno}: {len(feats)} features, earlier rows have {dim}")
            xs.append(feats)
            ys.append(y)
    if not xs:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(np.array(xs), np.array(ys), name=Path(path).stem)


def save_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for x, y in zip(dataset.xs, dataset.ys):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([int(seed), int(epoch)]).permutation(n)


def batches(dataset, batch_size: int, seed: int, epoch: int):
    """Yield index arrays covering every sample once, reshuffled per epoch."""
    if batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {batch_size}")
    n = dataset if isinstance(dataset, int) else len(dataset)
    order = epoch_permutation(n, seed, epoch)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
