"""Experiment configuration and its plain-text recipe format.

A recipe is a sequence of ``key = value`` lines. Keys are the kebab-case
field names of :class:`ExperimentConfig` (the same spelling as the CLI
flags); ``#`` starts a comment; blank lines are ignored. Lists are comma
separated, booleans are ``true``/``false``, and ``none`` clears an optional
field. Example::

    name = moons
    schemes = standard, standard+arfl, dual, dual+arfl
    seeds = 0, 1, 2, 3, 4
    epsilon1 = 0.05
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from arfl.attacks import AttackSpec
from arfl.errors import ConfigError
from arfl.training import SCHEMES, OptimizerSpec, TrainConfig

ROW_LABELS = {
    "standard": "A",
    "standard+arfl": "B",
    "adversarial": "C",
    "adversarial+arfl": "D",
    "dual": "E",
    "dual+arfl": "F",
    "trades": "G",
}
ALL_SCHEMES = tuple(ROW_LABELS)


def parse_scheme_key(key: str):
    """``"dual+arfl"`` -> ``("dual", True)``."""
    base, _, suffix = key.strip().partition("+")
    if base not in SCHEMES or suffix not in ("", "arfl"):
        raise ConfigError(f"unknown scheme {key!r}")
    return base, suffix == "arfl"


@dataclass
class ExperimentConfig:
    name: str = "two_moons"
    dataset: str = "two_moons"
    n_train: int = 10000
    n_test: int = 1000
    noise: float = 0.2
    data_seed: int | None = None
    csv_train: str | None = None
    csv_test: str | None = None
    csv_header: bool = False
    schemes: list = field(default_factory=lambda: list(ALL_SCHEMES))
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    r: float = 0.5
    lam: float = 0.5
    arfl_mode: str = "consistent"
    beta: float = 6.0
    train_attack: str = "fgsm"
    epsilon1: float = 0.05
    pgd_steps: int = 7
    pgd_step_size: float | None = None
    pgd_random_start: bool = False
    eval_attack: str = "fgsm"
    epsilon2: float = 0.2
    metric: str = "accuracy"
    epochs: int = 50
    batch_size: int = 128
    optimizer: str = "adam"
    learning_rate: float = 1e-2
    momentum: float = 0.0
    hidden_layers: list = field(default_factory=lambda: [10, 10])
    hidden_activation: str = "tanh"
    out_dir: str = "out"
    boundary: bool = True
    saliency: bool = True
    grid_resolution: int = 100
    svg: bool = False
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dataset not in ("two_moons", "csv"):
            raise ConfigError(f"dataset must be two_moons or csv, got {self.dataset!r}")
        if self.dataset == "csv" and not (self.csv_train and self.csv_test):
            raise ConfigError("csv dataset needs csv-train and csv-test")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if not self.schemes:
            raise ConfigError("schemes must not be empty")
        if self.metric not in ("accuracy", "auc"):
            raise ConfigError(f"metric must be accuracy or auc, got {self.metric!r}")
        if self.grid_resolution < 2:
            raise ConfigError("grid resolution must be at least 2")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for key in self.schemes:
            self.train_config(key, 0)
        self.eval_spec()

    def train_spec(self) -> AttackSpec:
        return AttackSpec(self.train_attack, self.epsilon1, self.pgd_steps, self.pgd_step_size, "bce", self.pgd_random_start)

    def eval_spec(self) -> AttackSpec:
        return AttackSpec(self.eval_attack, self.epsilon2, self.pgd_steps, self.pgd_step_size, "bce", self.pgd_random_start)

    def train_config(self, key: str, seed: int) -> TrainConfig:
        scheme, use_arfl = parse_scheme_key(key)
        return TrainConfig(
            scheme=scheme,
            use_arfl=use_arfl,
            r=self.r if scheme == "dual" else None,
            lam=self.lam,
            arfl_mode=self.arfl_mode,
            attack=self.train_spec(),
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=OptimizerSpec(self.optimizer, self.learning_rate, momentum=self.momentum),
            seed=seed,
            beta=self.beta,
            layer_sizes=(2, *self.hidden_layers, 1),
            hidden_activation=self.hidden_activation,
        )

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# --- text format -------------------------------------------------------------------

_LIST_ITEM = {"schemes": str, "seeds": int, "hidden_layers": int}


def _field_kind(f):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    optional = "None" in t
    base = t.replace("| None", "").strip()
    return base, optional


def kebab(name: str) -> str:
    return name.replace("_", "-")


def parse_value(name: str, text: str):
    f = {x.name: x for x in fields(ExperimentConfig)}.get(name)
    if f is None:
        raise ConfigError(f"unknown config key {kebab(name)!r}")
    base, optional = _field_kind(f)
    text = text.strip()
    if optional and text.lower() == "none":
        return None
    try:
        if base == "list":
            conv = _LIST_ITEM[name]
            return [conv(item.strip()) for item in text.split(",") if item.strip()]
        if base == "bool":
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(f"expected true or false, got {text!r}")
            return low == "true"
        return {"int": int, "float": float, "str": str}[base](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {kebab(name)}: {exc}") from None


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        name = key.strip().replace("-", "_")
        values[name] = parse_value(name, value)
    base = base or ExperimentConfig()
    return base.replace(**values)


def emit_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{kebab(f.name)} = {format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))
