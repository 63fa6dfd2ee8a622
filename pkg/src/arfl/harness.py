"""Run schemes over seeds, aggregate per-scheme results, sweeps and comparisons.

Output layout for a run named ``<name>``::

    <out_dir>/<name>/results.csv
    <out_dir>/<name>/per_seed.csv
    <out_dir>/<name>/config.txt
    <out_dir>/<name>/seed_<k>/<scheme>/{model.txt, train_log.csv, boundary.csv, saliency.csv}
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from arfl.config import ROW_LABELS, ExperimentConfig, emit_config, parse_scheme_key
from arfl.datasets import load_csv, make_moons
from arfl.errors import ComparisonError, ConfigError
from arfl.evaluation import (
    DEFAULT_BOUNDS,
    decision_boundary_grid,
    evaluate,
    mann_whitney_u,
    saliency,
    write_grid_csv,
    write_saliency_csv,
)
from arfl.model import save_model
from arfl.training import derive_seed, train, write_train_log

log = logging.getLogger(__name__)

OUT_ENV = "ARFL_OUT"
TRAIN_DATA_STREAM, TEST_DATA_STREAM, SAMPLE_STREAM = 11, 12, 13

RESULTS_COLUMNS = ("row", "scheme", "use_arfl", "n_seeds", "std_mean", "std_std", "adv_mean", "adv_std", "mean_metric")
PER_SEED_COLUMNS = ("scheme", "seed", "standard", "adversarial", "mean", "status")
SWEEP_COLUMNS = ("value", "std_metric_mean", "std_metric_std", "adv_metric_mean", "adv_metric_std")
SWEEP_PARAMS = {"r": "r", "lambda": "lam", "epsilon1": "epsilon1"}


def default_out_root() -> str:
    return os.environ.get(OUT_ENV, "out")


@dataclass
class SeedResult:
    scheme: str
    seed: int
    standard: float = math.nan
    adversarial: float = math.nan
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def mean(self) -> float:
        return (self.standard + self.adversarial) / 2


@dataclass
class ResultsRow:
    scheme: str
    use_arfl: bool
    standard: list = field(default_factory=list)
    adversarial: list = field(default_factory=list)

    @property
    def key(self) -> str:
        return self.scheme + ("+arfl" if self.use_arfl else "")

    @property
    def label(self) -> str:
        return ROW_LABELS.get(self.key, "-")

    @property
    def std_mean(self) -> float:
        return _mean(self.standard)

    @property
    def adv_mean(self) -> float:
        return _mean(self.adversarial)

    @property
    def std_std(self) -> float:
        return _std(self.standard)

    @property
    def adv_std(self) -> float:
        return _std(self.adversarial)

    @property
    def mean_metric(self) -> float:
        return (self.std_mean + self.adv_mean) / 2

    @property
    def per_seed_mean(self) -> list:
        return [(s + a) / 2 for s, a in zip(self.standard, self.adversarial)]


@dataclass
class ResultsTable:
    rows: list
    seed_results: list
    metric: str = "accuracy"

    def row(self, key: str) -> ResultsRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    @property
    def failures(self) -> list:
        return [s for s in self.seed_results if not s.ok]

    def format(self) -> str:
        name = "accuracy" if self.metric == "accuracy" else "AUC"
        head = f"{'':4}{'method':<20}{'standard ' + name:>22}{'adversarial ' + name:>26}{'mean':>10}"
        lines = [head]
        for r in self.rows:
            lines.append(
                f"{r.label + '.':4}{r.key:<20}{r.std_mean:>14.1f} ({r.std_std:.1f}){r.adv_mean:>18.1f} ({r.adv_std:.1f}){r.mean_metric:>10.1f}"
            )
        return "\n".join(lines)


def _mean(xs) -> float:
    return float(np.mean(xs)) if len(xs) else math.nan


def _std(xs) -> float:
    # sample std over seeds; a single seed has zero spread
    return float(np.std(xs, ddof=1)) if len(xs) > 1 else 0.0


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6f}"


# --- data -----------------------------------------------------------------------


def load_data(cfg: ExperimentConfig, seed: int):
    """(train, test) for one seed; two-moon data is regenerated per seed unless data-seed pins it."""
    if cfg.dataset == "csv":
        return load_csv(cfg.csv_train, cfg.csv_header), load_csv(cfg.csv_test, cfg.csv_header)
    base = seed if cfg.data_seed is None else cfg.data_seed
    train_set = make_moons(cfg.n_train, cfg.noise, derive_seed(base, TRAIN_DATA_STREAM))
    test_set = make_moons(cfg.n_test, cfg.noise, derive_seed(base, TEST_DATA_STREAM))
    return train_set, test_set


# --- single (seed, scheme) job --------------------------------------------------------


def run_one(cfg: ExperimentConfig, key: str, seed: int, run_dir) -> SeedResult:
    out = Path(run_dir) / f"seed_{seed}" / key
    try:
        out.mkdir(parents=True, exist_ok=True)
        train_set, test_set = load_data(cfg, seed)
        tcfg = cfg.train_config(key, seed)
        history = []
        model = train(tcfg, train_set, history)
        report = evaluate(model, test_set, cfg.eval_spec(), cfg.metric)
        save_model(model, out / "model.txt")
        write_train_log(history, out / "train_log.csv")
        if cfg.boundary and train_set.dim == 2:
            grid = decision_boundary_grid(model, DEFAULT_BOUNDS, (cfg.grid_resolution, cfg.grid_resolution))
            write_grid_csv(grid, out / "boundary.csv")
            if cfg.svg:
                from arfl.render import boundary_svg

                rng = np.random.default_rng(derive_seed(seed, SAMPLE_STREAM))
                pick = rng.choice(len(test_set), size=min(50, len(test_set)), replace=False)
                (out / "boundary.svg").write_text(boundary_svg(grid, test_set.xs[pick], test_set.ys[pick]))
        if cfg.saliency:
            smap = saliency(model, test_set.xs[0], test_set.ys[0])
            write_saliency_csv(smap, out / "saliency.csv")
        scale = 100.0 if cfg.metric == "accuracy" else 1.0
        return SeedResult(key, seed, report.standard_metric * scale, report.adversarial_metric * scale)
    except Exception as exc:  # recorded per seed; the run carries on
        log.exception("seed %s scheme %s failed", seed, key)
        return SeedResult(key, seed, error=f"{type(exc).__name__}: {exc}")


def _run_one_star(args):
    return run_one(*args)


def run_experiment(cfg: ExperimentConfig, run_dir=None) -> ResultsTable:
    """Train and evaluate every scheme on every seed, then write the CSV outputs.

    Failed (seed, scheme) jobs are recorded in ``per_seed.csv`` and left out of
    the aggregates; callers check ``table.failures``.
    """
    cfg.validate()
    run_dir = Path(run_dir) if run_dir is not None else Path(cfg.out_dir) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(emit_config(cfg), encoding="utf-8")
    jobs = [(cfg, key, seed, run_dir) for key in cfg.schemes for seed in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_one_star, jobs))
    else:
        results = [run_one(*job) for job in jobs]
    rows = []
    for key in cfg.schemes:
        scheme, use_arfl = parse_scheme_key(key)
        row = ResultsRow(scheme, use_arfl)
        for res in results:
            if res.scheme == key and res.ok:
                row.standard.append(res.standard)
                row.adversarial.append(res.adversarial)
        rows.append(row)
    table = ResultsTable(rows, results, cfg.metric)
    write_results(table, run_dir)
    return table


def write_results(table: ResultsTable, run_dir) -> None:
    run_dir = Path(run_dir)
    lines = [",".join(RESULTS_COLUMNS)]
    for r in table.rows:
        vals = [r.std_mean, r.std_std, r.adv_mean, r.adv_std, r.mean_metric]
        lines.append(",".join([r.label, r.scheme, str(r.use_arfl).lower(), str(len(r.standard))] + [_fmt(v) for v in vals]))
    (run_dir / "results.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    lines = [",".join(PER_SEED_COLUMNS)]
    for s in table.seed_results:
        status = "ok" if s.ok else "failed: " + s.error.replace(",", ";").replace("\n", " ")
        lines.append(f"{s.scheme},{s.seed},{_fmt(s.standard)},{_fmt(s.adversarial)},{_fmt(s.mean)},{status}")
    (run_dir / "per_seed.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_per_seed(run_dir) -> dict:
    """``{scheme: {"standard": [...], "adversarial": [...], "mean": [...]}}`` for successful seeds."""
    out = {}
    path = Path(run_dir) / "per_seed.csv"
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        scheme, _seed, std, adv, mean, status = line.split(",", 5)
        if status != "ok":
            continue
        d = out.setdefault(scheme, {"standard": [], "adversarial": [], "mean": []})
        d["standard"].append(float(std))
        d["adversarial"].append(float(adv))
        d["mean"].append(float(mean))
    return out


# --- sweeps -------------------------------------------------------------------------


def check_sweep_values(param: str, values) -> list:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}, got {param!r}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    for v in values:
        if param == "r" and not 0.0 <= v <= 1.0:
            raise ConfigError(f"mixing ratio {v} outside [0, 1]")
        if param in ("lambda", "epsilon1") and v < 0:
            raise ConfigError(f"{param} must be >= 0, got {v}")
    return values


def _sweep_scheme(param: str, scheme: str, value: float) -> str:
    # r pins the scheme at the ends of its range
    if param != "r":
        return scheme
    base, use_arfl = parse_scheme_key(scheme)
    if base not in ("standard", "adversarial", "dual"):
        raise ConfigError(f"an r sweep needs a mixing scheme, got {scheme!r}")
    base = "standard" if value == 1.0 else "adversarial" if value == 0.0 else "dual"
    return base + ("+arfl" if use_arfl else "")


def run_sweep(cfg: ExperimentConfig, param: str, values, scheme: str = "dual+arfl", run_dir=None):
    """One experiment per value of ``param``; writes ``sweep_<param>.csv``.

    Every value is validated before anything runs. Returns the list of
    ``(value, ResultsRow)`` pairs and any failed seed results.
    """
    values = check_sweep_values(param, values)
    run_dir = Path(run_dir) if run_dir is not None else Path(cfg.out_dir) / cfg.name
    configs = []
    for v in values:
        key = _sweep_scheme(param, scheme, v)
        sub = cfg.replace(**{SWEEP_PARAMS[param]: v, "schemes": [key]})
        configs.append((v, sub))
    run_dir.mkdir(parents=True, exist_ok=True)
    rows, failures = [], []
    for v, sub in configs:
        table = run_experiment(sub, run_dir / f"sweep_{param}" / f"value_{format(v, 'g')}")
        rows.append((v, table.rows[0]))
        failures.extend(table.failures)
    lines = [",".join(SWEEP_COLUMNS)]
    for v, row in rows:
        lines.append(",".join([repr(v)] + [_fmt(x) for x in (row.std_mean, row.std_std, row.adv_mean, row.adv_std)]))
    (run_dir / f"sweep_{param}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows, failures


# --- comparisons ------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    u: float
    p: float
    n: int

    @property
    def significant(self) -> bool:
        return self.p < 0.05

    def format(self, name_a="a", name_b="b") -> str:
        mark = "significant (p < 0.05)" if self.significant else "not significant"
        return f"{name_a} vs {name_b}: U = {self.u:g}, p = {self.p:.4g}, n = {self.n} per group, {mark}"


def compare_runs(results_a, results_b) -> Comparison:
    """Mann-Whitney U test on two per-seed metric lists of equal length."""
    a, b = list(results_a), list(results_b)
    if len(a) != len(b):
        raise ComparisonError(f"seed counts differ: {len(a)} vs {len(b)}")
    if not a:
        raise ComparisonError("nothing to compare")
    u, p = mann_whitney_u(a, b)
    return Comparison(u, p, len(a))
