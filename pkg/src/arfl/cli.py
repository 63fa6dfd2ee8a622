"""Command line entry point: ``arfl run|sweep|compare|boundary|saliency``.

Exit codes: 0 success, 2 configuration error, 3 run failure, 4 comparison error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from arfl.config import ExperimentConfig, kebab, parse_config, parse_value
from arfl.errors import ArflError, ComparisonError, ConfigError
from arfl.harness import compare_runs, default_out_root, read_per_seed, run_experiment, run_sweep
from arfl.losses import ArflConfig, bce_objective, make_overall_objective
from arfl.model import load_model

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_COMPARE = 0, 2, 3, 4


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="recipe file of 'key = value' lines")
    group = p.add_argument_group("experiment settings (override the recipe)")
    for f in fields(ExperimentConfig):
        group.add_argument(f"--{kebab(f.name)}", dest=f"cfg_{f.name}", metavar="VALUE")


def _build_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig(out_dir=default_out_root())
    if args.config:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"), cfg)
    overrides = {}
    for f in fields(ExperimentConfig):
        raw = getattr(args, f"cfg_{f.name}", None)
        if raw is not None:
            overrides[f.name] = parse_value(f.name, raw)
    return cfg.replace(**overrides) if overrides else cfg


def _parse_floats(text: str, n: int, what: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def cmd_run(args) -> int:
    cfg = _build_config(args)
    table = run_experiment(cfg)
    print(table.format())
    run_dir = Path(cfg.out_dir) / cfg.name
    print(f"results written to {run_dir / 'results.csv'}")
    if table.failures:
        for f in table.failures:
            print(f"FAILED seed {f.seed} {f.scheme}: {f.error}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    values = [v for chunk in args.values for v in chunk.replace("{", "").replace("}", "").split(",") if v.strip()]
    try:
        values = [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"sweep values must be numbers, got {args.values}") from None
    rows, failures = run_sweep(cfg, args.param, values, scheme=args.scheme)
    for v, row in rows:
        print(f"{args.param} = {v:g}: standard {row.std_mean:.2f} ({row.std_std:.2f}), adversarial {row.adv_mean:.2f} ({row.adv_std:.2f})")
    print(f"sweep written to {Path(cfg.out_dir) / cfg.name / f'sweep_{args.param}.csv'}")
    return EXIT_RUN if failures else EXIT_OK


def cmd_compare(args) -> int:
    run_b = args.run_b or args.run_a
    a = read_per_seed(args.run_a)
    b = read_per_seed(run_b)
    try:
        xs = a[args.row_a][args.metric]
        ys = b[args.row_b][args.metric]
    except KeyError as exc:
        raise ComparisonError(f"no successful results for scheme {exc.args[0]!r}") from None
    result = compare_runs(xs, ys)
    print(result.format(args.row_a, args.row_b))
    return EXIT_OK


def cmd_boundary(args) -> int:
    from arfl.evaluation import decision_boundary_grid, write_grid_csv

    model = load_model(args.model)
    bounds = _parse_floats(args.bounds, 4, "--bounds")
    res = [int(v) for v in _parse_floats(args.resolution, 2, "--resolution")]
    grid = decision_boundary_grid(model, bounds, res)
    write_grid_csv(grid, args.out)
    if args.svg:
        from arfl.datasets import load_csv
        from arfl.render import boundary_svg

        pts = labels = None
        if args.points:
            data = load_csv(args.points)
            rng = np.random.default_rng(args.seed)
            pick = rng.choice(len(data), size=min(50, len(data)), replace=False)
            pts, labels = data.xs[pick], data.ys[pick]
        Path(args.svg).write_text(boundary_svg(grid, pts, labels))
    print(f"grid of {grid.probs.size} cells written to {args.out}")
    return EXIT_OK


def cmd_saliency(args) -> int:
    from arfl.evaluation import saliency, write_saliency_csv

    model = load_model(args.model)
    x = np.array([float(v) for v in args.point.split(",")])
    loss_fn = bce_objective if args.loss == "bce" else make_overall_objective(ArflConfig(args.lam))
    smap = saliency(model, x, np.asarray(args.label), loss_fn)
    write_saliency_csv(smap, args.out)
    if smap.constant:
        print("warning: constant gradient, scaled map set to 0.5", file=sys.stderr)
    print(f"saliency written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arfl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train and evaluate every scheme over every seed")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat a run over values of r, lambda or epsilon1")
    p.add_argument("param", choices=["r", "lambda", "epsilon1"])
    p.add_argument("values", nargs="+", help="values, space or comma separated")
    p.add_argument("--scheme", default="dual+arfl", help="scheme swept (default dual+arfl)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="Mann-Whitney U test between two schemes' per-seed metrics")
    p.add_argument("run_a", help="run directory holding per_seed.csv")
    p.add_argument("run_b", nargs="?", help="second run directory (default: same as run_a)")
    p.add_argument("--row-a", default="dual+arfl")
    p.add_argument("--row-b", default="dual")
    p.add_argument("--metric", choices=["standard", "adversarial", "mean"], default="mean")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("boundary", help="export the probability grid of a saved model")
    p.add_argument("model")
    p.add_argument("--out", default="boundary.csv")
    p.add_argument("--bounds", default="-1.5,2.5,-1.25,1.75", help="xmin,xmax,ymin,ymax")
    p.add_argument("--resolution", default="200,200", help="columns,rows")
    p.add_argument("--svg", help="also write an SVG rendering here")
    p.add_argument("--points", help="CSV of labelled points; 50 random ones are drawn on the SVG")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("saliency", help="input-gradient saliency of a saved model at one point")
    p.add_argument("model")
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--label", type=int, choices=[1, -1], required=True)
    p.add_argument("--loss", choices=["bce", "overall"], default="bce")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--out", default="saliency.csv")
    p.set_defaults(func=cmd_saliency)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArflError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
