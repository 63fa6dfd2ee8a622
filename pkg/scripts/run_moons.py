"""Train all seven schemes on two moons over five seeds and print the results.

    python scripts/run_moons.py --epochs 50 --out out
"""

import argparse
import logging

from arfl.config import ExperimentConfig
from arfl.harness import compare_runs, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=50)
    ap.add_argument("--out", default="out")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)

    cfg = ExperimentConfig(name="moons", epochs=args.epochs, out_dir=args.out, jobs=args.jobs, svg=args.svg)
    table = run_experiment(cfg)
    print(table.format())

    ranked = sorted(table.rows, key=lambda r: r.mean_metric, reverse=True)
    print("\nranking by mean accuracy:", " > ".join(f"{r.label}" for r in ranked))
    f, e = table.row("dual+arfl"), table.row("dual")
    print(compare_runs(f.per_seed_mean, e.per_seed_mean).format("dual+arfl", "dual"))
    if table.failures:
        print(f"{len(table.failures)} seed runs failed, see per_seed.csv")


if __name__ == "__main__":
    main()
