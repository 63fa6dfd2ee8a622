"""Sweep r, lambda and epsilon1 for dual training with ARFL on two moons.

    python scripts/run_sweeps.py --epochs 20 --n-train 2000
"""

import argparse

from arfl.config import ExperimentConfig
from arfl.harness import run_sweep

SWEEPS = {
    "r": [0.25, 0.5, 0.75],
    "lambda": [0.1, 1.0, 10.0, 100.0],
    "epsilon1": [0.005, 0.01, 0.05, 0.1],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--n-train", type=int, default=2000)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()

    cfg = ExperimentConfig(
        name="sweeps",
        epochs=args.epochs,
        n_train=args.n_train,
        seeds=list(range(args.seeds)),
        out_dir=args.out,
        boundary=False,
        saliency=False,
    )
    for param, values in SWEEPS.items():
        rows, failures = run_sweep(cfg, param, values)
        print(f"\n{param}")
        for v, row in rows:
            print(f"  {v:<8g} standard {row.std_mean:6.2f} ({row.std_std:.2f})  adversarial {row.adv_mean:6.2f} ({row.adv_std:.2f})")
        if failures:
            print(f"  {len(failures)} seed runs failed")


if __name__ == "__main__":
    main()
