"""Train and score all five highlighters on the synthetic benchmark for several seeds.

    python scripts/run_benchmark.py --seeds 0 1 2 --out results/benchmark.csv
"""

import argparse
import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from medhighlight import pipeline, synthetic
from medhighlight.evaluation import METRIC_COLUMNS


@dataclass
class BenchmarkRun:
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    n_train: int = 300
    n_test: int = 50
    out: Path = Path("results/benchmark.csv")


def run(cfg: BenchmarkRun) -> list[dict]:
    rows = []
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        bench = synthetic.generate_benchmark(seed, cfg.n_train, cfg.n_test)
        settings = pipeline.benchmark_settings(seed)
        models = pipeline.train_all(bench.train, bench.train, bench.lexicon, bench.embeddings, settings)
        for r in pipeline.evaluate_all(models, bench.test, settings):
            rows.append({"seed": seed, **dict(zip(METRIC_COLUMNS, r.row()))})
        print(f"seed {seed} done in {time.perf_counter() - t0:.1f}s")
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-test", type=int, default=50)
    p.add_argument("--out", type=Path, default=Path("results/benchmark.csv"))
    a = p.parse_args()
    logging.basicConfig(level=logging.WARNING)
    cfg = BenchmarkRun(a.seeds, a.n_train, a.n_test, a.out)
    rows = run(cfg)

    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with cfg.out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["seed", *METRIC_COLUMNS], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    print(f"\n{'model':16s} {'P':>7s} {'R':>7s} {'ROC-AUC':>8s} {'PR-AUC':>8s}   (mean over {len(cfg.seeds)} seeds)")
    for model in pipeline.MODEL_NAMES:
        sel = [r for r in rows if r["model"] == model]
        means = [np.mean([float(r[k]) for r in sel]) for k in ("precision", "recall", "roc_auc", "pr_auc")]
        print(f"{model:16s} " + " ".join(f"{m:7.3f} " for m in means))
    print(f"\nwrote {cfg.out}")


if __name__ == "__main__":
    main()
