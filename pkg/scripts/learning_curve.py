"""PR-AUC of the pretrained tagger after fine-tuning on n = 0, 10, ..., 300 chats.

    python scripts/learning_curve.py --seeds 0 --out results/curve.csv
"""

import argparse
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

from medhighlight import evaluation, pipeline, synthetic
from medhighlight import tagger as tg


@dataclass
class CurveRun:
    seeds: list[int] = field(default_factory=lambda: [0])
    modes: tuple[str, ...] = ("unigram", "ngram")
    step: int = 10
    max_n: int = 300
    nested: bool = True
    out: Path = Path("results/curve.csv")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--step", type=int, default=10)
    p.add_argument("--max", type=int, default=300)
    p.add_argument("--independent", action="store_true", help="draw each subset independently instead of nested")
    p.add_argument("--out", type=Path, default=Path("results/curve.csv"))
    a = p.parse_args()
    logging.basicConfig(level=logging.WARNING)
    cfg = CurveRun(a.seeds, step=a.step, max_n=a.max, nested=not a.independent, out=a.out)

    rows = []
    for seed in cfg.seeds:
        bench = synthetic.generate_benchmark(seed, n_train=max(cfg.max_n, 300))
        settings = pipeline.benchmark_settings(seed)
        for mode in cfg.modes:
            tcfg = settings.tagger_config(mode)
            base, _ = tg.pretrain(bench.lexicon, bench.embeddings, tcfg, settings.pretrain)
            curve = evaluation.learning_curve(base, tcfg, bench.train, bench.test, settings.finetune,
                                              step=cfg.step, max_n=cfg.max_n, seed=seed, nested=cfg.nested)
            rows += [(seed, mode, n, v) for n, v in curve.points]
            shown = " ".join(f"{v:.3f}" for _, v in curve.points[:8])
            print(f"seed {seed} {mode:8s} slope {curve.slope():+.2e}  {shown} ...")

    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with cfg.out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seed", "mode", "n", "pr_auc"))
        w.writerows((s, m, n, f"{v:.6f}") for s, m, n, v in rows)
    print(f"wrote {cfg.out}")


if __name__ == "__main__":
    main()
