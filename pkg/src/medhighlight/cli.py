"""Command-line entry point: ``medhighlight <command> ...``.

Relative paths, inputs and outputs alike, resolve against ``--data-root``.
Settings resolve as flags > ``--config`` file > defaults, and every run logs
the resolved settings as JSON on stderr.

Exit status: 0 ok, 1 data/model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path

import numpy as np

from . import classify, corpus, evaluation, lime, pipeline, report, synthetic, tagger, tfidf
from .embeddings import load_embeddings
from .errors import HighlightError

log = logging.getLogger("medhighlight")

DEFAULT_FILES = {
    "train": "highlight_train.jsonl",
    "test": "highlight_test.jsonl",
    "classification": "classification.jsonl",
    "medical_terms": "medical_terms.txt",
    "non_medical_terms": "non_medical_terms.txt",
    "embeddings": "embeddings.txt",
}

# flag dest -> dotted settings keys it sets
FLAG_KEYS = {
    "seed": ("seed",),
    "tfidf_threshold": ("tfidf_threshold",),
    "lime_threshold": ("lime_threshold",),
    "tagger_threshold": ("tagger_threshold",),
    "cells": ("tagger.cells_per_direction",),
    "dropout": ("tagger.dropout",),
    "candidate_activation": ("tagger.candidate_activation",),
    "max_seq_len": ("tagger.max_seq_len",),
    "pretrain_epochs": ("pretrain.epochs",),
    "finetune_epochs": ("finetune.epochs",),
    "tagger_lr": ("pretrain.lr", "finetune.lr"),
    "batch_size": ("pretrain.batch_size", "finetune.batch_size"),
    "lime_samples": ("lime.n_samples",),
    "kernel_width": ("lime.kernel_width",),
    "ridge_l2": ("lime.ridge_l2",),
    "clf_epochs": ("classifier.epochs",),
    "clf_l2": ("classifier.l2",),
    "clf_lr": ("classifier.lr",),
}


class UsageError(Exception):
    pass


def parse_config_text(text: str) -> dict[str, object]:
    """``key = value`` lines; ``#`` comments and ``[section]`` headers (prefixing keys) allowed."""
    out: dict[str, object] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = f"{section}.{key}" if section else key
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("'\"")
    return out


def _set_dotted(settings: pipeline.Settings, key: str, value) -> None:
    target = settings
    parts = key.split(".")
    for part in parts[:-1]:
        if not hasattr(target, part):
            raise UsageError(f"unknown setting {key!r}")
        target = getattr(target, part)
    if not is_dataclass(target) or parts[-1] not in {f.name for f in fields(target)}:
        raise UsageError(f"unknown setting {key!r}")
    current = getattr(target, parts[-1])
    if isinstance(current, bool):
        value = bool(value)
    elif isinstance(current, int):
        value = int(value)
    elif isinstance(current, float):
        value = float(value)
    setattr(target, parts[-1], value)


def resolve_settings(args) -> pipeline.Settings:
    settings = pipeline.Settings()
    if getattr(args, "config", None):
        for key, value in parse_config_text(_path(args, args.config).read_text(encoding="utf-8")).items():
            _set_dotted(settings, key, value)
    for dest, keys in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            for key in keys:
                _set_dotted(settings, key, value)
    try:
        tagger.TaggerConfig(**asdict(settings.tagger))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return settings.with_seed(settings.seed)


def _path(args, p: str | Path) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(args.data_root) / p


def _file(args, name: str) -> Path:
    return _path(args, getattr(args, name, None) or DEFAULT_FILES[name])


def _write(args, text: str) -> None:
    if args.out:
        out = _path(args, args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)


def _lexicon(args):
    return corpus.load_term_lexicon(_file(args, "medical_terms"), _file(args, "non_medical_terms"))


def _log_run(command: str, args, settings: pipeline.Settings | None = None) -> None:
    resolved = {
        "command": command,
        "args": {k: v for k, v in vars(args).items() if k not in ("func",)},
        "settings": settings.to_dict() if settings else None,
    }
    log.info("resolved config %s", json.dumps(resolved, sort_keys=True, default=str))


# commands


def cmd_generate(args):
    _log_run("generate", args)
    bench = synthetic.generate_benchmark(args.seed or 0, args.n_train, args.n_test)
    bench.write(Path(args.data_root))
    print(json.dumps({"train": len(bench.train), "test": len(bench.test), "root": str(args.data_root)}))


def cmd_ingest(args):
    _log_run("ingest", args)
    summary = {}
    for name, kind in (("train", "highlighting"), ("test", "highlighting"), ("classification", "classification")):
        path = _file(args, name)
        if not path.exists():
            continue
        convs = corpus.load_dataset(path, kind)
        summary[name] = {
            "conversations": len(convs),
            "messages": sum(len(c.messages) for c in convs),
            "patient_tokens": sum(len(m.tokens) for c in convs for m in c.patient_messages),
        }
    if _file(args, "medical_terms").exists():
        lex = _lexicon(args)
        summary["lexicon"] = {"medical": len(lex.medical_terms), "non_medical": len(lex.non_medical_terms)}
    if _file(args, "embeddings").exists():
        emb = load_embeddings(_file(args, "embeddings"))
        summary["embeddings"] = {"words": len(emb.words), "dim": emb.dim}
    if not summary:
        raise HighlightError(f"no dataset files found under {args.data_root}")
    print(json.dumps(summary, indent=2))


def _train_tagger_params(args, settings, phase: str):
    emb = load_embeddings(_file(args, "embeddings"))
    config = settings.tagger_config(args.mode)
    if phase in ("pretrain", "full"):
        params, trace = tagger.pretrain(_lexicon(args), emb, config, settings.pretrain)
    else:
        params, config = tagger.load_checkpoint(_path(args, args.checkpoint))
        if config.mode != args.mode:
            config = tagger.TaggerConfig(**{**asdict(config), "mode": args.mode})
        trace = []
    if phase in ("finetune", "full"):
        train = corpus.load_dataset(_file(args, "train"), "highlighting")
        params, trace = tagger.finetune(params, train, config, settings.finetune)
    return params, config, trace


def cmd_train(args):
    settings = resolve_settings(args)
    _log_run(f"train {args.what}", args, settings)
    out = _path(args, args.out or f"{args.what}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.what == "tfidf":
        tfidf.fit(corpus.load_dataset(_file(args, "train"), "highlighting")).save(out)
    elif args.what == "classifier":
        data = corpus.load_dataset(_file(args, "classification"), "classification")
        model_tf = tfidf.fit(data)
        space = classify.build_feature_space(model_tf)
        model = classify.train(space, data, args.loss, settings.classifier)
        model.save(out)
        model_tf.save(out.with_suffix(".features.json"))
    else:
        params, config, _ = _train_tagger_params(args, settings, "full")
        tagger.save_checkpoint(params, config, out)
    log.info("wrote %s", out)


def cmd_pretrain(args):
    settings = resolve_settings(args)
    _log_run("pretrain tagger", args, settings)
    params, config, _ = _train_tagger_params(args, settings, "pretrain")
    tagger.save_checkpoint(params, config, _path(args, args.out or "pretrained.json"))


def cmd_finetune(args):
    settings = resolve_settings(args)
    _log_run("finetune tagger", args, settings)
    params, config, _ = _train_tagger_params(args, settings, "finetune")
    tagger.save_checkpoint(params, config, _path(args, args.out or "finetuned.json"))


def _load_scorer(args, settings):
    kind = args.model_kind
    path = _path(args, args.model)
    if kind == "tfidf":
        return pipeline.TfidfScorer(tfidf.TfidfModel.load(path)), settings.tfidf_threshold
    if kind == "tagger":
        params, config = tagger.load_checkpoint(path)
        return pipeline.TaggerScorer(params, config), settings.tagger_threshold
    model = classify.LinearModel.load(path)
    space = classify.build_feature_space(tfidf.TfidfModel.load(path.with_suffix(".features.json")))
    return pipeline.LimeScorer([model], space, settings.lime).for_model(0), settings.lime_threshold


def _predictions_json(convs, scorer) -> list[dict]:
    out = []
    for conv in convs:
        messages = []
        for m in conv.messages:
            scores = scorer([m])[0] if m.tokens else []
            messages.append({"role": m.role, "tokens": m.norms, "scores": [float(x) for x in scores]})
        out.append({"id": conv.id, "messages": messages})
    return out


def cmd_highlight(args):
    settings = resolve_settings(args)
    _log_run("highlight", args, settings)
    convs = corpus.load_dataset(_path(args, args.dataset), args.kind)
    scorer, threshold = _load_scorer(args, settings)
    threshold = args.threshold if args.threshold is not None else threshold
    preds = _predictions_json(convs, scorer)
    if args.format == "json":
        _write(args, json.dumps({"threshold": threshold, "conversations": preds}) + "\n")
    elif args.format == "scores":
        lines = []
        for conv in preds:
            for k, m in enumerate(conv["messages"]):
                for tok, s in zip(m["tokens"], m["scores"]):
                    lines.append(f"{conv['id']}\t{k}\t{tok}\t{s:.6f}\t{int(s >= threshold)}")
        _write(args, "\n".join(lines) + "\n")
    else:
        pages = [report.render_html(c, [m["scores"] for m in p["messages"]], threshold=threshold)
                 for c, p in zip(convs, preds)]
        _write(args, "\n".join(pages))


def cmd_explain(args):
    settings = resolve_settings(args)
    _log_run("explain", args, settings)
    convs = corpus.load_dataset(_path(args, args.dataset), args.kind)
    matches = [c for c in convs if c.id == args.id] if args.id else convs[:1]
    if not matches:
        raise HighlightError(f"conversation {args.id!r} not found")
    path = _path(args, args.model)
    model = classify.LinearModel.load(path)
    space = classify.build_feature_space(tfidf.TfidfModel.load(path.with_suffix(".features.json")))
    out = []
    for m in matches[0].patient_messages:
        if not m.tokens:
            continue
        (expl,) = lime.explain_with_classifiers([model], space, m.norms, settings.lime)
        record = json.loads(expl.to_json(m.norms, settings.lime))
        record["target_class"] = model.classes[expl.target_class]
        out.append(record)
    _write(args, json.dumps({"id": matches[0].id, "explanations": out}, indent=2) + "\n")


def cmd_evaluate(args):
    settings = resolve_settings(args)
    _log_run("evaluate", args, settings)
    train = corpus.load_dataset(_file(args, "train"), "highlighting")
    test = corpus.load_dataset(_file(args, "test"), "highlighting")
    cls_path = _file(args, "classification")
    classification = corpus.load_dataset(cls_path, "classification") if cls_path.exists() else train
    emb = load_embeddings(_file(args, "embeddings"))
    models = pipeline.train_all(train, classification, _lexicon(args), emb, settings)
    reports = pipeline.evaluate_all(models, test, settings)
    if args.format == "json":
        _write(args, evaluation.metrics_json(reports) + "\n")
    else:
        _write(args, evaluation.metrics_csv(reports))


def cmd_curve(args):
    settings = resolve_settings(args)
    _log_run("curve", args, settings)
    train = corpus.load_dataset(_file(args, "train"), "highlighting")
    test = corpus.load_dataset(_file(args, "test"), "highlighting")
    emb = load_embeddings(_file(args, "embeddings"))
    lex = _lexicon(args)
    curves = []
    for mode in args.modes:
        config = settings.tagger_config(mode)
        base, _ = tagger.pretrain(lex, emb, config, settings.pretrain)
        curves.append(evaluation.learning_curve(base, config, train, test, settings.finetune,
                                                step=args.step, max_n=args.max, seed=settings.seed,
                                                nested=not args.independent))
    _write(args, evaluation.curves_csv(curves))


def cmd_agreement(args):
    _log_run("agreement", args)
    obj = json.loads(_path(args, args.annotations).read_text(encoding="utf-8"))
    rows = obj["annotators"] if isinstance(obj, dict) else obj
    alpha = evaluation.krippendorff_alpha(corpus.AnnotationSet.from_rows(rows))
    print(json.dumps({"krippendorff_alpha": alpha, "annotators": len(rows)}))


def cmd_report(args):
    _log_run("report", args)
    convs = corpus.load_dataset(_path(args, args.dataset), args.kind)
    preds = json.loads(_path(args, args.predictions).read_text(encoding="utf-8"))
    by_id = {p["id"]: p for p in preds["conversations"]}
    threshold = args.threshold if args.threshold is not None else preds.get("threshold", 0.5)
    wanted = [c for c in convs if not args.id or c.id == args.id]
    if not wanted:
        raise HighlightError(f"conversation {args.id!r} not found")
    pages = []
    for conv in wanted:
        if conv.id not in by_id:
            raise HighlightError(f"no predictions for conversation {conv.id!r}")
        scores = [m["scores"] for m in by_id[conv.id]["messages"]]
        html_text = report.render_html(conv, scores, threshold=threshold)
        if args.rules:
            rules = report.load_rules(_path(args, args.rules))
            html_text = report.redact(html_text, rules)
        pages.append(html_text)
    _write(args, "\n".join(pages))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-root", default=".", help="base directory for every relative path")
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--out", help="output file (default: stdout or a per-command name)")
    common.add_argument("-v", "--verbose", action="store_true")
    for name in DEFAULT_FILES:
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, help=f"default {DEFAULT_FILES[name]}")
    common.add_argument("--seed", type=int)
    common.add_argument("--tfidf-threshold", type=float)
    common.add_argument("--lime-threshold", type=float)
    common.add_argument("--tagger-threshold", type=float)
    common.add_argument("--cells", type=int)
    common.add_argument("--dropout", type=float)
    common.add_argument("--candidate-activation", choices=("tanh", "sigmoid"))
    common.add_argument("--max-seq-len", type=int)
    common.add_argument("--pretrain-epochs", type=int)
    common.add_argument("--finetune-epochs", type=int)
    common.add_argument("--tagger-lr", type=float)
    common.add_argument("--batch-size", type=int)
    common.add_argument("--lime-samples", type=int)
    common.add_argument("--kernel-width", type=float)
    common.add_argument("--ridge-l2", type=float)
    common.add_argument("--clf-epochs", type=int)
    common.add_argument("--clf-l2", type=float)
    common.add_argument("--clf-lr", type=float)

    parser = argparse.ArgumentParser(prog="medhighlight", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write the synthetic benchmark to --data-root")
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-test", type=int, default=50)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", parents=[common], help="validate dataset, lexicon and embedding files")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train one model")
    p.add_argument("what", choices=("tfidf", "classifier", "tagger"))
    p.add_argument("--loss", choices=classify.LOSS_KINDS, default="logistic")
    p.add_argument("--mode", choices=("unigram", "ngram"), default="ngram")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("pretrain", parents=[common], help="pretrain the tagger on the term lexicon")
    p.add_argument("what", choices=("tagger",))
    p.add_argument("--mode", choices=("unigram", "ngram"), default="ngram")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", parents=[common], help="fine-tune a tagger checkpoint on annotated chats")
    p.add_argument("what", choices=("tagger",))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("unigram", "ngram"), default="ngram")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("highlight", parents=[common], help="score every token with a trained model")
    p.add_argument("--model-kind", choices=("tfidf", "classifier", "tagger"), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", choices=("highlighting", "classification"), default="highlighting")
    p.add_argument("--format", choices=("json", "scores", "html"), default="json")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_highlight)

    p = sub.add_parser("explain", parents=[common], help="LIME explanations for one conversation")
    p.add_argument("--model", required=True, help="classifier JSON from 'train classifier'")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", choices=("highlighting", "classification"), default="highlighting")
    p.add_argument("--id", help="conversation id (default: first)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", parents=[common], help="train and evaluate all five highlighters")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("curve", parents=[common], help="PR-AUC vs. number of fine-tuning chats")
    p.add_argument("--step", type=int, default=10)
    p.add_argument("--max", type=int, default=300)
    p.add_argument("--modes", nargs="+", choices=("unigram", "ngram"), default=["unigram", "ngram"])
    p.add_argument("--independent", action="store_true", help="draw each subset independently")
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("agreement", parents=[common], help="Krippendorff's alpha for binary annotations")
    p.add_argument("--annotations", required=True, help="JSON list of per-annotator label lists (null = missing)")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("report", parents=[common], help="render predictions vs. gold as HTML")
    p.add_argument("--predictions", required=True, help="JSON from 'highlight --format json'")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", choices=("highlighting", "classification"), default="highlighting")
    p.add_argument("--id")
    p.add_argument("--threshold", type=float)
    p.add_argument("--rules", help="redaction rules JSON")
    p.set_defaults(func=cmd_report)
    return parser


class _StderrHandler(logging.StreamHandler):
    """Writes to whatever sys.stderr is at emit time, so a swapped stream still gets output."""

    @property
    def stream(self):
        return sys.stderr

    @stream.setter
    def stream(self, _):
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    # the resolved config is always logged, whatever the verbosity
    log.setLevel(logging.INFO)
    if not log.handlers:
        handler = _StderrHandler()
        handler.setFormatter(logging.Formatter("%(name)s %(levelname)s %(message)s"))
        log.addHandler(handler)
        log.propagate = False
    handler = log.handlers[0]
    handler.filters.clear()
    if not args.verbose:
        handler.addFilter(lambda r: r.name == log.name or r.levelno >= logging.WARNING)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(json.dumps({"error": "UsageError", "message": str(exc)}), file=sys.stderr)
        return 2
    except (HighlightError, FileNotFoundError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
