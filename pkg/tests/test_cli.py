import csv
import json
import shutil
import subprocess
import sys

import pytest

from medhighlight import cli, corpus, report

from conftest import FIXTURES, GOLDEN

FAST = ["--cells", "8", "--pretrain-epochs", "3", "--finetune-epochs", "2", "--tagger-lr", "0.01",
        "--lime-samples", "100", "--clf-epochs", "30"]


@pytest.fixture(scope="module")
def data_root(tmp_path_factory, small_bench):
    root = tmp_path_factory.mktemp("data")
    small_bench.write(root)
    shutil.copy(FIXTURES / "conversation.jsonl", root / "fixture.jsonl")
    shutil.copy(FIXTURES / "predictions.json", root / "fixture_predictions.json")
    return root


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run("bogus")
    assert exc.value.code == 2
    proc = subprocess.run([sys.executable, "-m", "medhighlight", "bogus"], capture_output=True)
    assert proc.returncode == 2


def test_data_errors_exit_1(data_root, capsys):
    assert run("ingest", "--data-root", data_root / "missing") == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert json.loads(err)["error"] == "HighlightError"
    (data_root / "broken.jsonl").write_text("{oops\n")
    assert run("ingest", "--data-root", data_root, "--train", "broken.jsonl") == 1
    assert "line 1" in capsys.readouterr().err


def test_bad_setting_is_usage_error(data_root, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("tagger.no_such_knob = 3\n")
    assert run("evaluate", "--data-root", data_root, "--config", cfg) == 2
    assert run("evaluate", "--data-root", data_root, "--dropout", "1.5") == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 9\n[tagger]\ncells_per_direction = 16\ndropout = 0.1  # comment\n[lime]\nn_samples = 50\n")
    args = cli.build_parser().parse_args(["evaluate", "--data-root", str(tmp_path), "--config", "run.cfg",
                                          "--cells", "4"])
    settings = cli.resolve_settings(args)
    assert settings.tagger.cells_per_direction == 4   # flag beats file
    assert settings.tagger.dropout == 0.1             # file beats default
    assert settings.lime.n_samples == 50
    assert settings.seed == 9 and settings.lime.seed == 9 and settings.classifier.seed == 9
    assert settings.tagger.max_seq_len == 256         # default


def test_resolved_config_is_logged(data_root, capsys):
    assert run("ingest", "--data-root", data_root, "--seed", "3") == 0
    err = capsys.readouterr().err
    assert "resolved config" in err and '"seed": 3' in err


def test_evaluate_csv(data_root):
    assert run("evaluate", "--data-root", data_root, *FAST, "--out", "metrics.csv") == 0
    rows = list(csv.reader((data_root / "metrics.csv").open()))
    assert rows[0] == ["model", "threshold", "precision", "recall", "roc_auc", "pr_auc"]
    assert [r[0] for r in rows[1:]] == ["tfidf", "svm+lime", "lr+lime", "unigram-tagger", "ngram-tagger"]
    assert all(len(r) == 6 for r in rows)


def test_evaluate_is_deterministic(data_root):
    for name in ("a.csv", "b.csv"):
        assert run("evaluate", "--data-root", data_root, *FAST, "--seed", "1", "--out", name) == 0
    assert (data_root / "a.csv").read_bytes() == (data_root / "b.csv").read_bytes()


def test_report_from_predictions_matches_golden(data_root):
    assert run("report", "--data-root", data_root, "--dataset", "fixture.jsonl",
               "--predictions", "fixture_predictions.json", "--out", "fixture.html") == 0
    assert (data_root / "fixture.html").read_bytes() == (GOLDEN / "conversation.html").read_bytes()


def test_highlight_then_report_round_trip(data_root):
    assert run("train", "tfidf", "--data-root", data_root, "--out", "tfidf.json") == 0
    assert run("highlight", "--data-root", data_root, "--model-kind", "tfidf", "--model", "tfidf.json",
               "--dataset", "fixture.jsonl", "--out", "preds.json") == 0
    preds = json.loads((data_root / "preds.json").read_text())
    assert preds["threshold"] == 0.01
    assert run("report", "--data-root", data_root, "--dataset", "fixture.jsonl",
               "--predictions", "preds.json", "--out", "round.html") == 0
    (conv,) = corpus.load_dataset(data_root / "fixture.jsonl")
    scores = [m["scores"] for m in preds["conversations"][0]["messages"]]
    expected = report.render_html(conv, scores, threshold=0.01)
    assert (data_root / "round.html").read_text(encoding="utf-8") == expected


def test_train_and_highlight_every_model_kind(data_root):
    assert run("train", "classifier", "--data-root", data_root, "--loss", "logistic", *FAST, "--out", "lr.json") == 0
    assert run("train", "tagger", "--data-root", data_root, *FAST, "--out", "tagger.json") == 0
    assert run("pretrain", "tagger", "--data-root", data_root, *FAST, "--out", "pre.json") == 0
    assert run("finetune", "tagger", "--data-root", data_root, *FAST, "--checkpoint", "pre.json",
               "--out", "ft.json") == 0
    for kind, model in (("classifier", "lr.json"), ("tagger", "tagger.json"), ("tagger", "ft.json")):
        assert run("highlight", "--data-root", data_root, *FAST, "--model-kind", kind, "--model", model,
                   "--dataset", "fixture.jsonl", "--format", "html", "--out", f"{model}.html") == 0
        assert (data_root / f"{model}.html").read_text().startswith("<!DOCTYPE html>")


def test_explain(data_root, capsys):
    assert run("train", "classifier", "--data-root", data_root, "--loss", "hinge", *FAST, "--out", "svm.json") == 0
    capsys.readouterr()
    assert run("explain", "--data-root", data_root, "--lime-samples", "100", "--model", "svm.json",
               "--dataset", "fixture.jsonl") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["id"] == "fixture-1"
    assert [len(e["weights"]) for e in out["explanations"]] == [16, 13]


def test_agreement(data_root, capsys):
    (data_root / "ann.json").write_text(json.dumps({"annotators": [[1, 0, 1, None], [1, 0, 1, 1]]}))
    assert run("agreement", "--data-root", data_root, "--annotations", "ann.json") == 0
    assert json.loads(capsys.readouterr().out)["krippendorff_alpha"] == 1.0


def test_curve(data_root):
    assert run("curve", "--data-root", data_root, *FAST, "--step", "20", "--max", "40", "--out", "curve.csv") == 0
    rows = list(csv.reader((data_root / "curve.csv").open()))
    assert rows[0] == ["n", "pr_auc", "mode"]
    assert [(r[0], r[2]) for r in rows[1:]] == [(n, m) for m in ("unigram", "ngram") for n in ("0", "20", "40")]
