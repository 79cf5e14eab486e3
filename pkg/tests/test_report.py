import html
import json
from html.parser import HTMLParser

import pytest

from medhighlight import report
from medhighlight.errors import AlignmentError

from conftest import FIXTURES, GOLDEN


class _MessageText(HTMLParser):
    """Collects the tag-stripped content of every <p class="text">."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.texts = []
        self._inside = False

    def handle_starttag(self, tag, attrs):
        if tag == "p" and ("class", "text") in attrs:
            self._inside = True
            self.texts.append("")

    def handle_endtag(self, tag):
        if tag == "p":
            self._inside = False

    def handle_data(self, data):
        if self._inside:
            self.texts[-1] += data


def fixture_predictions():
    preds = json.loads((FIXTURES / "predictions.json").read_text())
    return [m["scores"] for m in preds["conversations"][0]["messages"]]


def test_golden_file(fixture_conversation):
    rendered = report.render_html(fixture_conversation, fixture_predictions(), threshold=0.5)
    assert rendered == (GOLDEN / "conversation.html").read_text(encoding="utf-8")


def test_stripped_output_is_source_text(fixture_conversation):
    parser = _MessageText()
    parser.feed(report.render_html(fixture_conversation, fixture_predictions()))
    assert parser.texts == [m.text for m in fixture_conversation.messages]


def test_exact_predictions_only_tp(fixture_conversation):
    gold_scores = [list(m.gold) if m.gold else None for m in fixture_conversation.messages]
    out = report.render_html(fixture_conversation, gold_scores)
    assert 'class="tp"' in out
    assert 'class="fp"' not in out and 'class="fn"' not in out


def test_zero_predictions_only_fn(fixture_conversation):
    zeros = [[0.0] * len(m.tokens) for m in fixture_conversation.messages]
    out = report.render_html(fixture_conversation, zeros)
    assert 'class="fn"' in out
    assert 'class="tp"' not in out and 'class="fp"' not in out and 'class="hl"' not in out


def test_colors_follow_convention():
    assert report.COLORS == {"tp": "#ffe066", "fp": "#a5d8ff", "fn": "#faa2c1"}
    assert [report.token_class(p, g) for p, g in [(1, 1), (1, 0), (0, 1), (0, 0), (1, None)]] == \
        ["tp", "fp", "fn", None, "hl"]


def test_misaligned_predictions(fixture_conversation):
    preds = fixture_predictions()
    with pytest.raises(AlignmentError):
        report.render_html(fixture_conversation, preds[:2])
    preds[0] = preds[0][:-1]
    with pytest.raises(AlignmentError):
        report.render_html(fixture_conversation, preds)


def test_escaping(fixture_conversation):
    out = report.render_html(fixture_conversation, fixture_predictions())
    assert "&lt;" in out and "&amp;" in out
    assert html.unescape("&lt;cramps&gt;") in fixture_conversation.messages[2].text


NUMBER = {"pattern": r"\d+", "placeholder": "number"}


def test_redact_number():
    assert report.redact("Age is 34", [NUMBER]) == "Age is [[NUMBER]]"


def test_redact_without_rules_is_identity():
    assert report.redact("Age is 34", []) == "Age is 34"


def test_redact_overlaps_leftmost_longest():
    rules = [NUMBER, {"pattern": r"\d+ years", "placeholder": "AGE"}, {"pattern": r"years old", "placeholder": "x"}]
    # both the number and the age rule start at 0; the age match is longer.
    # "years old" starts inside the consumed match and is skipped.
    assert report.redact("34 years old, 2 kids", rules) == "[[AGE]] old, [[NUMBER]] kids"
    # equal length and start: earlier rule wins
    tie = [{"pattern": r"ab", "placeholder": "first"}, {"pattern": r"a.", "placeholder": "second"}]
    assert report.redact("xab", tie) == "x[[FIRST]]"


def test_redact_ignores_empty_matches():
    assert report.redact("a1", [{"pattern": r"\d*", "placeholder": "n"}]) == "a[[N]]"


def test_load_rules(tmp_path):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps([NUMBER]))
    assert report.load_rules(path) == [NUMBER]
    path.write_text(json.dumps([{"pattern": "x"}]))
    with pytest.raises(ValueError):
        report.load_rules(path)
