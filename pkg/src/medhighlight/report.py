"""Standalone HTML rendering of predicted vs. gold highlights, and rule-based redaction."""

from __future__ import annotations

import html
import json
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Conversation
from .errors import AlignmentError

COLORS = {"tp": "#ffe066", "fp": "#a5d8ff", "fn": "#faa2c1"}

_STYLE = (
    "body{font-family:sans-serif;max-width:48em;margin:2em auto;line-height:1.6}"
    ".msg{margin:.6em 0;padding:.4em .8em;border-radius:6px;background:#f4f4f4}"
    ".msg.doctor{background:#eef6ee}"
    ".role{font-weight:bold;margin-right:.5em;text-transform:capitalize}"
    + "".join(f".{k}{{background:{v}}}" for k, v in COLORS.items())
    + f".hl{{background:{COLORS['tp']}}}"
)


def token_class(pred: int, gold: int | None) -> str | None:
    if gold is None:
        # no reference labels: plain highlight
        return "hl" if pred else None
    if pred and gold:
        return "tp"
    if pred:
        return "fp"
    if gold:
        return "fn"
    return None


def _render_text(text: str, tokens, classes) -> str:
    data = text.encode("utf-8")
    out = []
    pos = 0
    for tok, cls in zip(tokens, classes):
        out.append(html.escape(data[pos:tok.start].decode("utf-8"), quote=False))
        surface = html.escape(tok.surface, quote=False)
        out.append(f'<span class="{cls}">{surface}</span>' if cls else surface)
        pos = tok.end
    out.append(html.escape(data[pos:].decode("utf-8"), quote=False))
    return "".join(out)


def render_html(conversation: Conversation, predictions: Sequence[Sequence[float] | None],
                gold: Sequence[Sequence[int] | None] | None = None, threshold: float = 0.5,
                title: str | None = None) -> str:
    """One entry of ``predictions``/``gold`` per message; ``None`` leaves a message unmarked."""
    messages = conversation.messages
    if gold is None:
        gold = [m.gold for m in messages]
    if len(predictions) != len(messages) or len(gold) != len(messages):
        raise AlignmentError(f"need one prediction and gold entry for each of {len(messages)} messages")
    title = title or f"Conversation {conversation.id}"
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        '<head><meta charset="utf-8">',
        f"<title>{html.escape(title)}</title>",
        f"<style>{_STYLE}</style>",
        "</head>",
        "<body>",
        f"<h1>{html.escape(title)}</h1>",
    ]
    for k, (msg, pred, g) in enumerate(zip(messages, predictions, gold)):
        n = len(msg.tokens)
        if pred is not None and len(pred) != n:
            raise AlignmentError(f"message {k}: {len(pred)} predictions for {n} tokens")
        if g is not None and len(g) != n:
            raise AlignmentError(f"message {k}: {len(g)} gold labels for {n} tokens")
        if pred is None:
            classes = [None] * n
        else:
            flags = (np.asarray(pred, dtype=float) >= threshold).astype(int)
            classes = [token_class(int(p), None if g is None else int(gl))
                       for p, gl in zip(flags, g if g is not None else [None] * n)]
        parts.append(
            f'<div class="msg {msg.role}"><span class="role">{msg.role}</span>'
            f'<p class="text">{_render_text(msg.text, msg.tokens, classes)}</p></div>'
        )
    parts += ["</body>", "</html>", ""]
    return "\n".join(parts)


def load_rules(path: str | Path) -> list[dict]:
    rules = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(rules, list) or any("pattern" not in r or "placeholder" not in r for r in rules):
        raise ValueError("redaction rules must be a JSON list of {pattern, placeholder}")
    return rules


def _placeholder(name: str) -> str:
    name = name.strip().strip("[]").upper()
    return f"[[{name}]]"


def _next_match(pattern: re.Pattern, text: str, pos: int):
    while pos <= len(text):
        m = pattern.search(text, pos)
        if m is None or m.end() > m.start():
            return m
        pos = m.start() + 1
    return None


def redact(text: str, rules: Sequence[dict]) -> str:
    """Replace rule matches with ``[[PLACEHOLDER]]``; overlaps resolve leftmost, then longest,
    then earliest rule."""
    compiled = [(re.compile(r["pattern"]), _placeholder(r["placeholder"])) for r in rules]
    if not compiled:
        return text
    out = []
    pos = 0
    while pos <= len(text):
        best = None
        for order, (pattern, placeholder) in enumerate(compiled):
            m = _next_match(pattern, text, pos)
            if m is None:
                continue
            key = (m.start(), -(m.end() - m.start()), order)
            if best is None or key < best[0]:
                best = (key, m, placeholder)
        if best is None:
            break
        _, m, placeholder = best
        out.append(text[pos:m.start()])
        out.append(placeholder)
        pos = m.end()
    out.append(text[pos:])
    return "".join(out)
