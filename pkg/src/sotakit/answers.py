"""Parse generated answers into quadruple sets, unanswerable, or malformed.

Parsing is strict-first: the trimmed text must be "unanswerable" (case
insensitive, trailing period tolerated) or a JSON array of objects.  When
strict parsing fails, one salvage pass extracts the first balanced [...]
span (string-aware) and retries.  Objects missing keys contribute empty
fields; quadruples with an empty task/dataset/metric are dropped and
counted.  Anything else is malformed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

from .corpus import Quadruple

ANSWER_SET = "answer_set"
UNANSWERABLE = "unanswerable"
MALFORMED = "malformed"

_QUAD_KEYS = ("task", "dataset", "metric", "score")


@dataclass(frozen=True)
class ParsedAnswer:
    verdict: str  # ANSWER_SET | UNANSWERABLE | MALFORMED
    quadruples: tuple[Quadruple, ...] = ()
    reason: str = ""
    salvage_applied: bool = False
    dropped: int = 0


class Answerability(NamedTuple):
    answerable: bool
    scorable: bool


def _is_unanswerable(text: str) -> bool:
    t = text.strip()
    if t.endswith("."):
        t = t[:-1]
    return t.strip().casefold() == "unanswerable"


def _coerce(value: object) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):  # bool is an int; keep it out of numbers
        return ""
    if isinstance(value, (int, float)):
        return str(value)
    return ""


def _build(items: list, salvaged: bool) -> ParsedAnswer:
    quads: list[Quadruple] = []
    seen: set[Quadruple] = set()
    dropped = 0
    for item in items:
        if not isinstance(item, dict):
            dropped += 1
            continue
        fields = {k: _coerce(item.get(k)).strip() for k in _QUAD_KEYS}
        if not (fields["task"] and fields["dataset"] and fields["metric"]):
            dropped += 1
            continue
        quad = Quadruple(**fields)
        if quad not in seen:
            seen.add(quad)
            quads.append(quad)
    if not quads:
        return ParsedAnswer(MALFORMED, reason="no usable quadruples",
                            salvage_applied=salvaged, dropped=dropped)
    return ParsedAnswer(ANSWER_SET, quadruples=tuple(quads),
                        salvage_applied=salvaged, dropped=dropped)


def _first_balanced_span(text: str) -> str | None:
    """First balanced [...] span, ignoring brackets inside JSON strings."""
    start = -1
    depth = 0
    in_string = False
    escaped = False
    for i, c in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
            continue
        if c == '"':
            if depth > 0:
                in_string = True
            continue
        if c == "[":
            if depth == 0:
                start = i
            depth += 1
        elif c == "]" and depth > 0:
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    return None


def parse_answer(text: str) -> ParsedAnswer:
    if _is_unanswerable(text):
        return ParsedAnswer(UNANSWERABLE)
    t = text.strip()
    try:
        data = json.loads(t)
    except json.JSONDecodeError:
        data = None
    if isinstance(data, list):
        return _build(data, salvaged=False)

    span = _first_balanced_span(t)
    if span is not None:
        try:
            salvaged = json.loads(span)
        except json.JSONDecodeError:
            salvaged = None
        if isinstance(salvaged, list):
            return _build(salvaged, salvaged=True)
    return ParsedAnswer(MALFORMED, reason="no JSON array found")


def classify_answerable(parsed: ParsedAnswer) -> Answerability:
    """Answerability for accuracy, scorability for F1.

    Malformed output claims an answer (answerable) but earns no F1 credit
    (not scorable).
    """
    if parsed.verdict == UNANSWERABLE:
        return Answerability(answerable=False, scorable=False)
    if parsed.verdict == MALFORMED:
        return Answerability(answerable=True, scorable=False)
    return Answerability(answerable=True, scorable=True)
