"""Condense a structured document into a Title/Abstract/ExpSetup/TableInfo
context string under a token budget.

Tokens are regex words: runs of word characters, dotted numerals kept whole
(so "85.4" is one token), and any other non-space character standing alone.
The rendered context is "Title: ... Abstract: ... ExpSetup: ... TableInfo: ..."
joined by single spaces; the four labels cost a fixed 8 tokens.  When the
budget is tight, whole tokens are dropped from the end of fields in the
priority order Title > Abstract > TableInfo > ExpSetup (ExpSetup truncated
first, Title last).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .latex import StructuredDoc

TOKEN_RE = re.compile(r"\d+(?:\.\d+)+|\w+|[^\w\s]")

DEFAULT_BUDGET = 480
MIN_BUDGET = 32

# A section feeds ExpSetup when its lowercased heading contains any of these.
DEFAULT_HEADING_TERMS: tuple[str, ...] = (
    "experiment", "setup", "evaluation", "result",
    "implementation", "training detail", "ablation",
)

_SENTINELS = ("Title:", "Abstract:", "ExpSetup:", "TableInfo:")
_SENTINEL_COST = sum(len(TOKEN_RE.findall(s)) for s in _SENTINELS)


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def count_tokens(text: str) -> int:
    return len(TOKEN_RE.findall(text))


@dataclass(frozen=True)
class DocTaetContext:
    paper_id: str
    title: str
    abstract: str
    exp_setup: str
    table_info: str
    rendered: str
    token_count: int


def _table_info_text(doc: StructuredDoc) -> str:
    parts = []
    for table in doc.tables:
        piece = " ".join([table.caption] + list(table.header_cells))
        parts.append(" ".join(piece.split()))
    return " ".join(p for p in parts if p)


def _exp_setup_text(doc: StructuredDoc, heading_terms: tuple[str, ...]) -> str:
    bodies = [body for heading, body in doc.sections
              if any(term in heading.lower() for term in heading_terms)]
    return " ".join(b for b in bodies if b)


def extract_doctaet(
    doc: StructuredDoc,
    budget: int = DEFAULT_BUDGET,
    *,
    paper_id: str = "",
    heading_terms: tuple[str, ...] = DEFAULT_HEADING_TERMS,
) -> DocTaetContext:
    """Build the budgeted context for one document.

    Raises ValueError for budgets below MIN_BUDGET.
    """
    if budget < MIN_BUDGET:
        raise ValueError(f"budget {budget} below minimum {MIN_BUDGET}")

    fields = {
        "title": tokenize(doc.title),
        "abstract": tokenize(doc.abstract),
        "exp_setup": tokenize(_exp_setup_text(doc, heading_terms)),
        "table_info": tokenize(_table_info_text(doc)),
    }

    remaining = budget - _SENTINEL_COST
    kept: dict[str, list[str]] = {}
    for name in ("title", "abstract", "table_info", "exp_setup"):
        take = min(len(fields[name]), remaining)
        kept[name] = fields[name][:take]
        remaining -= take

    parts: list[str] = []
    for sentinel, name in zip(_SENTINELS,
                              ("title", "abstract", "exp_setup", "table_info")):
        parts.append(sentinel)
        parts.extend(kept[name])
    rendered = " ".join(parts)
    return DocTaetContext(
        paper_id=paper_id,
        title=" ".join(kept["title"]),
        abstract=" ".join(kept["abstract"]),
        exp_setup=" ".join(kept["exp_setup"]),
        table_info=" ".join(kept["table_info"]),
        rendered=rendered,
        token_count=count_tokens(rendered),
    )
