"""Instruction templates and prompt instantiation.

The 15 template bodies are reproduced byte-for-byte from the FLAN 2022
collection's SQuAD_v2 (S1-S8) and DROP (D1-D7) instruction sets, with
``{Context}`` / ``{Question}`` placeholders and ``\\n`` kept as a literal
backslash-n escape that only becomes a real newline at render time.  S4 is
a single template whose body concatenates two patterns (and carries a stray
apostrophe after the first question slot, present in the source collection).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import LabeledPaper, Quadruple
from .doctaet import DocTaetContext

SOTA_QUESTION = (
    "What are the values for the following properties to construct a "
    "Leaderboard for the model introduced in this article: task, dataset, "
    "metric, and score?"
)

UNANSWERABLE = "unanswerable"

MAX_REDRAWS = 1000


@dataclass(frozen=True)
class InstructionTemplate:
    template_id: str
    family: str  # "squad" | "drop" | "none"
    body: str

    def __post_init__(self) -> None:
        expected = 2 if self.template_id == "S4" else 1
        for slot in ("{Context}", "{Question}"):
            found = self.body.count(slot)
            if found != expected:
                raise ValueError(
                    f"{self.template_id}: {slot} appears {found} times, "
                    f"expected {expected}")


_S4_BODY = (
    '{Context} \\n\\n Please answer a question about this article. '
    'If the question is unanswerable, say "unanswerable". {Question}\''
    "\n"
    '{Context}  \\n Try to answer this question if possible '
    '(otherwise reply "unanswerable"): {Question}'
)

TEMPLATES: tuple[InstructionTemplate, ...] = (
    InstructionTemplate("S1", "squad",
        '{Context} \\n\\n Please answer a question about this article. '
        'If the question is unanswerable, say "unanswerable". {Question}'),
    InstructionTemplate("S2", "squad",
        '{Context} \\n {Question} If the question is unanswerable, '
        'say "unanswerable"'),
    InstructionTemplate("S3", "squad",
        '{Context}\\n Try to answer this question if possible '
        '(otherwise reply "unanswerable"): {Question}'),
    InstructionTemplate("S4", "squad", _S4_BODY),
    InstructionTemplate("S5", "squad",
        '{Context}\\n If it is possible to answer this question, '
        'answer it for me (else, reply "unanswerable"): {Question}'),
    InstructionTemplate("S6", "squad",
        '{Context}\\n \\n Answer this question, if possible '
        '(if impossible, reply "unanswerable"): {Question}'),
    InstructionTemplate("S7", "squad",
        'Read this: {Context}\\n \\n {Question} \\n What is the answer? '
        '(If it cannot be answered, return "unanswerable")'),
    InstructionTemplate("S8", "squad",
        'Read this: {Context}\\n Now answer this question, if there is an '
        'answer (If it cannot be answered, return "unanswerable"): '
        '{Question}'),
    InstructionTemplate("D1", "drop",
        'Answer based on context:\\n \\n {Context}\\n \\n {Question}'),
    InstructionTemplate("D2", "drop",
        '{Context}\\n \\n Answer this question based on the article: '
        '{Question}'),
    InstructionTemplate("D3", "drop", '{Context}\\n \\n {Question}'),
    InstructionTemplate("D4", "drop",
        '{Context}\\n Answer this question: {Question}'),
    InstructionTemplate("D5", "drop",
        'Read this article and answer this question {Context}\\n {Question}'),
    InstructionTemplate("D6", "drop",
        '{Context}\\n \\n Based on the above article, answer a question. '
        '{Question}'),
    InstructionTemplate("D7", "drop",
        'Context: {Context}\\n \\n Question: {Question}\\n \\n Answer:'),
)

# Bare pairing used for the no-instruction baseline.
NONE_TEMPLATE = InstructionTemplate("NONE", "none", "{Context}\\n{Question}")

TEMPLATE_INDEX: dict[str, InstructionTemplate] = {
    t.template_id: t for t in TEMPLATES + (NONE_TEMPLATE,)
}


def templates_for_families(families: Iterable[str]) -> list[InstructionTemplate]:
    wanted = {f.lower() for f in families}
    unknown = wanted - {"squad", "drop", "none"}
    if unknown:
        raise ValueError(f"unknown template families: {sorted(unknown)}")
    chosen = [t for t in TEMPLATES + (NONE_TEMPLATE,) if t.family in wanted]
    return chosen


def render(template: InstructionTemplate,
           context: DocTaetContext | str,
           question: str = SOTA_QUESTION) -> str:
    """Substitute the context and question into a template body.

    The literal \\n escapes become newlines first so that backslash-n
    sequences inside the substituted text are left untouched.
    """
    text = context.rendered if isinstance(context, DocTaetContext) else context
    body = template.body.replace("\\n", "\n")
    return body.replace("{Context}", text).replace("{Question}", question)


def make_target(quadruples: Sequence[Quadruple] | None) -> str:
    """Canonical target string: "unanswerable" or a compact JSON array.

    Quadruples are sorted by (task, dataset, metric, score); objects keep
    the key order task, dataset, metric, score; no whitespace; non-ASCII
    preserved.
    """
    if quadruples is None:
        return UNANSWERABLE
    ordered = sorted(quadruples)
    payload = [
        {"task": q.task, "dataset": q.dataset,
         "metric": q.metric, "score": q.score}
        for q in ordered
    ]
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class PromptInstance:
    paper_id: str
    template_id: str
    input_text: str
    target_text: str


def instantiate(
    papers: Iterable[LabeledPaper],
    templates: Sequence[InstructionTemplate] = TEMPLATES,
    question: str = SOTA_QUESTION,
) -> list[PromptInstance]:
    """Cross every paper with every template, ordered by (paper, template)."""
    out: list[PromptInstance] = []
    ordered_templates = sorted(templates, key=lambda t: t.template_id)
    for paper in sorted(papers, key=lambda p: p.paper_id):
        target = make_target(paper.quadruples)
        for template in ordered_templates:
            out.append(PromptInstance(
                paper_id=paper.paper_id,
                template_id=template.template_id,
                input_text=render(template, paper.context, question),
                target_text=target,
            ))
    return out


def half_sample(instances: Sequence[PromptInstance], seed: int) -> list[PromptInstance]:
    """Keep exactly floor(n/2) instances, at least one per paper.

    A single seeded RNG stream draws candidate index sets; draws violating
    the per-paper floor are discarded and redrawn (deterministically) up to
    MAX_REDRAWS times.  Original instance order is preserved.
    """
    n = len(instances)
    target = n // 2
    paper_ids = {inst.paper_id for inst in instances}
    if len(paper_ids) > target:
        raise ValueError(
            f"cannot keep one instance per paper: {len(paper_ids)} papers "
            f"but only {target} slots")
    rng = random.Random(seed)
    for _ in range(MAX_REDRAWS):
        chosen = rng.sample(range(n), target)
        kept_papers = {instances[i].paper_id for i in chosen}
        if kept_papers == paper_ids:
            return [instances[i] for i in sorted(chosen)]
    raise RuntimeError(
        f"no per-paper-covering half sample in {MAX_REDRAWS} draws")
