"""Assemble evaluation reports from a generation run and gold labels.

A report scores every (paper, template) pair found in the run: general
accuracy of the answerable-vs-unanswerable verdict, mean ROUGE F-measures
of the raw output against the canonical target string, and element-wise
F1 (micro, with macro companions) in exact and partial modes.  Pairs the
run should have covered but did not are listed as gaps, never silently
skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .answers import ANSWER_SET, MALFORMED, UNANSWERABLE, ParsedAnswer, parse_answer
from .corpus import LabeledPaper
from .instructions import make_target
from .metrics import (ELEMENTS, MODES, F1Row, element_f1, element_f1_macro,
                      general_accuracy, rouge_l, rouge_lsum, rouge_n,
                      tokenize_for_rouge)

REPORT_SCHEMA = "sota-eval/1"

POOLED_ID = "ALL"


@dataclass
class TemplateReport:
    template_id: str
    pairs: int
    counts: dict[str, int]
    accuracy: float
    rouge: dict[str, float]
    f1: list[F1Row] = field(default_factory=list)
    f1_macro: dict[str, float] = field(default_factory=dict)


@dataclass
class EvaluationReport:
    per_template: list[TemplateReport]
    pooled: TemplateReport
    gaps: list[tuple[str, str]]        # (paper_id, template_id) missing
    unexpected: list[tuple[str, str]]  # pairs in the run but not expected


class EmptyRunError(Exception):
    pass


def _score_block(pairs: dict[tuple[str, str], ParsedAnswer],
                 targets: dict[tuple[str, str], str],
                 outputs: dict[tuple[str, str], str],
                 gold_answerable: dict[tuple[str, str], bool],
                 gold_sets: dict[tuple[str, str], tuple],
                 template_id: str) -> TemplateReport:
    n = len(pairs)
    counts = {ANSWER_SET: 0, UNANSWERABLE: 0, MALFORMED: 0,
              "salvaged": 0, "dropped_fragments": 0}
    for parsed in pairs.values():
        counts[parsed.verdict] += 1
        if parsed.salvage_applied:
            counts["salvaged"] += 1
        counts["dropped_fragments"] += parsed.dropped

    sums = {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0, "rougeLsum": 0.0}
    for key, output in outputs.items():
        target = targets[key]
        pred_toks = tokenize_for_rouge(output)
        ref_toks = tokenize_for_rouge(target)
        sums["rouge1"] += rouge_n(pred_toks, ref_toks, 1).fmeasure
        sums["rouge2"] += rouge_n(pred_toks, ref_toks, 2).fmeasure
        sums["rougeL"] += rouge_l(pred_toks, ref_toks).fmeasure
        sums["rougeLsum"] += rouge_lsum(output, target).fmeasure
    rouge = {k: (v / n if n else 0.0) for k, v in sums.items()}

    accuracy = general_accuracy(pairs, gold_answerable)

    f1_rows: list[F1Row] = []
    f1_macro: dict[str, float] = {}
    for mode in MODES:
        for element in ELEMENTS:
            f1_rows.append(element_f1(pairs, gold_sets, element, mode))
            f1_macro[f"{element}/{mode}"] = element_f1_macro(
                pairs, gold_sets, element, mode)
    return TemplateReport(template_id=template_id, pairs=n, counts=counts,
                          accuracy=accuracy, rouge=rouge,
                          f1=f1_rows, f1_macro=f1_macro)


def build_report(run_lines: list[dict],
                 gold_papers: list[LabeledPaper]) -> EvaluationReport:
    """Score run output lines ({paper_id, template_id, output}) against gold.

    The expected pair set is gold papers crossed with the template ids
    present in the run; anything missing is a gap, anything extra is
    reported as unexpected and left unscored.
    """
    gold = {p.paper_id: p for p in gold_papers}
    scored_lines = [l for l in run_lines if "output" in l]
    if not scored_lines:
        raise EmptyRunError("run contains no scorable outputs")
    template_ids = sorted({l["template_id"] for l in scored_lines})
    expected = {(pid, tid) for pid in gold for tid in template_ids}

    present: dict[tuple[str, str], str] = {}
    unexpected: list[tuple[str, str]] = []
    for line in scored_lines:
        key = (line["paper_id"], line["template_id"])
        if key not in expected:
            unexpected.append(key)
            continue
        present.setdefault(key, line["output"])
    gaps = sorted(expected - set(present))

    parsed = {key: parse_answer(output) for key, output in present.items()}
    targets = {key: make_target(gold[key[0]].quadruples) for key in present}
    answerable = {key: gold[key[0]].answerable for key in present}
    gold_sets = {key: gold[key[0]].quadruples
                 for key in present if gold[key[0]].answerable}

    per_template: list[TemplateReport] = []
    for tid in template_ids:
        keys = [k for k in present if k[1] == tid]
        per_template.append(_score_block(
            {k: parsed[k] for k in keys},
            targets, {k: present[k] for k in keys},
            {k: answerable[k] for k in keys},
            {k: gold_sets[k] for k in keys if k in gold_sets},
            tid))
    pooled = _score_block(parsed, targets, present, answerable,
                          gold_sets, POOLED_ID)
    return EvaluationReport(per_template=per_template, pooled=pooled,
                            gaps=gaps, unexpected=sorted(set(unexpected)))


def to_json(report: EvaluationReport) -> str:
    """Canonical JSON form: sorted keys, 2-space indent, trailing newline."""

    def block(tr: TemplateReport) -> dict:
        return {
            "template_id": tr.template_id,
            "pairs": tr.pairs,
            "counts": tr.counts,
            "accuracy": tr.accuracy,
            "rouge": tr.rouge,
            "f1_micro": [row._asdict() for row in tr.f1],
            "f1_macro": tr.f1_macro,
        }

    payload = {
        "schema": REPORT_SCHEMA,
        "per_template": [block(t) for t in report.per_template],
        "pooled": block(report.pooled),
        "gaps": [list(g) for g in report.gaps],
        "unexpected": [list(u) for u in report.unexpected],
    }
    return json.dumps(payload, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def _pct(value: float, baseline: float | None) -> str:
    cell = f"{100 * value:.2f}"
    if baseline is not None:
        cell += f"/{100 * baseline:.2f}"
    return cell


def _table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def fmt(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in rows)
    return "\n".join(lines)


def render_text_tables(report: EvaluationReport,
                       baseline: EvaluationReport | None = None) -> str:
    """The two summary tables: accuracy+ROUGE and element F1.

    With a baseline report, cells read "ours/baseline"; templates absent
    from the baseline show "-" on the right side.
    """
    base_blocks: dict[str, TemplateReport] = {}
    if baseline is not None:
        base_blocks = {t.template_id: t for t in baseline.per_template}
        base_blocks[POOLED_ID] = baseline.pooled

    blocks = list(report.per_template) + [report.pooled]

    rows1 = []
    for tr in blocks:
        base = base_blocks.get(tr.template_id)
        def cell(value: float, base_value) -> str:
            if baseline is None:
                return _pct(value, None)
            return _pct(value, base_value) if base is not None \
                else f"{100 * value:.2f}/-"
        rows1.append([
            tr.template_id, str(tr.pairs),
            cell(tr.accuracy, base.accuracy if base else None),
            *(cell(tr.rouge[k], base.rouge[k] if base else None)
              for k in ("rouge1", "rouge2", "rougeL", "rougeLsum")),
        ])
    table1 = _table(
        ["Template", "Pairs", "Accuracy", "ROUGE-1", "ROUGE-2",
         "ROUGE-L", "ROUGE-Lsum"], rows1)

    rows2 = []
    for tr in blocks:
        base = base_blocks.get(tr.template_id)
        by_key = {(r.element, r.mode): r for r in tr.f1}
        base_by_key = {(r.element, r.mode): r for r in base.f1} if base else {}
        for mode in MODES:
            cells = [tr.template_id, mode]
            for element in ELEMENTS:
                row = by_key[(element, mode)]
                if baseline is None:
                    cells.append(_pct(row.f1, None))
                else:
                    base_row = base_by_key.get((element, mode))
                    cells.append(_pct(row.f1, base_row.f1)
                                 if base_row is not None
                                 else f"{100 * row.f1:.2f}/-")
            rows2.append(cells)
    table2 = _table(
        ["Template", "Mode", "Task", "Dataset", "Metric", "Score", "Overall"],
        rows2)

    parts = ["Answerability accuracy and ROUGE F-measure (%)", "", table1, "",
             "Element-wise F1 (%)", "", table2]
    if report.gaps:
        gap_lines = [f"  {pid} x {tid}" for pid, tid in report.gaps]
        parts += ["", f"Coverage gaps ({len(report.gaps)} pairs missing):",
                  *gap_lines]
    if report.unexpected:
        parts += ["", f"Unexpected pairs ({len(report.unexpected)}):",
                  *(f"  {pid} x {tid}" for pid, tid in report.unexpected)]
    return "\n".join(parts) + "\n"
