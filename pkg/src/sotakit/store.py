"""JSONL readers and writers for the pipeline's on-disk formats.

Three record shapes live here: structured docs (ingest output), labeled
corpora (contexts plus answer sets), and prompt instances (the
input/target pairs a backend trains or predicts on).  Writers emit one
sorted-key JSON object per line so files diff cleanly and reruns are
byte-stable.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import LabeledPaper, Quadruple
from .doctaet import DocTaetContext
from .instructions import PromptInstance
from .latex import StructuredDoc, TableInfo


def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n"


def _read_lines(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def write_docs(docs: Iterable[tuple[str, StructuredDoc]],
               path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for paper_id, doc in docs:
            fh.write(_dump({
                "paper_id": paper_id,
                "title": doc.title,
                "abstract": doc.abstract,
                "sections": [[h, b] for h, b in doc.sections],
                "tables": [dataclasses.asdict(t) for t in doc.tables],
            }))


def read_docs(path: str | Path) -> list[tuple[str, StructuredDoc]]:
    out = []
    for rec in _read_lines(path):
        doc = StructuredDoc(
            title=rec["title"],
            abstract=rec["abstract"],
            sections=[(h, b) for h, b in rec["sections"]],
            tables=[TableInfo(t["caption"], tuple(t["header_cells"]),
                              t["column_count"]) for t in rec["tables"]],
        )
        out.append((rec["paper_id"], doc))
    return out


def _context_to_dict(ctx: DocTaetContext) -> dict:
    return dataclasses.asdict(ctx)


def _context_from_dict(rec: dict) -> DocTaetContext:
    return DocTaetContext(**rec)


def write_corpus(papers: Iterable[LabeledPaper], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for paper in papers:
            label = None
            if paper.quadruples is not None:
                label = [
                    {"task": q.task, "dataset": q.dataset,
                     "metric": q.metric, "score": q.score}
                    for q in paper.quadruples
                ]
            fh.write(_dump({
                "paper_id": paper.paper_id,
                "context": _context_to_dict(paper.context),
                "label": label,
            }))


def read_corpus(path: str | Path) -> list[LabeledPaper]:
    papers = []
    for rec in _read_lines(path):
        label = rec["label"]
        quads = None
        if label is not None:
            quads = tuple(Quadruple(q["task"], q["dataset"],
                                    q["metric"], q["score"]) for q in label)
        papers.append(LabeledPaper(
            paper_id=rec["paper_id"],
            context=_context_from_dict(rec["context"]),
            quadruples=quads,
        ))
    return papers


def write_instances(instances: Iterable[PromptInstance],
                    path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(_dump({
                "paper_id": inst.paper_id,
                "template_id": inst.template_id,
                "input": inst.input_text,
                "target": inst.target_text,
            }))


def read_instances(path: str | Path) -> list[PromptInstance]:
    return [
        PromptInstance(rec["paper_id"], rec["template_id"],
                       rec["input"], rec["target"])
        for rec in _read_lines(path)
    ]
