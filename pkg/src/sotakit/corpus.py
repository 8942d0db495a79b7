"""Distant labeling: attach leaderboard annotations to paper contexts and
carve a train/test split with a zero-shot guarantee.

A labeled paper is either answerable (it carries a non-empty set of
(task, dataset, metric, score) quadruples) or unanswerable (a known negative
with no leaderboard).  The split search reshuffles with consecutive seeds
until the test side contains at least one (task, dataset, metric) triple
never seen in training.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .doctaet import DocTaetContext

logger = logging.getLogger(__name__)

SPLIT_ATTEMPTS = 100


def normalize(text: str) -> str:
    """Whitespace-collapsed, casefolded form used for matching values."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True, order=True)
class Quadruple:
    task: str
    dataset: str
    metric: str
    score: str

    def __post_init__(self) -> None:
        for name in ("task", "dataset", "metric", "score"):
            object.__setattr__(self, name, getattr(self, name).strip())
        if not (self.task and self.dataset and self.metric):
            raise ValueError(
                "task, dataset and metric must be non-empty: "
                f"{(self.task, self.dataset, self.metric)!r}")

    @property
    def tdm(self) -> tuple[str, str, str]:
        return (normalize(self.task), normalize(self.dataset),
                normalize(self.metric))


@dataclass(frozen=True)
class LabeledPaper:
    paper_id: str
    context: DocTaetContext
    quadruples: tuple[Quadruple, ...] | None  # None marks unanswerable

    def __post_init__(self) -> None:
        if self.quadruples is not None and len(self.quadruples) == 0:
            raise ValueError(f"{self.paper_id}: answerable paper needs "
                             "at least one quadruple")

    @property
    def answerable(self) -> bool:
        return self.quadruples is not None


class MalformedAnnotationRecord(Exception):
    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class OverlapError(Exception):
    def __init__(self, paper_ids: Iterable[str]) -> None:
        ids = sorted(paper_ids)
        super().__init__(f"papers both annotated and negative: {ids}")
        self.paper_ids = ids


class SplitInfeasible(Exception):
    pass


_ANNOTATION_KEYS = ("paper_id", "task", "dataset", "metric", "score")


@dataclass
class IngestResult:
    by_paper: dict[str, list[Quadruple]]
    rejected: int


def ingest_annotations(path: str | Path) -> IngestResult:
    """Read annotation JSONL into per-paper quadruple lists.

    Structurally broken lines raise MalformedAnnotationRecord; records with
    an empty task/dataset/metric are skipped and counted (with a warning).
    Duplicate quadruples for a paper collapse to the first occurrence.
    """
    by_paper: dict[str, list[Quadruple]] = {}
    seen: dict[str, set[Quadruple]] = {}
    rejected = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedAnnotationRecord(line_no, f"bad JSON: {exc}")
            if not isinstance(record, dict):
                raise MalformedAnnotationRecord(line_no, "record is not an object")
            missing = [k for k in _ANNOTATION_KEYS if k not in record]
            if missing:
                raise MalformedAnnotationRecord(line_no,
                                                f"missing keys {missing}")
            bad_type = [k for k in _ANNOTATION_KEYS
                        if not isinstance(record[k], str)]
            if bad_type:
                raise MalformedAnnotationRecord(line_no,
                                                f"non-string fields {bad_type}")
            if not record["paper_id"].strip():
                raise MalformedAnnotationRecord(line_no, "empty paper_id")
            try:
                quad = Quadruple(record["task"], record["dataset"],
                                 record["metric"], record["score"])
            except ValueError:
                rejected += 1
                logger.warning("line %d: empty task/dataset/metric, skipped",
                               line_no)
                continue
            pid = record["paper_id"].strip()
            bucket = seen.setdefault(pid, set())
            if quad not in bucket:
                bucket.add(quad)
                by_paper.setdefault(pid, []).append(quad)
    return IngestResult(by_paper=by_paper, rejected=rejected)


@dataclass
class LabelResult:
    papers: list[LabeledPaper]
    excluded: list[str]  # papers with neither annotations nor negative status


def label_corpus(
    contexts: Iterable[DocTaetContext],
    annotations: dict[str, list[Quadruple]],
    negatives: set[str],
) -> LabelResult:
    """Join contexts with annotations; negatives become unanswerable papers.

    A paper id in both annotations and negatives raises OverlapError.
    Papers in neither are excluded (returned for accounting).  Output is
    ordered by paper_id.
    """
    overlap = set(annotations) & negatives
    if overlap:
        raise OverlapError(overlap)
    papers: list[LabeledPaper] = []
    excluded: list[str] = []
    seen_context_ids: set[str] = set()
    for ctx in sorted(contexts, key=lambda c: c.paper_id):
        seen_context_ids.add(ctx.paper_id)
        if ctx.paper_id in annotations:
            quads = tuple(annotations[ctx.paper_id])
            papers.append(LabeledPaper(ctx.paper_id, ctx, quads))
        elif ctx.paper_id in negatives:
            papers.append(LabeledPaper(ctx.paper_id, ctx, None))
        else:
            excluded.append(ctx.paper_id)
    orphaned = sorted(set(annotations) - seen_context_ids)
    if orphaned:
        logger.warning("%d annotated papers have no context: %s",
                       len(orphaned), orphaned[:5])
    return LabelResult(papers=papers, excluded=excluded)


@dataclass
class CorpusSplit:
    train: list[LabeledPaper]
    test: list[LabeledPaper]
    seed: int  # effective seed (requested seed + reshuffle attempts used)


def make_split(
    papers: list[LabeledPaper],
    seed: int,
    test_fraction: float = 0.1,
) -> CorpusSplit:
    """Shuffle and split so the test side has an unseen TDM triple.

    Tries seed, seed+1, ... up to SPLIT_ATTEMPTS times, then raises
    SplitInfeasible.  The effective seed is recorded on the result so the
    split can be replayed without searching.
    """
    answerable = sum(1 for p in papers if p.answerable)
    unanswerable = len(papers) - answerable
    if answerable < 2 or unanswerable < 2:
        raise ValueError("need at least 2 answerable and 2 unanswerable "
                         f"papers, have {answerable}/{unanswerable}")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction {test_fraction} outside (0, 1)")
    n_test = int(len(papers) * test_fraction)
    if n_test < 1 or n_test >= len(papers):
        raise ValueError(f"test_fraction {test_fraction} leaves an empty side")

    ordered = sorted(papers, key=lambda p: p.paper_id)
    for attempt in range(SPLIT_ATTEMPTS):
        effective = seed + attempt
        shuffled = list(ordered)
        random.Random(effective).shuffle(shuffled)
        test = shuffled[:n_test]
        train = shuffled[n_test:]
        train_triples = {q.tdm for p in train if p.answerable
                         for q in p.quadruples}
        test_triples = {q.tdm for p in test if p.answerable
                        for q in p.quadruples}
        if test_triples - train_triples:
            return CorpusSplit(train=train, test=test, seed=effective)
    raise SplitInfeasible(
        f"no zero-shot split found in {SPLIT_ATTEMPTS} attempts from seed {seed}")


@dataclass
class CorpusStats:
    papers: int
    papers_with_leaderboards: int
    papers_without_leaderboards: int
    total_tdm_triples: int       # paper-level: distinct TDM per paper, summed
    total_tdms: int              # annotation rows: quadruples, summed
    distinct_tdm_triples: int
    distinct_tasks: int
    distinct_datasets: int
    distinct_metrics: int
    avg_tdm_per_paper: float
    avg_tdms_per_paper: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def compute_stats(papers: Iterable[LabeledPaper]) -> CorpusStats:
    """Corpus statistics over normalized (trimmed, casefolded) TDM values.

    Totals come in two bases on purpose: per-paper distinct triples and raw
    quadruple rows do not agree when a paper repeats a TDM with different
    scores, so both are reported.
    """
    papers = list(papers)
    with_lb = [p for p in papers if p.answerable]
    tdm_union: set[tuple[str, str, str]] = set()
    tasks: set[str] = set()
    datasets: set[str] = set()
    metrics: set[str] = set()
    total_triples = 0
    total_tdms = 0
    for paper in with_lb:
        triples = {q.tdm for q in paper.quadruples}
        total_triples += len(triples)
        total_tdms += len(paper.quadruples)
        tdm_union |= triples
        for t, d, m in triples:
            tasks.add(t)
            datasets.add(d)
            metrics.add(m)
    n_with = len(with_lb)
    return CorpusStats(
        papers=len(papers),
        papers_with_leaderboards=n_with,
        papers_without_leaderboards=len(papers) - n_with,
        total_tdm_triples=total_triples,
        total_tdms=total_tdms,
        distinct_tdm_triples=len(tdm_union),
        distinct_tasks=len(tasks),
        distinct_datasets=len(datasets),
        distinct_metrics=len(metrics),
        avg_tdm_per_paper=(total_triples / n_with) if n_with else 0.0,
        avg_tdms_per_paper=(total_tdms / n_with) if n_with else 0.0,
    )
