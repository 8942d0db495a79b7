"""Aggregate (task, dataset, metric, score) quadruples into leaderboards.

Quadruples group by normalized (task, dataset, metric).  Scores stay
verbatim strings for display; ranking parses the first decimal number out
of each score and sorts best-first (descending, unless the metric name
contains a lower-is-better token), ties broken by paper id, unparseable
scores ranked last.  Ranks are dense: equal parsed values share a rank.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import Quadruple, normalize

LOWER_BETTER_TOKENS = frozenset({
    "error", "loss", "perplexity", "wer", "cer", "rmse", "mse", "mae", "fid",
})

_NUMBER_RE = re.compile(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)")

FORMATS = ("markdown", "csv", "json")


def parse_score(score: str) -> float | None:
    """First decimal number in the string, or None.

    Percent signs are not interpreted; "85.4%" parses as 85.4.
    """
    m = _NUMBER_RE.search(score)
    return float(m.group(0)) if m else None


@dataclass(frozen=True)
class LeaderboardRow:
    rank: int
    paper_id: str
    score: str            # verbatim
    value: float | None   # parsed, None when unparseable


@dataclass(frozen=True)
class Leaderboard:
    task: str
    dataset: str
    metric: str
    lower_is_better: bool
    rows: tuple[LeaderboardRow, ...]


def metric_is_lower_better(metric: str) -> bool:
    tokens = re.findall(r"\w+", normalize(metric))
    return any(tok in LOWER_BETTER_TOKENS for tok in tokens)


def build_leaderboards(
    entries: Iterable[tuple[str, Quadruple]],
) -> list[Leaderboard]:
    """Partition (paper_id, quadruple) entries into ranked leaderboards."""
    groups: dict[tuple[str, str, str], list[tuple[str, Quadruple]]] = {}
    for paper_id, quad in entries:
        groups.setdefault(quad.tdm, []).append((paper_id, quad))

    boards: list[Leaderboard] = []
    for key in sorted(groups):
        members = groups[key]
        lower = metric_is_lower_better(key[2])
        parsed = [(paper_id, quad, parse_score(quad.score))
                  for paper_id, quad in members]
        scored = [m for m in parsed if m[2] is not None]
        unscored = [m for m in parsed if m[2] is None]
        scored.sort(key=lambda m: (m[2] if lower else -m[2], m[0], m[1].score))
        unscored.sort(key=lambda m: (m[0], m[1].score))

        rows: list[LeaderboardRow] = []
        rank = 0
        last_value: float | None = None
        for paper_id, quad, value in scored:
            if last_value is None or value != last_value:
                rank += 1
                last_value = value
            rows.append(LeaderboardRow(rank, paper_id, quad.score, value))
        unscored_rank = rank + 1
        for paper_id, quad, value in unscored:
            rows.append(LeaderboardRow(unscored_rank, paper_id,
                                       quad.score, None))
        boards.append(Leaderboard(
            task=key[0], dataset=key[1], metric=key[2],
            lower_is_better=lower, rows=tuple(rows)))
    return boards


def _slugify(parts: Iterable[str]) -> str:
    raw = "-".join(parts)
    slug = re.sub(r"[^a-z0-9]+", "-", raw.casefold()).strip("-")
    return slug or "board"


def _to_markdown(board: Leaderboard) -> str:
    lines = [
        f"# {board.task} / {board.dataset} / {board.metric}",
        "",
        f"Direction: {'lower' if board.lower_is_better else 'higher'} is better",
        "",
        "| Rank | Paper | Score |",
        "| --- | --- | --- |",
    ]
    for row in board.rows:
        lines.append(f"| {row.rank} | {row.paper_id} | {row.score} |")
    return "\n".join(lines) + "\n"


def _to_csv(board: Leaderboard) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rank", "paper_id", "score", "parsed_value"])
    for row in board.rows:
        writer.writerow([row.rank, row.paper_id, row.score,
                         "" if row.value is None else row.value])
    return buf.getvalue()


def _to_json(board: Leaderboard) -> str:
    payload = {
        "task": board.task,
        "dataset": board.dataset,
        "metric": board.metric,
        "lower_is_better": board.lower_is_better,
        "rows": [
            {"rank": r.rank, "paper_id": r.paper_id, "score": r.score,
             "parsed_value": r.value}
            for r in board.rows
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


_WRITERS = {"markdown": (_to_markdown, "md"), "csv": (_to_csv, "csv"),
            "json": (_to_json, "json")}


def emit_leaderboards(
    boards: list[Leaderboard],
    out_dir: str | Path,
    formats: Iterable[str] = FORMATS,
) -> Path:
    """Write one file per board and format, plus index.json; returns the
    index path.  Slugs collide deterministically: -2, -3, ..."""
    formats = list(formats)
    unknown = set(formats) - set(_WRITERS)
    if unknown:
        raise ValueError(f"unknown formats: {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    taken: set[str] = set()
    index = []
    for board in boards:
        slug = _slugify((board.task, board.dataset, board.metric))
        if slug in taken:
            k = 2
            while f"{slug}-{k}" in taken:
                k += 1
            slug = f"{slug}-{k}"
        taken.add(slug)
        files = {}
        for fmt in formats:
            writer, ext = _WRITERS[fmt]
            path = out_dir / f"{slug}.{ext}"
            path.write_text(writer(board), encoding="utf-8")
            files[fmt] = path.name
        index.append({
            "slug": slug, "task": board.task, "dataset": board.dataset,
            "metric": board.metric, "rows": len(board.rows), "files": files,
        })
    index_path = out_dir / "index.json"
    index_path.write_text(
        json.dumps(index, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")
    return index_path
