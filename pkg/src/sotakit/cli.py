"""Command line pipeline: ingest -> build -> instantiate -> predict ->
evaluate, plus leaderboard aggregation and a one-shot answer parser.

Every subcommand that writes artifacts also records an echo of its
effective options with a sha256 hash, so a run can be identified and
reproduced from its outputs alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import answers, corpus, doctaet, gateway, instructions, latex
from . import leaderboard as lb
from . import report as report_mod
from . import store

logger = logging.getLogger(__name__)

CONFIG_SCHEMA = "sota-config/1"


class CliError(Exception):
    pass


def _write_config_echo(path: Path, subcommand: str, options: dict) -> None:
    payload = {
        "schema": CONFIG_SCHEMA,
        "subcommand": subcommand,
        "options": options,
        "config_hash": gateway.config_hash(options),
    }
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               ensure_ascii=False) + "\n", encoding="utf-8")


def _load_bundles(root: Path, manifest: dict[str, str]):
    if not root.is_dir():
        raise CliError(f"{root} is not a directory")
    for paper_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        files = {
            str(f.relative_to(paper_dir)): f.read_text(encoding="utf-8",
                                                       errors="replace")
            for f in sorted(paper_dir.rglob("*.tex"))
        }
        if not files:
            continue
        paper_id = paper_dir.name
        if paper_id in manifest:
            main = manifest[paper_id]
        else:
            main = latex.detect_main_file(paper_id, files)
        yield latex.PaperSource(paper_id=paper_id, files=files, main_file=main)


def cmd_ingest(args: argparse.Namespace) -> int:
    root = Path(args.corpus_root)
    manifest: dict[str, str] = {}
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    docs: list[tuple[str, latex.StructuredDoc]] = []
    failures: list[dict[str, str]] = []
    for source in _load_bundles(root, manifest):
        try:
            docs.append((source.paper_id, latex.parse_bundle(source)))
        except latex.LatexIngestError as exc:
            failures.append({"paper_id": exc.paper_id, "error": str(exc)})
            logger.warning("ingest failed: %s", exc)
    store.write_docs(docs, out)
    failures_path = Path(args.failures or f"{args.out}.failures.json")
    failures_path.write_text(
        json.dumps(failures, sort_keys=True, indent=2, ensure_ascii=False)
        + "\n", encoding="utf-8")
    _write_config_echo(Path(str(out) + ".config.json"), "ingest", {
        "corpus_root": args.corpus_root, "out": args.out,
        "manifest": args.manifest, "failures": str(failures_path),
    })
    print(f"ingested {len(docs)} papers, {len(failures)} failures")
    if not docs:
        raise CliError("no paper parsed successfully")
    return 0


def cmd_build(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    docs = store.read_docs(args.docs)
    contexts = [
        doctaet.extract_doctaet(doc, args.budget, paper_id=paper_id)
        for paper_id, doc in docs
    ]
    ingest_result = corpus.ingest_annotations(args.annotations)
    negatives = {
        line.strip()
        for line in Path(args.negatives).read_text(encoding="utf-8").splitlines()
        if line.strip()
    }
    labeled = corpus.label_corpus(contexts, ingest_result.by_paper, negatives)
    split = corpus.make_split(labeled.papers, args.seed, args.test_fraction)
    store.write_corpus(labeled.papers, out_dir / "corpus.jsonl")
    store.write_corpus(split.train, out_dir / "train.jsonl")
    store.write_corpus(split.test, out_dir / "test.jsonl")
    stats = corpus.compute_stats(labeled.papers)
    (out_dir / "stats.json").write_text(
        json.dumps(stats.to_dict(), sort_keys=True, indent=2,
                   ensure_ascii=False) + "\n", encoding="utf-8")
    _write_config_echo(out_dir / "config.json", "build", {
        "docs": args.docs, "annotations": args.annotations,
        "negatives": args.negatives, "out": args.out, "budget": args.budget,
        "seed": args.seed, "test_fraction": args.test_fraction,
        "effective_seed": split.seed,
        "rejected_annotations": ingest_result.rejected,
        "excluded_papers": labeled.excluded,
    })
    print(f"built corpus: {len(labeled.papers)} papers "
          f"({stats.papers_with_leaderboards} answerable), "
          f"train {len(split.train)} / test {len(split.test)}, "
          f"effective seed {split.seed}")
    return 0


def _select_templates(args: argparse.Namespace):
    if args.templates:
        wanted = [t.strip() for t in args.templates.split(",") if t.strip()]
        unknown = [t for t in wanted if t not in instructions.TEMPLATE_INDEX]
        if unknown:
            raise CliError(f"unknown template ids: {unknown}")
        return [instructions.TEMPLATE_INDEX[t] for t in wanted]
    if args.families:
        families = [f.strip() for f in args.families.split(",") if f.strip()]
        try:
            return instructions.templates_for_families(families)
        except ValueError as exc:
            raise CliError(str(exc))
    return list(instructions.TEMPLATES)


def cmd_instantiate(args: argparse.Namespace) -> int:
    papers = store.read_corpus(args.corpus)
    templates = _select_templates(args)
    instances = instructions.instantiate(papers, templates)
    if args.half:
        instances = instructions.half_sample(instances, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    store.write_instances(instances, out)
    _write_config_echo(Path(str(out) + ".config.json"), "instantiate", {
        "corpus": args.corpus, "out": args.out,
        "templates": args.templates, "families": args.families,
        "half": args.half, "seed": args.seed,
        "instances": len(instances),
    })
    print(f"wrote {len(instances)} instances "
          f"({len(papers)} papers x {len(templates)} templates"
          f"{', halved' if args.half else ''})")
    return 0


def _make_backend(args: argparse.Namespace) -> gateway.Backend:
    if args.backend == "echo":
        return gateway.EchoBackend()
    if args.backend == "replay":
        if not args.replay_file:
            raise CliError("--replay-file is required with --backend replay")
        return gateway.FixtureReplayBackend.from_file(args.replay_file)
    if args.backend == "http":
        try:
            return gateway.HttpBackend(args.backend_url)
        except ValueError as exc:
            raise CliError(str(exc))
    raise CliError(f"unknown backend {args.backend!r}")


def cmd_predict(args: argparse.Namespace) -> int:
    instances = store.read_instances(args.instances)
    backend = _make_backend(args)
    requests = []
    meta: dict[str, dict] = {}
    for inst in instances:
        rid = f"{inst.paper_id}::{inst.template_id}"
        requests.append(gateway.GenerationRequest(
            request_id=rid, input_text=inst.input_text,
            max_new_tokens=args.max_new_tokens,
            temperature=args.temperature))
        meta[rid] = {"paper_id": inst.paper_id,
                     "template_id": inst.template_id}
    batch = gateway.generate_batch(
        backend, requests, parallelism=args.jobs,
        retry_limit=args.retry_limit,
        on_error="collect" if args.collect_errors else "raise")
    config = {
        "instances": args.instances, "out": args.out,
        "backend": args.backend, "backend_id": backend.backend_id,
        "max_new_tokens": args.max_new_tokens,
        "temperature": args.temperature, "jobs": args.jobs,
        "retry_limit": args.retry_limit,
    }
    gateway.record_run(batch, args.out, config, meta)
    print(f"recorded {len(batch.results)} outputs, "
          f"{len(batch.failures)} failures -> {args.out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    run = gateway.load_run(args.run)
    gold = store.read_corpus(args.gold)
    try:
        report = report_mod.build_report(run.lines, gold)
    except report_mod.EmptyRunError as exc:
        raise CliError(str(exc))
    baseline = None
    if args.baseline:
        baseline_run = gateway.load_run(args.baseline)
        baseline = report_mod.build_report(baseline_run.lines, gold)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report_mod.to_json(report),
                                         encoding="utf-8")
    (out_dir / "report.txt").write_text(
        report_mod.render_text_tables(report, baseline), encoding="utf-8")
    _write_config_echo(out_dir / "config.json", "evaluate", {
        "run": args.run, "gold": args.gold, "out": args.out,
        "baseline": args.baseline,
    })
    print(f"evaluated {report.pooled.pairs} pairs, "
          f"accuracy {report.pooled.accuracy:.4f}, "
          f"{len(report.gaps)} gaps -> {out_dir}")
    if report.gaps:
        print(f"error: {len(report.gaps)} expected pairs missing from the run",
              file=sys.stderr)
        return 1
    return 0


def cmd_leaderboard(args: argparse.Namespace) -> int:
    entries: list[tuple[str, corpus.Quadruple]] = []
    seen: set[tuple[str, corpus.Quadruple]] = set()

    def add(paper_id: str, quads) -> None:
        for quad in quads:
            key = (paper_id, quad)
            if key not in seen:
                seen.add(key)
                entries.append(key)

    if gateway.is_run_artifact(args.input):
        run = gateway.load_run(args.input)
        for line in run.outputs:
            parsed = answers.parse_answer(line["output"])
            if parsed.verdict == answers.ANSWER_SET:
                add(line.get("paper_id", line["request_id"]),
                    parsed.quadruples)
    else:
        for paper in store.read_corpus(args.input):
            if paper.answerable:
                add(paper.paper_id, paper.quadruples)
    boards = lb.build_leaderboards(entries)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    try:
        index_path = lb.emit_leaderboards(boards, args.out, formats)
    except ValueError as exc:
        raise CliError(str(exc))
    _write_config_echo(Path(args.out) / "config.json", "leaderboard", {
        "input": args.input, "out": args.out, "formats": formats,
    })
    print(f"wrote {len(boards)} leaderboards -> {index_path}")
    return 0


def cmd_parse(args: argparse.Namespace) -> int:
    if args.text is not None:
        text = args.text
    elif args.file:
        text = Path(args.file).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    parsed = answers.parse_answer(text)
    payload = {
        "verdict": parsed.verdict,
        "quadruples": [dataclasses.asdict(q) for q in parsed.quadruples],
        "reason": parsed.reason,
        "salvage_applied": parsed.salvage_applied,
        "dropped": parsed.dropped,
    }
    print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sotakit",
        description="Leaderboard-extraction corpus pipeline")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log at DEBUG level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse LaTeX bundles into docs JSONL")
    p.add_argument("corpus_root")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", help="JSON map paper_id -> main .tex file")
    p.add_argument("--failures", help="where to write the failure list")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="label contexts and split the corpus")
    p.add_argument("--docs", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--negatives", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, default=doctaet.DEFAULT_BUDGET)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--test-fraction", type=float, default=0.1)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("instantiate",
                       help="cross papers with instruction templates")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--templates", help="comma-separated template ids")
    p.add_argument("--families", help="comma-separated: squad,drop,none")
    p.add_argument("--half", action="store_true",
                   help="keep a seeded half of the instances")
    p.add_argument("--seed", type=int, default=13)
    p.set_defaults(func=cmd_instantiate)

    p = sub.add_parser("predict", help="run instances through a backend")
    p.add_argument("--instances", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=("echo", "replay", "http"),
                   default="http")
    p.add_argument("--backend-url",
                   help=f"generation service base url "
                        f"(default ${gateway.BACKEND_URL_ENV})")
    p.add_argument("--replay-file", help="JSONL of recorded outputs")
    p.add_argument("--max-new-tokens", type=int, default=256)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--retry-limit", type=int, default=3)
    p.add_argument("--collect-errors", action="store_true",
                   help="record failures in the artifact instead of aborting")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a run against gold labels")
    p.add_argument("--run", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--baseline", help="second run artifact for X/Y cells")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("leaderboard",
                       help="aggregate quadruples into leaderboards")
    p.add_argument("--input", required=True,
                   help="run artifact or labeled corpus JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default=",".join(lb.FORMATS))
    p.set_defaults(func=cmd_leaderboard)

    p = sub.add_parser("parse", help="parse one answer text to a verdict")
    p.add_argument("--text")
    p.add_argument("--file")
    p.set_defaults(func=cmd_parse)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (latex.LatexIngestError, corpus.MalformedAnnotationRecord,
            corpus.OverlapError, corpus.SplitInfeasible,
            gateway.BackendUnavailable, gateway.ArtifactIntegrityError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
