"""Command-line entry point: ingest, search, replay, eval, sweep.

Exit codes: 0 on success, 2 on usage or input errors, 1 on internal errors.
Stub providers and the hashing embedder are the defaults, so every command
runs offline; remote providers are opt-in via the config file plus
environment credentials.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import DEFAULT_SNAPSHOT, PipelineConfig, load_config
from .conversation import (
    make_generation_provider,
    make_rewrite_provider,
    read_conversations_file,
    replay_conversations,
    write_submission_file,
)
from .corpus import DuplicateDocumentError, read_corpus_file
from .embedding import make_embedder
from .eval import (
    DEFAULT_ALPHAS,
    DEFAULT_KS,
    DEFAULT_STRATEGIES,
    evaluate_run,
    format_sweep_table,
    read_qrels,
    read_queries,
    read_run_file,
    run_sweep,
    write_run_file,
)
from .index import SnapshotError
from .pipeline import Pipeline
from .ranking import STRATEGIES

logger = logging.getLogger(__name__)


class InputError(Exception):
    """User-facing input problem; maps to exit code 2."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiret",
        description="Hierarchical parent-child retrieval pipeline with hybrid search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (flags override its values)")
    common.add_argument("--format", choices=["text", "json"], default="text",
                        help="output format (default: text)")
    common.add_argument("--snapshot", help=f"index snapshot path (default: {DEFAULT_SNAPSHOT})")

    retrieval = argparse.ArgumentParser(add_help=False)
    retrieval.add_argument("--alpha", type=float, help="dense share of the fused score (default: 0.7)")
    retrieval.add_argument("--k", type=int, help="initial child candidate count per leg (default: 50)")
    retrieval.add_argument("--top-n", type=int, dest="top_n", help="parents returned (default: 5)")
    retrieval.add_argument("--strategy", choices=list(STRATEGIES),
                           help="parent ranking strategy (default: child_first)")
    retrieval.add_argument("--embedder", choices=["hashing", "remote"],
                           help="embedding provider (default: hashing)")

    p_ingest = sub.add_parser("ingest", parents=[common],
                              help="ingest a JSONL corpus and write the index snapshot")
    p_ingest.add_argument("--corpus", required=True, help="JSONL corpus file")
    p_ingest.add_argument("--force", action="store_true", help="overwrite an existing snapshot")
    p_ingest.add_argument("--window", type=int, help="sentences per child chunk (default: 3)")
    p_ingest.add_argument("--stride", type=int, help="sentence stride between chunks (default: 2)")
    p_ingest.add_argument("--embedder", choices=["hashing", "remote"],
                          help="embedding provider (default: hashing)")

    p_search = sub.add_parser("search", parents=[common, retrieval],
                              help="run one query and print the ranked parents")
    p_search.add_argument("query", help="query text")

    p_replay = sub.add_parser("replay", parents=[common, retrieval],
                              help="replay a conversations file into submission and run files")
    p_replay.add_argument("conversations", help="conversations JSON file")
    p_replay.add_argument("--out", default="submission.jsonl", help="submission output (JSONL)")
    p_replay.add_argument("--run-file", default="run.trec", dest="run_file", help="TREC run output")
    group = p_replay.add_mutually_exclusive_group()
    group.add_argument("--final-only", action="store_true", default=True, dest="final_only",
                       help="submission records for final user turns only (default)")
    group.add_argument("--all-turns", action="store_false", dest="final_only",
                       help="submission records for every user turn")
    p_replay.add_argument("--seed-history", choices=["generated", "gold"], default="generated",
                          help="seed later turns' history from own answers or gold ones")

    p_eval = sub.add_parser("eval", parents=[common],
                            help="score a TREC run file against qrels")
    p_eval.add_argument("--run", required=True, help="TREC run file")
    p_eval.add_argument("--qrels", required=True, help="TREC qrels file")
    p_eval.add_argument("--gain", choices=["exp", "linear"], default="exp",
                        help="nDCG gain convention (default: exp)")

    p_sweep = sub.add_parser("sweep", parents=[common, retrieval],
                             help="run the configuration grid and write the metrics table")
    p_sweep.add_argument("--queries", required=True, help="tab-separated queries file")
    p_sweep.add_argument("--qrels", required=True, help="TREC qrels file")
    p_sweep.add_argument("--alphas", type=float, nargs="+",
                         help=f"alpha grid (default: {' '.join(str(a) for a in DEFAULT_ALPHAS)})")
    p_sweep.add_argument("--ks", type=int, nargs="+",
                         help=f"candidate size grid (default: {' '.join(str(k) for k in DEFAULT_KS)})")
    p_sweep.add_argument("--strategies", choices=list(STRATEGIES), nargs="+",
                         help="strategy grid (default: parent_rescore child_first)")
    p_sweep.add_argument("--out", default="sweep.csv", help="output table path (default: sweep.csv)")
    p_sweep.add_argument("--gain", choices=["exp", "linear"], default="exp",
                         help="nDCG gain convention (default: exp)")
    return parser


def _load_base_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        try:
            config = load_config(path)
        except ValueError as exc:
            raise InputError(f"bad config file {path}: {exc}") from exc
    else:
        config = PipelineConfig()
    try:
        return config.override(
            alpha=getattr(args, "alpha", None),
            k=getattr(args, "k", None),
            top_n=getattr(args, "top_n", None),
            strategy=getattr(args, "strategy", None),
            window=getattr(args, "window", None),
            stride=getattr(args, "stride", None),
            snapshot=getattr(args, "snapshot", None),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _make_embedders(config: PipelineConfig, kind_override: str | None):
    embedder_cfg = config.embedder
    if kind_override is not None and kind_override != embedder_cfg.kind:
        embedder_cfg = replace(embedder_cfg, kind=kind_override)
    try:
        embedder = make_embedder(embedder_cfg)
        rescorer = make_embedder(config.rescorer) if config.rescorer is not None else None
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return embedder, rescorer


def _load_pipeline(config: PipelineConfig, args) -> Pipeline:
    snapshot = Path(config.snapshot)
    if not snapshot.exists():
        raise InputError(f"snapshot not found: {snapshot} (run 'hiret ingest' first)")
    embedder, rescorer = _make_embedders(config, getattr(args, "embedder", None))
    try:
        return Pipeline.load(
            snapshot,
            embedder=embedder,
            rescorer=rescorer,
            hybrid=config.hybrid_config(),
            ranking=config.ranking_config(rescorer),
        )
    except (SnapshotError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _config_echo(config: PipelineConfig) -> dict:
    return {
        "alpha": config.alpha,
        "k": config.k,
        "top_n": config.top_n,
        "strategy": config.strategy,
        "window": config.window,
        "stride": config.stride,
    }


def cmd_ingest(args) -> int:
    config = _load_base_config(args)
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise InputError(f"corpus file not found: {corpus_path}")
    snapshot = Path(config.snapshot)
    if snapshot.exists() and not args.force:
        raise InputError(f"snapshot already exists: {snapshot} (pass --force to overwrite)")
    embedder, rescorer = _make_embedders(config, getattr(args, "embedder", None))
    try:
        pipeline, stats = Pipeline.build(
            read_corpus_file(corpus_path),
            window=config.window,
            stride=config.stride,
            embedder=embedder,
            rescorer=rescorer,
            include_title=config.include_title,
        )
    except DuplicateDocumentError as exc:
        raise InputError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(f"cannot ingest {corpus_path}: {exc}") from exc
    pipeline.save(snapshot, extra_meta={"window": config.window, "stride": config.stride})
    record = {
        "docs": stats.docs,
        "chunks": stats.chunks,
        "skipped": stats.skipped,
        "snapshot": str(snapshot),
    }
    if args.format == "json":
        print(json.dumps(record))
    else:
        print(f"ingested docs={stats.docs} chunks={stats.chunks} skipped={stats.skipped}")
        print(f"snapshot written to {snapshot}")
    return 0


def cmd_search(args) -> int:
    config = _load_base_config(args)
    pipeline = _load_pipeline(config, args)
    hits = pipeline.rank(args.query)
    if args.format == "json":
        payload = {
            "query": args.query,
            "config": _config_echo(config),
            "results": [
                {"parent_id": h.parent_id, "score": h.score, "chunk_ids": list(h.chunk_ids)}
                for h in hits
            ],
        }
        print(json.dumps(payload))
    else:
        if not hits:
            print("no results")
        for rank, hit in enumerate(hits, 1):
            chunk_list = ", ".join(hit.chunk_ids)
            print(f"{rank}. {hit.parent_id}  score={hit.score:.4f}  chunks: {chunk_list}")
    return 0


def cmd_replay(args) -> int:
    config = _load_base_config(args)
    pipeline = _load_pipeline(config, args)
    conv_path = Path(args.conversations)
    if not conv_path.exists():
        raise InputError(f"conversations file not found: {conv_path}")
    try:
        conversations, parse_errors = read_conversations_file(conv_path)
    except (ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot parse {conv_path}: {exc}") from exc
    rewriter = make_rewrite_provider(config.rewrite)
    generator = make_generation_provider(config.generation)
    result = replay_conversations(
        conversations,
        pipeline,
        rewriter,
        generator,
        final_only=args.final_only,
        seed_history=args.seed_history,
    )
    write_submission_file(args.out, result.submission)
    write_run_file(args.run_file, result.run)
    failures = parse_errors + result.failures
    record = {
        "conversations": len(conversations),
        "submission_records": len(result.submission),
        "run_queries": len(result.run),
        "failed": len(failures),
        "submission": str(args.out),
        "run_file": str(args.run_file),
    }
    if args.format == "json":
        record["failures"] = failures
        print(json.dumps(record))
    else:
        print(
            f"replayed {record['conversations']} conversations: "
            f"{record['submission_records']} submission records, "
            f"{record['run_queries']} run queries, {record['failed']} failed"
        )
        for failure in failures:
            print(f"  failed: {failure}", file=sys.stderr)
    return 1 if failures else 0


def cmd_eval(args) -> int:
    for name, value in (("run", args.run), ("qrels", args.qrels)):
        if not Path(value).exists():
            raise InputError(f"{name} file not found: {value}")
    try:
        run = read_run_file(args.run)
        qrels = read_qrels(args.qrels)
        report = evaluate_run(run, qrels, gain=args.gain)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    names = [f"{m}@{k}" for m in ("ndcg", "recall") for k in (1, 3, 5)]
    if args.format == "json":
        payload = {
            "per_query": report.per_query,
            "means": report.means,
            "ignored_queries": report.ignored_queries,
        }
        print(json.dumps(payload))
    else:
        for qid in sorted(report.per_query):
            metrics = " ".join(f"{n}={report.per_query[qid][n]:.4f}" for n in names)
            print(f"{qid}: {metrics}")
        means = " ".join(f"{n}={report.means[n]:.4f}" for n in names)
        print(f"mean ({len(report.per_query)} queries): {means}")
        if report.ignored_queries:
            print(f"warning: {report.ignored_queries} run queries had no qrels and were ignored")
    return 0


def cmd_sweep(args) -> int:
    config = _load_base_config(args)
    pipeline = _load_pipeline(config, args)
    for name, value in (("queries", args.queries), ("qrels", args.qrels)):
        if not Path(value).exists():
            raise InputError(f"{name} file not found: {value}")
    try:
        queries = read_queries(args.queries)
        qrels = read_qrels(args.qrels)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if not set(queries) & set(qrels):
        raise InputError("queries and qrels share no query ids")
    result = run_sweep(
        pipeline,
        queries,
        qrels,
        alphas=tuple(args.alphas) if args.alphas else DEFAULT_ALPHAS,
        strategies=tuple(args.strategies) if args.strategies else DEFAULT_STRATEGIES,
        ks=tuple(args.ks) if args.ks else DEFAULT_KS,
        top_n=config.top_n,
        gain=args.gain,
    )
    table = format_sweep_table(result)
    Path(args.out).write_text(table, encoding="utf-8")
    if args.format == "json":
        best = result.best_row
        payload = {
            "rows": len(result.rows),
            "out": str(args.out),
            "best": None
            if best is None
            else {
                "alpha": best.alpha,
                "rank_parents": best.rank_parents,
                "k": best.k,
                "metrics": best.metrics,
            },
        }
        print(json.dumps(payload))
    else:
        print(table, end="")
        best = result.best_row
        if best is not None:
            print(
                f"best: alpha={best.alpha:g} rank_parents={str(best.rank_parents).lower()} "
                f"k={best.k} ndcg@5={best.metrics['ndcg@5']:.4f}"
            )
        print(f"table written to {args.out}")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "search": cmd_search,
    "replay": cmd_replay,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal error
        logger.exception("internal error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
