"""Command-line surface for the summarization and search pipeline.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors. The log
level is taken from the TS3_LOG_LEVEL environment variable (error, info,
or debug); diagnostics go to stderr, results to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import search as search_mod
from .config import load_config
from .corpus import CorpusError, load_corpus, split_corpus
from .indent_tree import IndentTreeError, build_tree, format_tree
from .metrics import retrieval_report, summarization_report
from .model import Summarizer
from .tokenizer import tokenize_code, tokenize_nl
from .training import train, validation_candidates

log = logging.getLogger(__name__)

_DATA_ERRORS = (CorpusError, IndentTreeError, FileNotFoundError, NotADirectoryError, ValueError, FloatingPointError, KeyError, OSError)


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sumsearch", description="Tree-transformer code summarization and search.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, *, corpus=False, out=False, checkpoint=False):
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
        if corpus:
            p.add_argument("--corpus", type=Path, required=True, help="JSONL corpus file")
        if out:
            p.add_argument("--out", type=Path, required=True, help="output directory")
        if checkpoint:
            p.add_argument("--checkpoint", type=Path, required=True, help="checkpoint file or run directory")

    p = sub.add_parser("ingest", help="validate a corpus and write split manifests")
    common(p, corpus=True, out=True)

    p = sub.add_parser("train", help="run the three training phases")
    common(p, corpus=True, out=True)

    p = sub.add_parser("summarize", help="generate a comment for a code file")
    common(p, checkpoint=True)
    p.add_argument("file", type=Path, help="source file containing one function")

    p = sub.add_parser("index", help="build a search index over a corpus")
    common(p, corpus=True, out=True, checkpoint=True)
    p.add_argument("--beta", type=float, default=0.5, help="code-vs-comment weight stored in the index")

    p = sub.add_parser("search", help="rank indexed snippets for a query")
    common(p, checkpoint=True, out=True)
    p.add_argument("--query", type=str, required=True, help="natural language query")
    p.add_argument("--k", type=int, default=10, help="number of results")
    p.add_argument("--beta", type=float, default=None, help="override the indexed beta")

    p = sub.add_parser("eval-sum", help="summarization metrics over a corpus")
    common(p, corpus=True, checkpoint=True)
    p.add_argument("--out", type=Path, default=None, help="directory for report.json and breakdown.tsv")

    p = sub.add_parser("eval-search", help="retrieval metrics with comments as queries")
    common(p, corpus=True, checkpoint=True)
    p.add_argument("--k", type=int, default=10, help="cutoff for ndcg and success rate")
    p.add_argument("--out", type=Path, default=None, help="directory for report.json")

    p = sub.add_parser("tokenize", help="print tokens, one per line")
    p.add_argument("kind", choices=["code", "nl"])
    p.add_argument("file", type=Path)

    p = sub.add_parser("tree", help="print the statement tree of a code file")
    p.add_argument("file", type=Path)

    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("TS3_LOG_LEVEL", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        raise ValueError(f"TS3_LOG_LEVEL must be one of {sorted(levels)}, got {level_name!r}")
    logging.basicConfig(level=levels[level_name], format="%(levelname)s %(name)s: %(message)s")


def _make_config(args):
    return load_config(getattr(args, "config", None), seed=getattr(args, "seed", None))


def _write_splits(out: Path, splits) -> None:
    train_set, val_set, test_set = splits
    manifest = {"train": train_set.ids(), "val": val_set.ids(), "test": test_set.ids()}
    (out / "splits.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    for name, part in (("train", train_set), ("val", val_set), ("test", test_set)):
        with open(out / f"{name}.jsonl", "w", encoding="utf-8") as f:
            for pair in part:
                f.write(json.dumps({"id": pair.id, "code": pair.code, "comment": pair.comment}) + "\n")


def _cmd_ingest(args) -> int:
    cfg = _make_config(args)
    pairs = load_corpus(args.corpus)
    splits = split_corpus(pairs, cfg.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_splits(args.out, splits)
    print(f"loaded {pairs.size} pairs -> train {splits[0].size}, val {splits[1].size}, test {splits[2].size}")
    return 0


def _cmd_train(args) -> int:
    cfg = _make_config(args)
    pairs = load_corpus(args.corpus)
    splits = split_corpus(pairs, cfg.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_splits(args.out, splits)
    result = train(splits[0], splits[1], cfg, out_dir=args.out)
    best = {phase: round(score, 6) for phase, score in result.phase_val.items()}
    print(f"checkpoint {result.checkpoint_path} best validation bleu-1 by phase: {best}")
    return 0


def _cmd_summarize(args) -> int:
    model, _ = Summarizer.load(args.checkpoint)
    print(model.summarize(args.file.read_text(encoding="utf-8")))
    return 0


def _cmd_index(args) -> int:
    model, _ = Summarizer.load(args.checkpoint)
    pairs = load_corpus(args.corpus)
    index = search_mod.build_index(((p.id, p.code) for p in pairs), model)
    search_mod.save_index(index, args.out, beta=args.beta)
    print(f"indexed {len(index)} snippets ({len(index.skipped)} skipped) -> {args.out}")
    return 0


def _cmd_search(args) -> int:
    model, _ = Summarizer.load(args.checkpoint)
    index, stored_beta = search_mod.load_index(args.out)
    beta = args.beta if args.beta is not None else (stored_beta if stored_beta is not None else 0.5)
    cfg = search_mod.SearchConfig(beta=beta, top_k=args.k)
    ranked = search_mod.rank(tokenize_nl(args.query), index, cfg, model)
    for position, (snippet_id, score) in enumerate(ranked.hits, start=1):
        first_line = index.entries[snippet_id].code_text.strip().splitlines()[0]
        print(f"{position:>3}  {score:+.4f}  {snippet_id}  {first_line}")
    return 0


def _cmd_eval_sum(args) -> int:
    model, _ = Summarizer.load(args.checkpoint)
    pairs = load_corpus(args.corpus)
    candidates, references = validation_candidates(model, pairs)
    report = summarization_report(candidates, references)
    print(report.to_json())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (args.out / "breakdown.tsv").write_text(report.breakdown_tsv([p.id for p in pairs]), encoding="utf-8")
    return 0


def _cmd_eval_search(args) -> int:
    model, _ = Summarizer.load(args.checkpoint)
    pairs = load_corpus(args.corpus)
    index = search_mod.build_index(((p.id, p.code) for p in pairs), model)
    queries = [(tokenize_nl(p.comment), p.id) for p in pairs if p.id in index.entries]
    beta_star, sweep = search_mod.tune_beta(queries, index, model)
    cfg = search_mod.SearchConfig(beta=beta_star, top_k=len(index))
    results = [
        search_mod.rank_result(pid, pid, search_mod.rank(tokens, index, cfg, model))
        for tokens, pid in queries
    ]
    relevant = {pid: {pid} for _, pid in queries}
    report = retrieval_report(results, relevant, args.k)
    report.scores["beta_star"] = beta_star
    report.scores["pairwise_satisfaction"] = search_mod.pairwise_satisfaction(queries, index, cfg, model)
    print(report.to_json())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "report.json").write_text(report.to_json(), encoding="utf-8")
    return 0


def _cmd_tokenize(args) -> int:
    text = args.file.read_text(encoding="utf-8")
    tokens = tokenize_code(text) if args.kind == "code" else tokenize_nl(text)
    for token in tokens:
        print(token)
    return 0


def _cmd_tree(args) -> int:
    print(format_tree(build_tree(args.file.read_text(encoding="utf-8"))))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "summarize": _cmd_summarize,
    "index": _cmd_index,
    "search": _cmd_search,
    "eval-sum": _cmd_eval_sum,
    "eval-search": _cmd_eval_search,
    "tokenize": _cmd_tokenize,
    "tree": _cmd_tree,
}


def main(argv=None) -> int:
    try:
        _configure_logging()
    except ValueError as e:
        print(f"sumsearch: {e}", file=sys.stderr)
        return 1
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as e:
        print(f"sumsearch {args.command}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
