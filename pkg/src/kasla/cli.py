"""Command-line surface: link, eval, extract-gold, tolerance.

Every run writes a manifest (flags, input/output digests, version) next
to its output so identical runs are verifiably identical. Exit codes:
0 success, 1 usage or fatal input error, 2 completed with per-query
errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .gold import GoldExtractionError, extract_gold_linking
from .linker import DEFAULT_SCALE, LinkerConfig, link_corpus, write_diagnostics
from .metrics import evaluate_corpus
from .schema import (
    SchemaError,
    catalogs_by_id,
    load_catalogs,
    load_linking_file,
    load_queries,
    load_queries_lenient,
    resolve_catalog,
    write_linking_file,
)
from .scoring import (
    DEFAULT_EPSILON,
    FileScorer,
    LexicalScorer,
    OracleScorer,
    RemoteScorer,
    Scorer,
    ScoringError,
)
from .tolerance import DEFAULT_TOP_K, ToleranceError, build_index, estimate_tolerance


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for
    # partially-failed runs, so usage errors exit 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kasla", description="Knapsack-based schema linking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    link = sub.add_parser("link", parents=[], help="link a query corpus")
    link.add_argument("--tables", required=True, help="tables file (Spider convention)")
    link.add_argument("--queries", required=True, help="queries to link (jsonl)")
    link.add_argument("--train", required=True, help="training corpus with gold (jsonl)")
    link.add_argument("--scorer", default="lexical",
                      help="lexical | file:PATH | remote:URL | oracle")
    link.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    link.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    link.add_argument("--scale", type=int, default=DEFAULT_SCALE)
    link.add_argument("--out", required=True, help="predictions output path")
    link.add_argument("--joint-tolerance", action="store_true")
    link.add_argument("--diagnostics", help="per-query diagnostics output (jsonl)")
    link.add_argument("--jobs", type=int, default=1)
    link.set_defaults(func=cmd_link)

    ev = sub.add_parser("eval", help="score predictions against gold")
    ev.add_argument("--pred", required=True)
    ev.add_argument("--gold", required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    eg = sub.add_parser("extract-gold", help="derive gold linkings from gold SQL")
    eg.add_argument("--tables", required=True)
    eg.add_argument("--queries", required=True)
    eg.add_argument("--out", required=True)
    eg.set_defaults(func=cmd_extract_gold)

    tol = sub.add_parser("tolerance", help="estimate per-query budgets")
    tol.add_argument("--tables", required=True)
    tol.add_argument("--train", required=True)
    tol.add_argument("--queries", required=True)
    tol.add_argument("--top-k", type=int, default=DEFAULT_TOP_K)
    tol.add_argument("--scorer", default="lexical")
    tol.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    tol.add_argument("--scale", type=int, default=DEFAULT_SCALE)
    tol.add_argument("--out", required=True)
    tol.set_defaults(func=cmd_tolerance)
    return parser


def make_scorer(spec: str, train_cases=None, eval_cases=None, catalogs=None) -> Scorer:
    if spec == "lexical":
        return LexicalScorer()
    if spec == "oracle":
        cases = list(train_cases or []) + [
            c for c in (eval_cases or []) if c.gold_linking is not None or c.gold_sql
        ]
        return OracleScorer.from_cases(cases, catalogs)
    if spec.startswith("file:"):
        return FileScorer.load(spec[len("file:"):])
    if spec.startswith("remote:"):
        return RemoteScorer.connect(spec[len("remote:"):])
    raise SchemaError(f"unknown scorer spec {spec!r}")


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_path: str | Path, command: str, flags: dict, inputs: dict, outputs: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "flags": flags,
        "inputs": {name: _sha256(p) for name, p in inputs.items()},
        "outputs": {name: _sha256(p) for name, p in outputs.items()},
    }
    Path(str(out_path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_link(args: argparse.Namespace) -> int:
    catalogs = catalogs_by_id(load_catalogs(args.tables))
    train_cases = load_queries(args.train, catalogs)
    eval_cases, load_errors = load_queries_lenient(args.queries, catalogs)
    scorer = make_scorer(args.scorer, train_cases, eval_cases, catalogs)
    config = LinkerConfig(
        top_k=args.top_k,
        epsilon=args.epsilon,
        scale=args.scale,
        joint_tolerance=args.joint_tolerance,
    )
    index = build_index(train_cases, catalogs, scorer, scorer, config.epsilon)
    outcome = link_corpus(
        eval_cases, catalogs, scorer, scorer, index, config, jobs=args.jobs
    )
    outcome.errors.update(load_errors)
    write_linking_file(args.out, outcome.results, catalogs)
    outputs = {"predictions": args.out}
    if args.diagnostics:
        write_diagnostics(args.diagnostics, outcome.diagnostics)
        outputs["diagnostics"] = args.diagnostics
    _write_manifest(
        args.out,
        "link",
        {
            "scorer": args.scorer,
            "top_k": args.top_k,
            "epsilon": args.epsilon,
            "scale": args.scale,
            "joint_tolerance": args.joint_tolerance,
            "jobs": args.jobs,
        },
        {"tables": args.tables, "queries": args.queries, "train": args.train},
        outputs,
    )
    for query_id, message in outcome.errors.items():
        print(f"error: {query_id}: {message}", file=sys.stderr)
    print(f"linked {len(outcome.results)} queries ({len(outcome.errors)} errors) -> {args.out}")
    return 2 if outcome.errors else 0


def cmd_eval(args: argparse.Namespace) -> int:
    golds = load_linking_file(args.gold)
    if not golds:
        print("error: empty gold file", file=sys.stderr)
        return 1
    preds = load_linking_file(args.pred)
    report = evaluate_corpus(preds, golds)
    report.write(args.out)
    _write_manifest(
        args.out, "eval", {}, {"pred": args.pred, "gold": args.gold}, {"report": args.out}
    )
    for line in report.summary_lines():
        print(line)
    missing_ids = sorted(set(golds) - set(preds))
    extra_ids = sorted(set(preds) - set(golds))
    if missing_ids or extra_ids:
        for query_id in missing_ids:
            print(f"missing prediction: {query_id}", file=sys.stderr)
        for query_id in extra_ids:
            print(f"prediction without gold: {query_id}", file=sys.stderr)
        return 2
    return 0


def cmd_extract_gold(args: argparse.Namespace) -> int:
    catalogs = catalogs_by_id(load_catalogs(args.tables))
    cases = load_queries(args.queries, catalogs)
    results = {}
    errors = 0
    for case in cases:
        if case.gold_linking is not None:
            results[case.query_id] = case.gold_linking
            continue
        if not case.gold_sql:
            print(f"error: {case.query_id}: no gold_sql", file=sys.stderr)
            errors += 1
            continue
        try:
            linking, warnings = extract_gold_linking(
                case.gold_sql, resolve_catalog(catalogs, case.db_id)
            )
        except GoldExtractionError as exc:
            print(f"error: {case.query_id}: {exc}", file=sys.stderr)
            errors += 1
            continue
        for warning in warnings:
            print(f"warning: {case.query_id}: {warning}", file=sys.stderr)
        results[case.query_id] = linking
    write_linking_file(args.out, results, catalogs)
    _write_manifest(
        args.out, "extract-gold", {},
        {"tables": args.tables, "queries": args.queries},
        {"gold": args.out},
    )
    print(f"extracted gold for {len(results)} queries ({errors} errors) -> {args.out}")
    return 2 if errors else 0


def cmd_tolerance(args: argparse.Namespace) -> int:
    from .scoring import score_query

    catalogs = catalogs_by_id(load_catalogs(args.tables))
    train_cases = load_queries(args.train, catalogs)
    eval_cases = load_queries(args.queries, catalogs)
    scorer = make_scorer(args.scorer, train_cases, eval_cases, catalogs)
    index = build_index(train_cases, catalogs, scorer, scorer, args.epsilon)
    lines = []
    for case in sorted(eval_cases, key=lambda c: c.query_id):
        schema = resolve_catalog(catalogs, case.db_id)
        sheet = score_query(case, schema, scorer, scorer, args.epsilon)
        estimate = estimate_tolerance(index, case.question, args.top_k, args.scale, sheet)
        record = {"query_id": case.query_id, "db_id": schema.db_id}
        record.update(estimate.to_payload())
        lines.append(json.dumps(record, ensure_ascii=False))
        if estimate.fallback:
            print(f"warning: {case.query_id}: empty training corpus, select-all fallback", file=sys.stderr)
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    _write_manifest(
        args.out, "tolerance",
        {"top_k": args.top_k, "scorer": args.scorer, "epsilon": args.epsilon, "scale": args.scale},
        {"tables": args.tables, "train": args.train, "queries": args.queries},
        {"tolerances": args.out},
    )
    print(f"estimated tolerances for {len(lines)} queries -> {args.out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (SchemaError, ScoringError, ToleranceError, GoldExtractionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
