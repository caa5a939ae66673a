"""Command-line front door: ingest, synth, run, report, graph-export,
rank, serve, suppress, unpseudonymise, and a postings debug dump.

State lives under --data-dir (default ./dupforge_data): corpora under
corpora/, runs under runs/, the suppression list and audit log at the
root.  Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .corpus import (
    CorpusError,
    IngestConfig,
    PseudonymAccessError,
    PseudonymMap,
    ingest,
    load_corpus,
    read_csv,
    read_jsonl,
    save_corpus,
)
from .graph import build_graph, pagerank, ranking_csv
from .reports import emit_reports
from .searches import RunConfig, run_all
from .store import DataStore
from .synth import SyntheticSpec, generate_rows, write_rows_jsonl


class CliError(Exception):
    """User error; prints the message and exits 1."""


def load_config_file(path: str | Path) -> RunConfig:
    """Parse the documented ``key = value`` config format.

    Values may be JSON (lists, numbers, strings); bare scalars are passed
    through and cast per key.  '#' starts a comment.  Unknown keys are
    rejected.
    """
    raw: dict = {}
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{line_number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            raw[key] = json.loads(value)
        except json.JSONDecodeError:
            raw[key] = value
    if isinstance(raw.get("searches"), str):
        raw["searches"] = [int(p) for p in raw["searches"].split(",") if p.strip()]
    try:
        return RunConfig.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise CliError(f"bad config file {path}: {exc}") from None


def _resolve_corpus_dir(args, store: DataStore) -> Path:
    if getattr(args, "corpus", None):
        path = Path(args.corpus)
        if not (path / "manifest.json").exists():
            raise CliError(f"not a corpus directory: {path}")
        return path
    ids = store.corpus_ids()
    if not ids:
        raise CliError("no corpus found; run 'dupforge synth' or 'dupforge ingest' first")
    return store.corpus_dir(ids[-1])


def _resolve_run_dir(args, store: DataStore) -> Path:
    if getattr(args, "run", None):
        path = Path(args.run)
        if not (path / "record.json").exists():
            raise CliError(f"not a run directory: {path}")
        return path
    ids = store.run_ids()
    for run_id in reversed(ids):
        if (store.run_dir(run_id) / "record.json").exists():
            return store.run_dir(run_id)
    raise CliError("no completed run found; run 'dupforge run' first")


def _load_completed_run(run_dir: Path):
    from .searches import load_run

    record = load_run(run_dir)
    if record.status != "complete":
        raise CliError(f"run {record.run_id} is {record.status}, not complete")
    return record


def _run_corpus(record, args, store: DataStore):
    if getattr(args, "corpus", None):
        return load_corpus(Path(args.corpus))
    if record.corpus_id:
        try:
            return store.load_corpus(record.corpus_id)
        except KeyError:
            pass
    return load_corpus(_resolve_corpus_dir(args, store))


def cmd_synth(args) -> int:
    store = DataStore(args.data_dir)
    spec = SyntheticSpec(
        seed=args.seed,
        innocent_accounts=args.innocent,
        comments_per_account=args.comments_per_account,
        mill_accounts=args.mill,
        mill_templates=args.mill_templates,
        mill_comments_per_account=args.mill_comments_per_account,
        template_mutation_rate=args.mutation_rate,
        weak_link_accounts=args.weak,
        typo_sentences=args.typos,
        recommending_authors=args.recommenders,
    )
    rows, truth = generate_rows(spec)
    corpus = ingest(rows, IngestConfig())
    corpus_id = store.add_corpus(corpus)
    corpus_dir = store.corpus_dir(corpus_id)
    write_rows_jsonl(rows, corpus_dir / "rows.jsonl")
    (corpus_dir / "ground_truth.json").write_text(
        json.dumps(
            {
                "mill_accounts": list(truth.mill_accounts),
                "weak_link_accounts": list(truth.weak_link_accounts),
                "innocent_accounts": list(truth.innocent_accounts),
                "typo_sentences": list(truth.typo_sentences),
                "mill_recommenders": {k: list(v) for k, v in truth.mill_recommenders.items()},
                "peak_month": truth.peak_month,
            },
            sort_keys=True, indent=1,
        ) + "\n",
        encoding="utf-8",
    )
    print(f"corpus: {corpus_dir}")
    print(f"stats: {corpus.stats.as_dict()}")
    print(f"ground truth: {corpus_dir / 'ground_truth.json'}")
    return 0


def cmd_ingest(args) -> int:
    store = DataStore(args.data_dir)
    path = Path(args.input)
    if not path.exists():
        raise CliError(f"input file not found: {path}")
    reader = read_csv if path.suffix.lower() == ".csv" else read_jsonl
    config = IngestConfig(
        journal_blocklist=frozenset(args.blocklist.split(",")) if args.blocklist else frozenset(),
        min_chars=args.min_chars,
    )
    corpus = ingest(reader(path), config)
    if args.out:
        corpus_dir = save_corpus(corpus, args.out)
    else:
        corpus_dir = store.corpus_dir(store.add_corpus(corpus))
    print(f"corpus: {corpus_dir}")
    print(f"stats: {corpus.stats.as_dict()}")
    print(f"excluded rows: {len(corpus.exclusions)}")
    return 0


def cmd_run(args) -> int:
    store = DataStore(args.data_dir)
    corpus_dir = _resolve_corpus_dir(args, store)
    corpus = load_corpus(corpus_dir)
    config = load_config_file(args.config) if args.config else RunConfig()
    overrides = {}
    if args.search:
        overrides["searches"] = tuple(args.search)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.curated_from_truth:
        truth_path = corpus_dir / "ground_truth.json"
        if truth_path.exists():
            truth = json.loads(truth_path.read_text(encoding="utf-8"))
            overrides["curated_sentences"] = tuple(truth.get("typo_sentences", ()))
    if overrides:
        config = RunConfig.from_dict({**config.as_dict(), **overrides})
    run_id = store.new_run_id()
    suppression = store.suppressions()
    corpus_id = corpus_dir.name if corpus_dir.parent == store.root / "corpora" else ""
    record = run_all(
        corpus, config, suppression=suppression, run_id=run_id,
        out_dir=store.run_dir(run_id), corpus_id=corpus_id,
    )
    print(f"run: {store.run_dir(run_id)}")
    print(f"status: {record.status}")
    for method, timing in record.timings().items():
        print(
            f"  {method}: accounts={timing['accounts_found']} "
            f"index={timing['index_seconds']:.2f}s search={timing['search_seconds']:.2f}s"
        )
    if record.status != "complete":
        print(f"error: {record.error}", file=sys.stderr)
        return 2
    return 0


def cmd_report(args) -> int:
    store = DataStore(args.data_dir)
    run_dir = _resolve_run_dir(args, store)
    record = _load_completed_run(run_dir)
    corpus = _run_corpus(record, args, store)
    out_dir = Path(args.out) if args.out else run_dir / "reports"
    emit_reports(record, corpus, out_dir, suppression=store.suppressions(), svg=args.svg)
    for path in sorted(out_dir.iterdir()):
        print(path)
    return 0


def cmd_graph_export(args) -> int:
    store = DataStore(args.data_dir)
    run_dir = _resolve_run_dir(args, store)
    record = _load_completed_run(run_dir)
    corpus = _run_corpus(record, args, store)
    graph = build_graph(record.evidence, corpus, suppression=store.suppressions())
    out = Path(args.out) if args.out else run_dir / f"graph.{args.format}"
    if args.format == "json":
        out.write_text(json.dumps(graph.to_json(), sort_keys=True, indent=1) + "\n",
                       encoding="utf-8")
    else:
        out.write_text(graph.to_graphml(), encoding="utf-8")
    print(out)
    return 0


def cmd_rank(args) -> int:
    store = DataStore(args.data_dir)
    run_dir = _resolve_run_dir(args, store)
    record = _load_completed_run(run_dir)
    corpus = _run_corpus(record, args, store)
    graph = build_graph(record.evidence, corpus, suppression=store.suppressions())
    entries = pagerank(graph, damping=record.config.damping, tol=record.config.tol,
                       weighted=record.config.pagerank_weighted)
    if args.top:
        entries = entries[: args.top]
    csv_text = ranking_csv(entries)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(args.out)
    else:
        print(csv_text, end="")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    store_root = Path(args.data_dir)
    if not store_root.exists() and not args.create:
        raise CliError(f"data dir not found: {store_root} (pass --create to initialize)")
    serve(
        args.data_dir,
        host=args.host,
        port=args.port,
        auth_token=args.token,
        pseudonym_map_path=args.pseudonym_map,
        frontend_dir=args.frontend,
    )
    return 0


def cmd_suppress(args) -> int:
    store = DataStore(args.data_dir)
    suppressions = store.suppressions()
    if args.revoke is not None:
        try:
            suppressions.revoke(args.revoke)
        except KeyError as exc:
            raise CliError(str(exc)) from None
        store.save_suppressions(suppressions)
        print(f"revoked entry {args.revoke}; version {suppressions.version}")
        return 0
    if not args.entity or not args.category or not args.reason:
        raise CliError("--entity, --category and --reason are required")
    try:
        entry = suppressions.suppress(args.entity, args.category, args.reason)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    store.save_suppressions(suppressions)
    print(f"suppressed {entry.entity} (entry {entry.entry_id}); version {suppressions.version}")
    return 0


def cmd_unpseudonymise(args) -> int:
    path = Path(args.map)
    if not path.exists():
        raise CliError(f"pseudonym map not found: {path}")
    try:
        pmap = PseudonymMap.load(path, args.key)
    except PseudonymAccessError as exc:
        # the file cannot be opened, so no audit entry can be written to it
        raise CliError(str(exc)) from None
    try:
        identity = pmap.reverse(args.uid, args.key, args.reason, actor="cli")
    except KeyError as exc:
        pmap.save(path)  # the not-found attempt is still audited
        raise CliError(str(exc)) from None
    pmap.save(path)
    print(identity)
    return 0


def cmd_postings(args) -> int:
    from .textindex import build_index

    corpus = load_corpus(_resolve_corpus_dir(args, DataStore(args.data_dir)))
    if args.granularity == "comment":
        docs = [(c.comment_id, c.norm_text) for c in corpus.ordered_comments()]
    else:
        docs = [
            (f"{c.comment_id}#{i}", s)
            for c in corpus.ordered_comments()
            for i, s in enumerate(c.sentences)
        ]
    index = build_index(docs, granularity=args.granularity)
    rows = index.postings_for(args.term.lower())
    if not rows:
        print(f"term {args.term!r} not in index")
        return 0
    print(f"term {args.term!r}: df={len(rows)} idf={index.idf(args.term.lower()):.6f}")
    for doc_id, tf in rows[: args.limit]:
        print(f"  {doc_id}\ttf={tf}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dupforge",
        description="Duplication forensics for peer-review comments.",
    )
    parser.add_argument("--version", action="version", version=f"dupforge {__version__}")
    parser.add_argument("--data-dir", default="./dupforge_data",
                        help="store root for corpora, runs, suppressions (default ./dupforge_data)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--innocent", type=int, default=200)
    p.add_argument("--comments-per-account", type=int, default=5)
    p.add_argument("--mill", type=int, default=0, help="number of mill accounts")
    p.add_argument("--mill-templates", type=int, default=5)
    p.add_argument("--mill-comments-per-account", type=int, default=0)
    p.add_argument("--mutation-rate", type=float, default=0.2)
    p.add_argument("--weak", type=int, default=0, help="number of weak-link accounts")
    p.add_argument("--typos", type=int, default=3)
    p.add_argument("--recommenders", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("ingest", help="ingest a JSON-lines or CSV file of raw review rows")
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="write the corpus here instead of the data dir")
    p.add_argument("--blocklist", default="", help="comma-separated journal ids to exclude")
    p.add_argument("--min-chars", type=int, default=150)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("run", help="execute the search pipeline")
    p.add_argument("--corpus", help="corpus directory (default: newest in the data dir)")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--search", type=int, action="append", choices=range(1, 7),
                   help="run only this search (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--curated-from-truth", action="store_true",
                   help="curate search 5 sentences from the corpus' ground_truth.json")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("report", help="emit report CSVs for a run")
    p.add_argument("--run", help="run directory (default: newest completed)")
    p.add_argument("--corpus")
    p.add_argument("--out")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("graph-export", help="export the evidence graph")
    p.add_argument("--run")
    p.add_argument("--corpus")
    p.add_argument("--format", choices=("json", "graphml"), default="json")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_graph_export)

    p = sub.add_parser("rank", help="PageRank ranking of a run's accounts")
    p.add_argument("--run")
    p.add_argument("--corpus")
    p.add_argument("--top", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8570)
    p.add_argument("--token", help="static bearer token for mutating endpoints")
    p.add_argument("--pseudonym-map", help="encrypted pseudonym map file")
    p.add_argument("--frontend", help="static UI directory to mount at /ui")
    p.add_argument("--create", action="store_true", help="initialize the data dir if missing")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("suppress", help="manage the suppression list")
    p.add_argument("--entity", help="account uid, or 'uidA|uidB' for a pair")
    p.add_argument("--category", choices=("board_member", "practice_document",
                                          "duplicate_account", "other"))
    p.add_argument("--reason")
    p.add_argument("--revoke", type=int, help="revoke this entry id instead")
    p.set_defaults(fn=cmd_suppress)

    p = sub.add_parser("unpseudonymise", help="audited reverse lookup of a UID")
    p.add_argument("--map", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--uid", required=True)
    p.add_argument("--reason", required=True)
    p.set_defaults(fn=cmd_unpseudonymise)

    p = sub.add_parser("postings", help="debug: dump the inverted-index postings for a term")
    p.add_argument("--corpus")
    p.add_argument("--granularity", choices=("comment", "sentence"), default="comment")
    p.add_argument("--term", required=True)
    p.add_argument("--limit", type=int, default=50)
    p.set_defaults(fn=cmd_postings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    try:
        return args.fn(args)
    except (CliError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # internal error
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
