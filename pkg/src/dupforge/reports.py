"""Report emission: summary tables, search overlap matrix, timing table,
histograms, and the mill-activity time series.

Every report is a pure function of (run record, corpus), so re-emission
is byte-identical.  CSV is the canonical output; SVG charts are optional
siblings rendered by a small internal plotter.

Report directory layout:
    summary.csv         account- and article-level counts (+ percentages)
    overlap_matrix.csv  accounts found by row search and not by column search
    timings.csv         per-search index/search seconds and accounts found
    fig1_hist.csv       duplicate-count histogram from search 1
    fig3_hist.csv       sentence-Jaccard distribution from search 2
    table2_freq.csv     sentence frequency distribution (y is log-scaled
                        when plotted) plus the top duplicated sentences
    fig9_series.csv     monthly percentage of comments from cluster accounts
    search4_dist_<metric>.csv   rescoring distributions per metric
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Corpus
from .graph import SuppressionList, build_graph, components
from .searches import RunRecord, SEARCH_METHODS
from . import svgplot


@dataclass(frozen=True)
class OverlapMatrix:
    searches: tuple[str, ...]
    cells: tuple[tuple[int, ...], ...]  # cells[i][j] = found by i and not by j

    def cell(self, row: str, col: str) -> int:
        i = self.searches.index(row)
        j = self.searches.index(col)
        return self.cells[i][j]


def overlap_matrix(run: RunRecord) -> OverlapMatrix:
    searches = tuple(m for m in SEARCH_METHODS if m in run.results)
    account_sets = {m: run.results[m].accounts() for m in searches}
    cells = tuple(
        tuple(len(account_sets[row] - account_sets[col]) if row != col else 0 for col in searches)
        for row in searches
    )
    return OverlapMatrix(searches=searches, cells=cells)


def timing_report(run: RunRecord) -> list[dict]:
    rows = []
    for method in SEARCH_METHODS:
        if method not in run.results:
            continue
        result = run.results[method]
        rows.append(
            {
                "search": method,
                "index_seconds": result.index_seconds,
                "search_seconds": result.search_seconds,
                "accounts_found": len(result.accounts()),
            }
        )
    return rows


def _evidence_accounts(run: RunRecord) -> set[str]:
    out: set[str] = set()
    for ev in run.evidence:
        out.add(ev.account_a)
        out.add(ev.account_b)
    return out


def largest_cluster(run: RunRecord, corpus: Corpus) -> list[str]:
    graph = build_graph(run.evidence, corpus)
    comps = components(graph)
    return comps[0] if comps else []


def summary_report(
    run: RunRecord,
    corpus: Corpus,
    suppression: SuppressionList | None = None,
) -> list[dict]:
    """Account-level and article-level counts in the published row order,
    with derived percentages alongside the raw counts."""
    flagged = _evidence_accounts(run)
    cluster = set(largest_cluster(run, corpus))
    suppressed_accounts = set()
    if suppression is not None:
        for entry in suppression.active_entries():
            if "|" not in entry.entity:
                suppressed_accounts.add(entry.entity)

    total_accounts = corpus.stats.accounts
    total_articles = corpus.stats.articles
    cluster_articles = {c.article_id for c in corpus.comments.values() if c.referee_uid in cluster}
    flagged_articles = {c.article_id for c in corpus.comments.values() if c.referee_uid in flagged}

    def row(section: str, label: str, count: int, denominator: int) -> dict:
        pct = (100.0 * count / denominator) if denominator else 0.0
        return {"section": section, "label": label, "count": count, "percent": pct}

    return [
        row("accounts", "No. unique review accounts", total_accounts, total_accounts),
        row("accounts", "No. unique review accounts removed due to innocent duplication",
            len(suppressed_accounts), total_accounts),
        row("accounts", "No. unique review accounts in largest cluster", len(cluster), total_accounts),
        row("accounts", "No. unique review accounts that produced duplicates or partial duplicates",
            len(flagged), total_accounts),
        row("articles", "No. articles", total_articles, total_articles),
        row("articles", "No. articles with reviews from cluster review accounts",
            len(cluster_articles), total_articles),
        row("articles", "No. articles with reviews from any account that produced duplicates",
            len(flagged_articles), total_articles),
    ]


def cluster_timeseries(
    corpus: Corpus,
    cluster_accounts: Iterable[str],
    bucket: str = "month",
) -> list[tuple[str, float]]:
    """Per calendar month (UTC), 100 * cluster comments / all comments.

    Every month between the corpus' first and last comment appears, with an
    explicit 0 for empty ones."""
    if bucket != "month":
        raise ValueError("only month bucketing is supported")
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    cluster = set(cluster_accounts)
    for c in corpus.comments.values():
        month = c.submitted_at[:7]
        totals[month] = totals.get(month, 0) + 1
        if c.referee_uid in cluster:
            hits[month] = hits.get(month, 0) + 1
    if not totals:
        return []
    months = sorted(totals)
    first, last = months[0], months[-1]
    out: list[tuple[str, float]] = []
    year, month = (int(p) for p in first.split("-"))
    while True:
        key = f"{year:04d}-{month:02d}"
        total = totals.get(key, 0)
        pct = 100.0 * hits.get(key, 0) / total if total else 0.0
        out.append((key, pct))
        if key == last:
            break
        month += 1
        if month > 12:
            month = 1
            year += 1
    return out


def histograms(run: RunRecord) -> dict:
    """Figure/table analogues: duplicate-count histogram (search 1),
    Jaccard distribution (search 2), sentence-frequency distribution."""
    out: dict = {}
    if "search1" in run.results:
        out["duplicate_count_histogram"] = run.results["search1"].aux.get(
            "duplicate_count_histogram", {})
    if "search2" in run.results:
        out["jaccard_histogram"] = run.results["search2"].aux.get("jaccard_histogram", {})
    if "search5" in run.results:
        out["sentence_frequency_distribution"] = run.results["search5"].aux.get(
            "frequency_distribution", {})
    return out


# ---------------------------------------------------------------------------
# CSV / SVG emission
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_quote(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def emit_reports(
    run: RunRecord,
    corpus: Corpus,
    out_dir: str | Path,
    suppression: SuppressionList | None = None,
    svg: bool = False,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = summary_report(run, corpus, suppression)
    _write_csv(
        out_dir / "summary.csv",
        ("section", "label", "count", "percent"),
        ((r["section"], _csv_quote(r["label"]), r["count"], r["percent"]) for r in summary),
    )

    matrix = overlap_matrix(run)
    _write_csv(
        out_dir / "overlap_matrix.csv",
        ("search",) + matrix.searches,
        ((matrix.searches[i],) + matrix.cells[i] for i in range(len(matrix.searches))),
    )

    timing_rows = timing_report(run)
    _write_csv(
        out_dir / "timings.csv",
        ("search", "index_seconds", "search_seconds", "accounts_found"),
        ((r["search"], r["index_seconds"], r["search_seconds"], r["accounts_found"])
         for r in timing_rows),
    )

    hists = histograms(run)
    dup_hist = hists.get("duplicate_count_histogram", {})
    _write_csv(
        out_dir / "fig1_hist.csv",
        ("duplicate_count", "forms"),
        sorted(((int(k), v) for k, v in dup_hist.items())),
    )
    jac = hists.get("jaccard_histogram", {})
    edges = jac.get("edges", [])
    counts = jac.get("counts", [])
    _write_csv(
        out_dir / "fig3_hist.csv",
        ("bin_low", "bin_high", "pairs"),
        ((edges[i], edges[i + 1], counts[i]) for i in range(len(counts))),
    )

    freq_rows = []
    freq_dist = hists.get("sentence_frequency_distribution", {})
    for occurrences in sorted(freq_dist, key=int):
        freq_rows.append(("distribution", occurrences, freq_dist[occurrences], "", ""))
    if "search5" in run.results:
        for row in run.results["search5"].aux.get("frequency_table", ())[:100]:
            d = row.as_dict() if hasattr(row, "as_dict") else row
            freq_rows.append(
                ("sentence", d["total"], d["distinct_referees"],
                 _csv_quote(d["sentence"]), d["excluded_by"])
            )
    _write_csv(
        out_dir / "table2_freq.csv",
        ("kind", "occurrences", "count", "sentence", "excluded_by"),
        freq_rows,
    )

    cluster = largest_cluster(run, corpus)
    series = cluster_timeseries(corpus, cluster)
    _write_csv(out_dir / "fig9_series.csv", ("month", "percent"), series)

    if "search4" in run.results:
        for metric, dist in sorted(
            run.results["search4"].aux.get("distributions", {}).items()
        ):
            d_edges, d_counts = dist["edges"], dist["counts"]
            _write_csv(
                out_dir / f"search4_dist_{metric}.csv",
                ("bin_low", "bin_high", "pairs"),
                ((d_edges[i], d_edges[i + 1], d_counts[i]) for i in range(len(d_counts))),
            )

    if svg:
        (out_dir / "fig1_hist.svg").write_text(
            svgplot.bar_chart(
                [str(k) for k, _ in sorted((int(k), v) for k, v in dup_hist.items())],
                [v for _, v in sorted((int(k), v) for k, v in dup_hist.items())],
                title="Canonical-form duplicate counts",
            ),
            encoding="utf-8",
        )
        if counts:
            (out_dir / "fig3_hist.svg").write_text(
                svgplot.bar_chart(
                    [f"{edges[i]:.2f}" for i in range(len(counts))],
                    counts,
                    title="Sentence Jaccard distribution",
                    log_y=True,
                ),
                encoding="utf-8",
            )
        if series:
            (out_dir / "fig9_series.svg").write_text(
                svgplot.line_chart(
                    [m for m, _ in series],
                    [p for _, p in series],
                    title="Cluster share of comments by month (%)",
                ),
                encoding="utf-8",
            )
    return out_dir
