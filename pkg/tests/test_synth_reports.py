import json
import xml.etree.ElementTree as ET

import pytest

from conftest import corpus_from
from dupforge.corpus import save_corpus
from dupforge.reports import (
    cluster_timeseries,
    emit_reports,
    histograms,
    overlap_matrix,
    summary_report,
    timing_report,
)
from dupforge.searches import (
    RunConfig,
    RunRecord,
    SearchResult,
    pair_evidence,
    run_all,
)
from dupforge.similarity import SimilarityScore
from dupforge.synth import SyntheticSpec, generate_rows, generate_synthetic, mutate_sentence
from dupforge import svgplot


def fake_run(account_sets: dict[str, list[tuple[str, str]]]) -> RunRecord:
    record = RunRecord(run_id="fake", config=RunConfig(), corpus_version="v", suppression_version=0)
    for method, pairs in account_sets.items():
        metric = {"search1": "exact", "search2": "sentence_jaccard",
                  "search5": "exact", "search6": "bm25"}.get(method, "shingle_jaccard")
        spans = ("span.",) if method in ("search1", "search2", "search5", "search6") else ()
        evidence = [
            pair_evidence(a, b, method, SimilarityScore(metric, 1.0), (f"c{a}", f"c{b}"), spans)
            for a, b in pairs
        ]
        record.results[method] = SearchResult(method=method, evidence=evidence,
                                              index_seconds=0.5, search_seconds=0.25)
    record.status = "complete"
    return record


class TestSyntheticSpec:
    def test_invalid_mutation_rate(self):
        with pytest.raises(ValueError):
            SyntheticSpec(template_mutation_rate=1.5)

    def test_negative_counts(self):
        with pytest.raises(ValueError):
            SyntheticSpec(innocent_accounts=-1)

    def test_more_templates_than_comments(self):
        with pytest.raises(ValueError):
            SyntheticSpec(mill_accounts=1, comments_per_account=2, mill_templates=5)

    def test_too_many_typos(self):
        with pytest.raises(ValueError):
            SyntheticSpec(typo_sentences=99)


class TestGenerator:
    def test_zero_mill_empty_ground_truth(self):
        _, truth = generate_synthetic(SyntheticSpec(seed=1, innocent_accounts=5,
                                                    comments_per_account=2))
        assert truth.mill_accounts == ()
        assert truth.guilty_accounts == frozenset()
        assert truth.typo_sentences == ()

    def test_same_seed_identical_corpora(self, tmp_path):
        spec = SyntheticSpec(seed=9, innocent_accounts=10, comments_per_account=3,
                             mill_accounts=4, mill_templates=2, weak_link_accounts=1,
                             recommending_authors=2)
        a = save_corpus(generate_synthetic(spec)[0], tmp_path / "a")
        b = save_corpus(generate_synthetic(spec)[0], tmp_path / "b")
        for name in ("comments.jsonl", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_different_seed_differs(self):
        rows1, _ = generate_rows(SyntheticSpec(seed=1, innocent_accounts=3, comments_per_account=1))
        rows2, _ = generate_rows(SyntheticSpec(seed=2, innocent_accounts=3, comments_per_account=1))
        assert rows1 != rows2

    def test_all_rows_pass_ingest_filters(self):
        corpus, _ = generate_synthetic(SyntheticSpec(
            seed=3, innocent_accounts=20, comments_per_account=3,
            mill_accounts=5, mill_templates=2, weak_link_accounts=2))
        rows, _ = generate_rows(SyntheticSpec(
            seed=3, innocent_accounts=20, comments_per_account=3,
            mill_accounts=5, mill_templates=2, weak_link_accounts=2))
        assert len(corpus.comments) == len(rows)
        assert len(corpus.exclusions) == 0

    def test_mill_accounts_share_verbatim_sentences(self):
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=5, innocent_accounts=5, comments_per_account=4,
            mill_accounts=47, mill_templates=10, template_mutation_rate=0.2))
        sentences_by_account = {}
        for c in corpus.comments.values():
            if c.referee_uid in truth.mill_accounts:
                sentences_by_account.setdefault(c.referee_uid, set()).update(c.sentences)
        for uid, sentences in sentences_by_account.items():
            shared = any(
                sentences & other
                for other_uid, other in sentences_by_account.items()
                if other_uid != uid
            )
            assert shared, f"{uid} shares no verbatim sentence"

    def test_mutation_always_changes_sentence(self):
        import random

        rng = random.Random(13)
        sentence = "The novelty claim satisfies the journal standard after minor polishing."
        for _ in range(200):
            assert mutate_sentence(sentence, rng) != sentence

    def test_weak_links_copy_two_template_sentences(self):
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=7, innocent_accounts=5, comments_per_account=3,
            mill_accounts=4, mill_templates=2, weak_link_accounts=2))
        template_sentences = {s for t in truth.templates for s in t}
        for weak in truth.weak_link_accounts:
            owned = set()
            for c in corpus.comments.values():
                if c.referee_uid == weak:
                    owned.update(c.sentences)
            assert len(owned & template_sentences) >= 1


class TestSummaryReport:
    def test_empty_run_zeroes_with_corpus_totals(self):
        corpus = corpus_from({"uid1": ["A sentence here."]})
        record = RunRecord(run_id="r", config=RunConfig(), corpus_version="v",
                           suppression_version=0, status="complete")
        rows = summary_report(record, corpus)
        assert rows[0]["label"] == "No. unique review accounts"
        assert rows[0]["count"] == 1
        assert rows[1]["count"] == 0
        assert rows[2]["count"] == 0
        assert rows[3]["count"] == 0
        assert rows[4]["label"] == "No. articles"

    def test_planted_mill_counts(self):
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=21, innocent_accounts=15, comments_per_account=3,
            mill_accounts=6, mill_templates=2, typo_sentences=2))
        record = run_all(corpus, RunConfig(curated_sentences=truth.typo_sentences))
        rows = summary_report(record, corpus)
        by_label = {r["label"]: r for r in rows}
        largest = by_label["No. unique review accounts in largest cluster"]["count"]
        assert largest >= len(truth.mill_accounts) * 0.9
        flagged = by_label["No. unique review accounts that produced duplicates or partial duplicates"]
        assert flagged["count"] >= largest
        assert 0.0 <= flagged["percent"] <= 100.0


class TestOverlapMatrix:
    def test_identical_sets_zero_cells(self):
        run = fake_run({"search1": [("uidA", "uidB")], "search2": [("uidA", "uidB")]})
        matrix = overlap_matrix(run)
        assert matrix.cell("search1", "search2") == 0
        assert matrix.cell("search2", "search1") == 0

    def test_asymmetric_difference(self):
        run = fake_run({
            "search1": [("uidX", "uidY"), ("uidY", "uidZ")],  # accounts x,y,z
            "search2": [("uidY", "uidQ")],                     # accounts y,q
        })
        matrix = overlap_matrix(run)
        assert matrix.cell("search1", "search2") == 2  # x and z
        assert matrix.cell("search2", "search1") == 1  # q

    def test_diagonal_zero_and_recomputation(self):
        run = fake_run({
            "search1": [("uidA", "uidB")],
            "search3": [("uidB", "uidC"), ("uidD", "uidE")],
            "search5": [("uidA", "uidE")],
        })
        matrix = overlap_matrix(run)
        sets = {m: run.results[m].accounts() for m in matrix.searches}
        for i, row in enumerate(matrix.searches):
            for j, col in enumerate(matrix.searches):
                expected = 0 if i == j else len(sets[row] - sets[col])
                assert matrix.cells[i][j] == expected


class TestTimingReport:
    def test_table_shape(self):
        run = fake_run({"search1": [("uidA", "uidB")], "search4": []})
        rows = timing_report(run)
        assert [r["search"] for r in rows] == ["search1", "search4"]
        assert all(set(r) == {"search", "index_seconds", "search_seconds", "accounts_found"}
                   for r in rows)
        assert rows[0]["accounts_found"] == 2


class TestClusterTimeseries:
    def test_no_cluster_all_zero(self):
        corpus, _ = generate_synthetic(SyntheticSpec(seed=2, innocent_accounts=5,
                                                     comments_per_account=2))
        series = cluster_timeseries(corpus, [])
        assert series and all(pct == 0.0 for _, pct in series)

    def test_share_arithmetic(self):
        texts = {"uidCluster": ["Cluster comment body."],
                 **{f"uid{i}": ["Innocent body text."] for i in range(99)}}
        corpus = corpus_from(texts)
        series = cluster_timeseries(corpus, ["uidCluster"])
        assert series == [("2020-06", 1.0)]

    def test_peak_month_argmax(self):
        # dense enough that no month is carried by a handful of comments
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=23, innocent_accounts=100, comments_per_account=6,
            mill_accounts=8, mill_templates=3, mill_comments_per_account=6))
        series = cluster_timeseries(corpus, truth.mill_accounts)
        best_month = max(series, key=lambda kv: kv[1])[0]
        assert best_month == truth.peak_month

    def test_contiguous_months_with_explicit_zeroes(self):
        texts = {"uid1": ["January comment."], "uid2": ["April comment."]}
        corpus = corpus_from(texts)
        # corpus_from pins all dates; spread them manually
        c1, c2 = sorted(corpus.comments)
        object.__setattr__(corpus.comments[c1], "submitted_at", "2020-01-10")
        object.__setattr__(corpus.comments[c2], "submitted_at", "2020-04-02")
        series = cluster_timeseries(corpus, ["uid1"])
        assert [m for m, _ in series] == ["2020-01", "2020-02", "2020-03", "2020-04"]
        assert series[1][1] == 0.0 and series[2][1] == 0.0


class TestEmitReports:
    def _run_and_corpus(self, tmp_path):
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=27, innocent_accounts=12, comments_per_account=3,
            mill_accounts=5, mill_templates=2, typo_sentences=2))
        record = run_all(corpus, RunConfig(curated_sentences=truth.typo_sentences))
        return record, corpus

    def test_all_files_emitted(self, tmp_path):
        record, corpus = self._run_and_corpus(tmp_path)
        out = emit_reports(record, corpus, tmp_path / "reports")
        names = {p.name for p in out.iterdir()}
        for expected in ("summary.csv", "overlap_matrix.csv", "timings.csv", "fig1_hist.csv",
                         "fig3_hist.csv", "table2_freq.csv", "fig9_series.csv"):
            assert expected in names
        assert any(n.startswith("search4_dist_") for n in names)

    def test_reemission_byte_identical(self, tmp_path):
        record, corpus = self._run_and_corpus(tmp_path)
        a = emit_reports(record, corpus, tmp_path / "a")
        b = emit_reports(record, corpus, tmp_path / "b")
        for path in sorted(a.iterdir()):
            assert path.read_bytes() == (b / path.name).read_bytes(), path.name

    def test_histograms_passthrough(self, tmp_path):
        record, corpus = self._run_and_corpus(tmp_path)
        hists = histograms(record)
        assert "duplicate_count_histogram" in hists
        assert "jaccard_histogram" in hists
        assert "sentence_frequency_distribution" in hists
        assert sum(hists["jaccard_histogram"]["counts"]) > 0

    def test_svg_outputs_valid_xml(self, tmp_path):
        record, corpus = self._run_and_corpus(tmp_path)
        out = emit_reports(record, corpus, tmp_path / "svg", svg=True)
        for name in ("fig1_hist.svg", "fig3_hist.svg", "fig9_series.svg"):
            ET.fromstring((out / name).read_text(encoding="utf-8"))

    def test_timeseries_percentages_bounded(self, tmp_path):
        record, corpus = self._run_and_corpus(tmp_path)
        out = emit_reports(record, corpus, tmp_path / "r")
        lines = (out / "fig9_series.csv").read_text().strip().split("\n")[1:]
        for line in lines:
            pct = float(line.split(",")[1])
            assert 0.0 <= pct <= 100.0


class TestSvgPlot:
    def test_bar_chart_log_scale(self):
        svg = svgplot.bar_chart(["1", "2"], [10, 1000], title="t", log_y=True)
        ET.fromstring(svg)
        assert "log scale" in svg

    def test_empty_series(self):
        ET.fromstring(svgplot.line_chart([], [], title="empty"))
