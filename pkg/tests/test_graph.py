import json
import random

import numpy as np
import pytest

from conftest import corpus_from
from dupforge.graph import (
    EvidenceGraph,
    DupEdge,
    GraphError,
    SuppressionList,
    build_graph,
    classify,
    components,
    pagerank,
    ranking_csv,
    recommenders_of,
)
from dupforge.searches import pair_evidence
from dupforge.similarity import SimilarityScore
from dupforge.synth import SyntheticSpec, generate_synthetic


def ev(a, b, comments, method="search2"):
    metric = {"search1": "exact", "search2": "sentence_jaccard"}.get(method, "shingle_jaccard")
    spans = ("span.",) if method in ("search1", "search2", "search5", "search6") else ()
    return pair_evidence(a, b, method, SimilarityScore(metric, 1.0), comments, spans)


def graph_of(edges: dict[tuple[str, str], int]) -> EvidenceGraph:
    g = EvidenceGraph()
    for (a, b), w in edges.items():
        g.dup_edges[(a, b)] = DupEdge(a, b, w, ("search2",))
    return g


def pagerank_oracle(edges: dict[tuple[str, str], float], damping=0.85, iters=2000):
    """Dense-matrix power iteration, independent of the library code."""
    nodes = sorted({u for e in edges for u in e})
    n = len(nodes)
    pos = {u: i for i, u in enumerate(nodes)}
    W = np.zeros((n, n))
    for (a, b), w in edges.items():
        W[pos[a], pos[b]] += w
        W[pos[b], pos[a]] += w
    out = W.sum(axis=1, keepdims=True)
    P = W / out
    x = np.full(n, 1.0 / n)
    for _ in range(iters):
        x = (1 - damping) / n + damping * (P.T @ x)
    return dict(zip(nodes, x / x.sum()))


class UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


TEXT_A = "Shared template sentence one. Shared template sentence two."
TEXT_B = "Shared template sentence one. Shared template sentence two."


class TestBuildGraph:
    def _corpus(self):
        return corpus_from(
            {"uidA": [TEXT_A, TEXT_A, TEXT_A], "uidB": [TEXT_B, TEXT_B, TEXT_B]},
            authorship={"A0001": ("uidLead", ("uidCo",))},
        )

    def test_three_incidents_single_edge_weight_three(self):
        corpus = self._corpus()
        # uidA comments c0001..c0003, uidB c0004..c0006
        evidence = [
            ev("uidA", "uidB", ("c0001", "c0004")),
            ev("uidA", "uidB", ("c0002", "c0005")),
            ev("uidA", "uidB", ("c0003", "c0006")),
        ]
        graph = build_graph(evidence, corpus)
        assert list(graph.dup_edges) == [("uidA", "uidB")]
        assert graph.dup_edges[("uidA", "uidB")].weight == 3
        assert graph.nodes["uidA"].dup_count == 3

    def test_repeated_incident_counted_once(self):
        corpus = self._corpus()
        evidence = [
            ev("uidA", "uidB", ("c0001", "c0004"), method="search2"),
            ev("uidA", "uidB", ("c0001", "c0004"), method="search3"),
        ]
        graph = build_graph(evidence, corpus)
        edge = graph.dup_edges[("uidA", "uidB")]
        assert edge.weight == 1
        assert edge.methods == ("search2", "search3")

    def test_author_role_attributes(self):
        corpus = corpus_from(
            {"uidA": [TEXT_A], "uidLead": [TEXT_B]},
            authorship={"A9": ("uidLead", ())},
        )
        graph = build_graph([ev("uidA", "uidLead", ("c0001", "c0002"))], corpus)
        assert graph.nodes["uidLead"].author_role == "lead_author"
        assert graph.nodes["uidA"].author_role == "never_author"

    def test_reviewed_for_edges_from_authorship(self):
        corpus = corpus_from(
            {"uidA": [TEXT_A], "uidB": [TEXT_B]},
            authorship={"A0001": ("uidAuthor", ()), "A0002": ("uidAuthor", ())},
        )
        graph = build_graph([ev("uidA", "uidB", ("c0001", "c0002"))], corpus)
        edges = {(e.referee, e.author): e.count for e in graph.reviewed_for}
        assert edges == {("uidA", "uidAuthor"): 1, ("uidB", "uidAuthor"): 1}

    def test_suppressed_node_and_incident_edges_absent(self):
        corpus = self._corpus()
        suppression = SuppressionList()
        suppression.suppress("uidA", "board_member", "editor account")
        graph = build_graph([ev("uidA", "uidB", ("c0001", "c0004"))], corpus, suppression)
        assert graph.nodes == {}
        assert graph.dup_edges == {}

    def test_unknown_account_is_error(self):
        corpus = self._corpus()
        with pytest.raises(GraphError):
            build_graph([ev("uidA", "uidZ", ("c0001", "c0004"))], corpus)

    def test_rebuild_identical_serialization(self):
        corpus = self._corpus()
        evidence = [ev("uidA", "uidB", ("c0001", "c0004"))]
        a = json.dumps(build_graph(evidence, corpus).to_json(), sort_keys=True)
        b = json.dumps(build_graph(evidence, corpus).to_json(), sort_keys=True)
        assert a == b

    def test_graphml_export_parses(self):
        import xml.etree.ElementTree as ET

        corpus = self._corpus()
        graph = build_graph([ev("uidA", "uidB", ("c0001", "c0004"))], corpus)
        root = ET.fromstring(graph.to_graphml())
        assert root.tag.endswith("graphml")


class TestPageRank:
    def test_two_nodes_split_evenly(self):
        ranks = pagerank(graph_of({("a", "b"): 1}))
        assert [round(r.pagerank, 9) for r in ranks] == [0.5, 0.5]

    def test_empty_graph_empty_ranking(self):
        assert pagerank(EvidenceGraph()) == []

    def test_star_center_dominates_and_matches_oracle(self):
        edges = {("center", f"leaf{i}"): 1 for i in range(4)}
        ranks = pagerank(graph_of(edges), tol=1e-12)
        by_uid = {r.uid: r.pagerank for r in ranks}
        assert all(by_uid["center"] > by_uid[f"leaf{i}"] for i in range(4))
        oracle = pagerank_oracle(edges)
        for uid, score in oracle.items():
            assert by_uid[uid] == pytest.approx(score, abs=1e-6)

    def test_two_disconnected_pairs_quarter_each(self):
        ranks = pagerank(graph_of({("a", "b"): 3, ("c", "d"): 7}))
        assert [round(r.pagerank, 9) for r in ranks] == [0.25, 0.25, 0.25, 0.25]

    def test_cycle_uniform(self):
        n = 6
        edges = {(f"n{i}", f"n{(i + 1) % n}"): 1 for i in range(n - 1)}
        edges[("n0", f"n{n - 1}")] = 1
        ranks = pagerank(graph_of(edges), tol=1e-12)
        for r in ranks:
            assert r.pagerank == pytest.approx(1 / n, abs=1e-9)

    def test_sums_to_one(self):
        rng = random.Random(3)
        for trial in range(5):
            edges = {}
            for _ in range(15):
                a, b = rng.sample(range(10), 2)
                edges[(f"n{min(a, b)}", f"n{max(a, b)}")] = rng.randint(1, 9)
            ranks = pagerank(graph_of(edges))
            assert sum(r.pagerank for r in ranks) == pytest.approx(1.0, abs=1e-6)

    def test_matches_oracle_on_random_weighted_graphs(self):
        rng = random.Random(5)
        for trial in range(10):
            edges = {}
            for _ in range(14):
                a, b = rng.sample(range(10), 2)
                edges[(f"n{min(a, b)}", f"n{max(a, b)}")] = rng.randint(1, 5)
            ranks = {r.uid: r.pagerank for r in pagerank(graph_of(edges), tol=1e-12)}
            oracle = pagerank_oracle(edges)
            for uid, score in oracle.items():
                assert ranks[uid] == pytest.approx(score, abs=1e-6), trial

    def test_ranking_invariant_under_weight_scaling(self):
        rng = random.Random(7)
        edges = {}
        for _ in range(20):
            a, b = rng.sample(range(12), 2)
            edges[(f"n{min(a, b)}", f"n{max(a, b)}")] = rng.randint(1, 9)
        base = [r.uid for r in pagerank(graph_of(edges), tol=1e-12)]
        scaled = [r.uid for r in pagerank(graph_of({k: w * 17 for k, w in edges.items()}), tol=1e-12)]
        assert base == scaled

    def test_unweighted_mode(self):
        edges = {("a", "b"): 100, ("b", "c"): 1}
        weighted = {r.uid: r.pagerank for r in pagerank(graph_of(edges), weighted=True)}
        unweighted = {r.uid: r.pagerank for r in pagerank(graph_of(edges), weighted=False)}
        assert weighted["a"] > unweighted["a"]

    def test_ranking_csv_shape(self):
        text = ranking_csv(pagerank(graph_of({("uid1", "uid2"): 1})))
        lines = text.strip().split("\n")
        assert lines[0] == "UID,PageRank"
        assert lines[1].startswith("uid") and lines[1].endswith("0.500000")


class TestComponents:
    def test_empty(self):
        assert components(EvidenceGraph()) == []

    def test_matches_union_find_oracle(self):
        rng = random.Random(11)
        for trial in range(10):
            n = rng.randint(2, 1000)
            edges = {}
            for _ in range(int(n * 1.2)):
                a, b = rng.sample(range(n), 2)
                edges[(f"n{min(a, b):04d}", f"n{max(a, b):04d}")] = 1
            got = components(graph_of(edges))

            uf = UnionFind()
            for a, b in edges:
                uf.union(a, b)
            expected_groups: dict[str, set[str]] = {}
            for node in {u for e in edges for u in e}:
                expected_groups.setdefault(uf.find(node), set()).add(node)
            expected = sorted((sorted(g) for g in expected_groups.values()),
                              key=lambda g: (-len(g), g[0]))
            assert got == expected

    def test_classification_boundary(self):
        edges = {("a", "b"): 1, ("b", "c"): 1, ("c", "d"): 1, ("x", "y"): 1}
        result = classify(graph_of(edges), boundary=4)
        assert result["clusters"] == [["a", "b", "c", "d"]]
        assert result["pairs"] == [["x", "y"]]

    def test_weak_link_edge_merges_components(self):
        separate = graph_of({("a", "b"): 1, ("c", "d"): 1})
        assert len(components(separate)) == 2
        merged = graph_of({("a", "b"): 1, ("c", "d"): 1, ("b", "c"): 1})
        assert len(components(merged)) == 1


class TestRecommenders:
    def test_five_recommending_authors(self):
        recs = {f"A{i}": (("uidAuth%d" % i, "uidRef"),) for i in range(5)}
        corpus = corpus_from({"uidRef": [TEXT_A]}, recommendations=recs)
        out = recommenders_of(["uidRef"], corpus)
        assert len(out["uidRef"]) == 5
        assert {r["author"] for r in out["uidRef"]} == {f"uidAuth{i}" for i in range(5)}

    def test_never_recommended_empty(self):
        corpus = corpus_from({"uidRef": [TEXT_A]})
        assert recommenders_of(["uidRef"], corpus) == {"uidRef": []}

    def test_generator_planted_recommenders_recovered(self):
        corpus, truth = generate_synthetic(SyntheticSpec(
            seed=71, innocent_accounts=5, comments_per_account=2,
            mill_accounts=2, mill_templates=1, recommending_authors=10))
        out = recommenders_of(truth.mill_accounts, corpus)
        for referee, authors in truth.mill_recommenders.items():
            assert set(a["author"] for a in out[referee]) == set(authors)


class TestSuppressionList:
    def test_append_only_versioning(self):
        sl = SuppressionList()
        assert sl.version == 0
        entry = sl.suppress("uidX", "board_member", "editor")
        assert sl.version == 1
        sl.revoke(entry.entry_id)
        assert sl.version == 2
        assert len(sl.entries) == 2  # tombstone appended, nothing rewritten
        assert not sl.is_suppressed_account("uidX")

    def test_category_and_reason_required(self):
        sl = SuppressionList()
        with pytest.raises(ValueError):
            sl.suppress("uidX", "nonsense", "r")
        with pytest.raises(ValueError):
            sl.suppress("uidX", "other", "")

    def test_pair_suppression(self):
        sl = SuppressionList()
        sl.suppress(SuppressionList.pair_entity("uidB", "uidA"), "other", "pair")
        assert sl.is_suppressed_pair("uidA", "uidB")
        assert sl.is_suppressed_pair("uidB", "uidA")
        assert not sl.is_suppressed_account("uidA")

    def test_save_load(self, tmp_path):
        sl = SuppressionList()
        sl.suppress("uidX", "practice_document", "training doc")
        e2 = sl.suppress("uidY", "other", "temp")
        sl.revoke(e2.entry_id)
        sl.save(tmp_path / "sup.jsonl")
        loaded = SuppressionList.load(tmp_path / "sup.jsonl")
        assert loaded.version == 3
        assert loaded.is_suppressed_account("uidX")
        assert not loaded.is_suppressed_account("uidY")

    def test_revoke_unknown(self):
        with pytest.raises(KeyError):
            SuppressionList().revoke(42)
