"""Evidence graph of reviewer accounts: typed edges, connected components,
PageRank triage ranking, and investigation queries.

Nodes are referee accounts.  Duplication edges are undirected; their
weight counts distinct duplication incidents (an incident is one distinct
set of implicated comments, however many searches rediscovered it).
Reviewed-for edges connect a referee to the lead author of every article
it refereed, independent of any duplication finding.  PageRank runs on the
duplication subgraph only, with each undirected edge treated as a pair of
directed edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .corpus import Corpus
from .searches import PairEvidence

SUPPRESSION_CATEGORIES = ("board_member", "practice_document", "duplicate_account", "other")


class GraphError(Exception):
    pass


@dataclass
class GraphNode:
    uid: str
    author_role: str  # never_author | lead_author | co_author
    dup_count: int = 0
    flags: tuple[str, ...] = ()


@dataclass
class DupEdge:
    account_a: str
    account_b: str
    weight: int
    methods: tuple[str, ...]


@dataclass
class ReviewedForEdge:
    referee: str
    author: str
    count: int


@dataclass
class EvidenceGraph:
    nodes: dict[str, GraphNode] = field(default_factory=dict)
    dup_edges: dict[tuple[str, str], DupEdge] = field(default_factory=dict)
    reviewed_for: list[ReviewedForEdge] = field(default_factory=list)

    def neighbors(self, uid: str) -> list[str]:
        out = []
        for a, b in self.dup_edges:
            if a == uid:
                out.append(b)
            elif b == uid:
                out.append(a)
        return sorted(out)

    def to_json(self) -> dict:
        return {
            "nodes": [
                {
                    "uid": n.uid,
                    "author_role": n.author_role,
                    "dup_count": n.dup_count,
                    "flags": list(n.flags),
                }
                for n in (self.nodes[k] for k in sorted(self.nodes))
            ],
            "edges": [
                {
                    "type": "duplication",
                    "a": e.account_a,
                    "b": e.account_b,
                    "weight": e.weight,
                    "methods": list(e.methods),
                }
                for _, e in sorted(self.dup_edges.items())
            ]
            + [
                {
                    "type": "reviewed_for",
                    "a": e.referee,
                    "b": e.author,
                    "weight": e.count,
                }
                for e in sorted(self.reviewed_for, key=lambda e: (e.referee, e.author))
            ],
        }

    def to_graphml(self) -> str:
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
            '<key id="role" for="node" attr.name="author_role" attr.type="string"/>',
            '<key id="dups" for="node" attr.name="dup_count" attr.type="int"/>',
            '<key id="etype" for="edge" attr.name="type" attr.type="string"/>',
            '<key id="weight" for="edge" attr.name="weight" attr.type="int"/>',
            '<graph id="evidence" edgedefault="undirected">',
        ]
        for uid in sorted(self.nodes):
            node = self.nodes[uid]
            lines.append(f"<node id={quoteattr(uid)}>")
            lines.append(f'<data key="role">{escape(node.author_role)}</data>')
            lines.append(f'<data key="dups">{node.dup_count}</data>')
            lines.append("</node>")
        for (a, b), edge in sorted(self.dup_edges.items()):
            lines.append(f"<edge source={quoteattr(a)} target={quoteattr(b)}>")
            lines.append('<data key="etype">duplication</data>')
            lines.append(f'<data key="weight">{edge.weight}</data>')
            lines.append("</edge>")
        for edge in sorted(self.reviewed_for, key=lambda e: (e.referee, e.author)):
            lines.append(f"<edge source={quoteattr(edge.referee)} target={quoteattr(edge.author)}>")
            lines.append('<data key="etype">reviewed_for</data>')
            lines.append(f'<data key="weight">{edge.count}</data>')
            lines.append("</edge>")
        lines.append("</graph>")
        lines.append("</graphml>")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RankEntry:
    uid: str
    pagerank: float
    position: int


# ---------------------------------------------------------------------------
# Suppression list (append-only, versioned)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuppressionEntry:
    entry_id: int
    entity: str  # "uid..." or "uidA|uidB" for a pair
    category: str
    reason: str
    active: bool = True

    def as_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "entity": self.entity,
            "category": self.category,
            "reason": self.reason,
            "active": self.active,
        }


class SuppressionList:
    """Curated false-positive exclusions, applied before graph building.

    Append-only: revoking an entry appends a tombstone and bumps the
    version, it never rewrites history.
    """

    def __init__(self):
        self.entries: list[SuppressionEntry] = []
        self.version = 0
        self._lock = Lock()

    @staticmethod
    def pair_entity(a: str, b: str) -> str:
        return f"{min(a, b)}|{max(a, b)}"

    def suppress(self, entity: str, category: str, reason: str) -> SuppressionEntry:
        if category not in SUPPRESSION_CATEGORIES:
            raise ValueError(f"unknown suppression category {category!r}")
        if not reason:
            raise ValueError("a suppression reason is required")
        with self._lock:
            entry = SuppressionEntry(len(self.entries) + 1, entity, category, reason, True)
            self.entries.append(entry)
            self.version += 1
            return entry

    def revoke(self, entry_id: int, reason: str = "revoked") -> SuppressionEntry:
        with self._lock:
            target = next((e for e in self.entries if e.entry_id == entry_id and e.active), None)
            if target is None:
                raise KeyError(f"no active suppression entry {entry_id}")
            tombstone = SuppressionEntry(
                len(self.entries) + 1, target.entity, target.category, reason, False
            )
            self.entries.append(tombstone)
            self.version += 1
            return tombstone

    def _active_entities(self) -> set[str]:
        state: dict[str, bool] = {}
        for e in self.entries:
            state[e.entity] = e.active
        return {entity for entity, active in state.items() if active}

    def active_entries(self) -> list[SuppressionEntry]:
        alive = self._active_entities()
        out: dict[str, SuppressionEntry] = {}
        for e in self.entries:
            if e.active and e.entity in alive:
                out[e.entity] = e
        return list(out.values())

    def is_suppressed_account(self, uid: str) -> bool:
        return uid in self._active_entities()

    def is_suppressed_pair(self, a: str, b: str) -> bool:
        return self.pair_entity(a, b) in self._active_entities()

    def save(self, path: str | Path) -> None:
        lines = [json.dumps(e.as_dict(), sort_keys=True) for e in self.entries]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SuppressionList":
        sl = cls()
        path = Path(path)
        if not path.exists():
            return sl
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                sl.entries.append(SuppressionEntry(
                    d["entry_id"], d["entity"], d["category"], d["reason"], d["active"]
                ))
        sl.version = len(sl.entries)
        return sl


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def build_graph(
    evidence: Sequence[PairEvidence],
    corpus: Corpus,
    suppression: SuppressionList | None = None,
) -> EvidenceGraph:
    """Build the evidence graph from one run's evidence.

    One duplication edge per account pair; suppressed accounts and pairs
    are absent.  Evidence naming an account unknown to the corpus is a
    corpus/evidence mismatch and raises."""
    graph = EvidenceGraph()
    incidents: dict[tuple[str, str], set[tuple[str, ...]]] = {}
    methods: dict[tuple[str, str], set[str]] = {}
    node_comments: dict[str, set[str]] = {}

    for ev in evidence:
        for uid in (ev.account_a, ev.account_b):
            if uid not in corpus.accounts:
                raise GraphError(f"evidence references unknown account {uid!r}")
        if suppression is not None:
            if (suppression.is_suppressed_account(ev.account_a)
                    or suppression.is_suppressed_account(ev.account_b)
                    or suppression.is_suppressed_pair(ev.account_a, ev.account_b)):
                continue
        key = (ev.account_a, ev.account_b)
        incidents.setdefault(key, set()).add(ev.comment_ids)
        methods.setdefault(key, set()).add(ev.method)
        for uid in key:
            owned = node_comments.setdefault(uid, set())
            for cid in ev.comment_ids:
                comment = corpus.comments.get(cid)
                if comment is not None and comment.referee_uid == uid:
                    owned.add(cid)

    for (a, b), incident_set in sorted(incidents.items()):
        graph.dup_edges[(a, b)] = DupEdge(a, b, len(incident_set), tuple(sorted(methods[(a, b)])))
    for uid in sorted(node_comments):
        graph.nodes[uid] = GraphNode(
            uid=uid,
            author_role=corpus.accounts.get(uid, "never_author"),
            dup_count=len(node_comments[uid]),
        )

    # reviewed-for edges: referee -> lead author of every article refereed,
    # at any time, restricted to accounts present in the graph
    counts: dict[tuple[str, str], int] = {}
    for c in corpus.comments.values():
        if c.referee_uid not in graph.nodes:
            continue
        entry = corpus.authorship.get(c.article_id)
        if entry is None:
            continue
        lead = entry[0]
        if lead and lead != c.referee_uid:
            counts[(c.referee_uid, lead)] = counts.get((c.referee_uid, lead), 0) + 1
    for (referee, author), count in sorted(counts.items()):
        graph.reviewed_for.append(ReviewedForEdge(referee, author, count))
    return graph


# ---------------------------------------------------------------------------
# PageRank on the duplication subgraph
# ---------------------------------------------------------------------------


def pagerank(
    graph: EvidenceGraph,
    damping: float = 0.85,
    tol: float = 1e-6,
    max_iter: int = 100,
    weighted: bool = True,
) -> list[RankEntry]:
    """Power iteration over the duplication edges until the L1 change
    drops below ``tol``.  Scores sum to 1; empty graphs rank nothing."""
    uids = sorted({u for edge in graph.dup_edges for u in edge})
    if not uids:
        return []
    pos = {u: i for i, u in enumerate(uids)}
    n = len(uids)
    src, dst, wgt = [], [], []
    for (a, b), edge in graph.dup_edges.items():
        w = float(edge.weight) if weighted else 1.0
        src += [pos[a], pos[b]]
        dst += [pos[b], pos[a]]
        wgt += [w, w]
    src = np.asarray(src)
    dst = np.asarray(dst)
    wgt = np.asarray(wgt, dtype=np.float64)
    out_weight = np.zeros(n)
    np.add.at(out_weight, src, wgt)
    share = wgt / out_weight[src]

    x = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    for _ in range(max_iter):
        nxt = np.full(n, base)
        np.add.at(nxt, dst, damping * x[src] * share)
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    x = x / x.sum()
    order = sorted(range(n), key=lambda i: (-x[i], uids[i]))
    return [RankEntry(uids[i], float(x[i]), position + 1) for position, i in enumerate(order)]


def components(graph: EvidenceGraph) -> list[list[str]]:
    """Connected components of the duplication subgraph, largest first."""
    adjacency: dict[str, set[str]] = {}
    for a, b in graph.dup_edges:
        adjacency.setdefault(a, set()).add(b)
        adjacency.setdefault(b, set()).add(a)
    seen: set[str] = set()
    out: list[list[str]] = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack = [start]
        comp = []
        seen.add(start)
        while stack:
            node = stack.pop()
            comp.append(node)
            for nb in adjacency[node]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        out.append(sorted(comp))
    out.sort(key=lambda comp: (-len(comp), comp[0]))
    return out


def classify(graph: EvidenceGraph, boundary: int = 4) -> dict[str, list[list[str]]]:
    """Split components into large clusters (size >= boundary) and
    small pairs."""
    clusters, pairs = [], []
    for comp in components(graph):
        (clusters if len(comp) >= boundary else pairs).append(comp)
    return {"clusters": clusters, "pairs": pairs}


def recommenders_of(flagged: Iterable[str], corpus: Corpus) -> dict[str, list[dict]]:
    """For each flagged referee, every author that recommended it, with
    the article the recommendation was made on."""
    out: dict[str, list[dict]] = {uid: [] for uid in sorted(flagged)}
    for article_id in sorted(corpus.recommendations):
        for author, referee in corpus.recommendations[article_id]:
            if referee in out:
                out[referee].append({"author": author, "article_id": article_id})
    return out


def ranking_csv(entries: Sequence[RankEntry]) -> str:
    lines = ["UID,PageRank"]
    for e in entries:
        lines.append(f"{e.uid},{e.pagerank:.6f}")
    return "\n".join(lines) + "\n"
