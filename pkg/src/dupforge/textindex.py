"""Self-contained inverted index with BM25 ranking.

Replaces the external search engine the pipeline would otherwise depend
on, at two granularities: whole comments (search 4) and individual
sentences (search 6).  The analyzer lowercases and splits on
non-alphanumeric characters, with no stemming and no stopwords, so
duplicated boilerplate matches literally.

Scoring, for query q and document d:

    score(q, d) = sum over analyzed query terms t of
        qtf(t) * idf(t) * tf(t, d) * (k1 + 1)
                  / (tf(t, d) + k1 * (1 - b + b * len(d) / avg_len))
    idf(t) = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

with k1 = 1.2 and b = 0.75.  Hits are ranked by score descending, ties
broken by ascending doc id; the self-hit is included (callers remove it).

Per-document weights are precomputed into a sparse term-by-document
matrix, so single queries and blocked bulk retrieval share one exact
scoring path.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

K1 = 1.2
B = 0.75

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def analyze(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Hit:
    doc_id: str
    score: float


class InvertedIndex:
    """Immutable BM25 index over (id, text) documents."""

    def __init__(self, granularity: str = "comment", k1: float = K1, b: float = B):
        if granularity not in ("comment", "sentence"):
            raise ValueError(f"bad granularity {granularity!r}")
        self.granularity = granularity
        self.k1 = k1
        self.b = b
        self.doc_ids: list[str] = []
        self.doc_lengths = np.empty(0, dtype=np.float64)
        self.avg_doc_length = 0.0
        self.doc_count = 0
        # term -> (doc index array sorted ascending, tf array, precomputed weight array)
        self.postings: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self.meta: dict[str, tuple] = {}
        self._term_ids: dict[str, int] | None = None
        self._matrix: sparse.csr_matrix | None = None

    def idf(self, term: str) -> float:
        entry = self.postings.get(term)
        df = len(entry[0]) if entry else 0
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def _self_score(self, terms: Sequence[str]) -> float:
        """Score of a hypothetical document containing exactly the query terms."""
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        dl = float(len(terms))
        denom_len = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length) if self.avg_doc_length else self.k1
        score = 0.0
        for t, qtf in counts.items():
            score += qtf * self.idf(t) * (qtf * (self.k1 + 1.0)) / (qtf + denom_len)
        return score

    def _weights_matrix(self) -> sparse.csr_matrix:
        # terms x docs, entries are the per-occurrence BM25 weights
        if self._matrix is None:
            terms = sorted(self.postings)
            self._term_ids = {t: i for i, t in enumerate(terms)}
            if terms:
                indptr = np.zeros(len(terms) + 1, dtype=np.int64)
                for i, t in enumerate(terms):
                    indptr[i + 1] = indptr[i] + len(self.postings[t][0])
                indices = np.empty(indptr[-1], dtype=np.int64)
                data = np.empty(indptr[-1], dtype=np.float64)
                for i, t in enumerate(terms):
                    idxs, _tf, weights = self.postings[t]
                    indices[indptr[i] : indptr[i + 1]] = idxs
                    data[indptr[i] : indptr[i + 1]] = weights
                self._matrix = sparse.csr_matrix(
                    (data, indices, indptr), shape=(len(terms), max(self.doc_count, 1))
                )
            else:
                self._matrix = sparse.csr_matrix((0, max(self.doc_count, 1)))
        return self._matrix

    def _score_block(self, texts: Sequence[str]) -> np.ndarray:
        matrix = self._weights_matrix()
        term_ids = self._term_ids or {}
        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        for row, text in enumerate(texts):
            counts: dict[int, int] = {}
            for t in analyze(text):
                tid = term_ids.get(t)
                if tid is not None:
                    counts[tid] = counts.get(tid, 0) + 1
            for tid, qtf in counts.items():
                rows.append(row)
                cols.append(tid)
                vals.append(float(qtf))
        q = sparse.csr_matrix(
            (vals, (rows, cols)), shape=(len(texts), matrix.shape[0])
        )
        return (q @ matrix).toarray()

    def _top_hits(self, scores: np.ndarray, top_k: int) -> list[Hit]:
        cand = np.nonzero(scores)[0]
        if cand.size == 0:
            return []
        vals = scores[cand]
        if cand.size > top_k:
            kth = -np.partition(-vals, top_k - 1)[top_k - 1]
            keep = vals >= kth  # ties at the cutoff resolved below by doc id
            cand = cand[keep]
            vals = vals[keep]
        order = np.lexsort((cand, -vals))[:top_k]
        return [Hit(self.doc_ids[cand[i]], float(vals[i])) for i in order]

    def query(self, text: str, top_k: int = 20) -> list[Hit]:
        """Top ``top_k`` documents by BM25, deterministic ordering."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.doc_count == 0 or not analyze(text):
            return []
        scores = self._score_block([text])[0]
        return self._top_hits(scores, top_k)

    def query_block(self, texts: Sequence[str], top_k: int = 20) -> list[list[Hit]]:
        """Batched retrieval; identical results to per-text query() calls."""
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.doc_count == 0 or not texts:
            return [[] for _ in texts]
        scores = self._score_block(texts)
        return [self._top_hits(scores[i], top_k) for i in range(len(texts))]

    def normalized_query(self, text: str, top_k: int = 20) -> list[Hit]:
        """Hits with scores divided by the query's self-score (a verbatim
        copy of the query text scores approximately 1.0)."""
        terms = analyze(text)
        if not terms:
            return []
        self_score = self._self_score(terms)
        if self_score <= 0.0:
            return []
        return [Hit(h.doc_id, h.score / self_score) for h in self.query(text, top_k)]

    def postings_for(self, term: str) -> list[tuple[str, int]]:
        """Debug view of one term's postings as (doc_id, tf) pairs."""
        entry = self.postings.get(term)
        if entry is None:
            return []
        idxs, tfs, _ = entry
        return [(self.doc_ids[i], int(t)) for i, t in zip(idxs, tfs)]

    def save(self, path: str | Path) -> None:
        payload = {
            "granularity": self.granularity,
            "k1": self.k1,
            "b": self.b,
            "doc_ids": self.doc_ids,
            "doc_lengths": self.doc_lengths.tolist(),
            "postings": {
                t: [e[0].tolist(), e[1].tolist()] for t, e in sorted(self.postings.items())
            },
            "meta": {k: list(v) for k, v in sorted(self.meta.items())},
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "InvertedIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        index = cls(granularity=payload["granularity"], k1=payload["k1"], b=payload["b"])
        index.doc_ids = list(payload["doc_ids"])
        index.doc_lengths = np.asarray(payload["doc_lengths"], dtype=np.float64)
        index.doc_count = len(index.doc_ids)
        index.avg_doc_length = float(index.doc_lengths.mean()) if index.doc_count else 0.0
        index.meta = {k: tuple(v) for k, v in payload["meta"].items()}
        for term, (idxs, tfs) in payload["postings"].items():
            index.postings[term] = _with_weights(
                np.asarray(idxs, dtype=np.int64),
                np.asarray(tfs, dtype=np.float64),
                index,
            )
        return index


def _with_weights(
    idxs: np.ndarray, tfs: np.ndarray, index: InvertedIndex
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    df = len(idxs)
    idf = math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))
    if index.avg_doc_length > 0:
        denom = tfs + index.k1 * (1.0 - index.b + index.b * index.doc_lengths[idxs] / index.avg_doc_length)
    else:
        denom = tfs + index.k1
    weights = idf * tfs * (index.k1 + 1.0) / denom
    return idxs, tfs, weights


def build_index(
    docs: Iterable[tuple[str, str]],
    granularity: str = "comment",
    meta: dict[str, tuple] | None = None,
    k1: float = K1,
    b: float = B,
) -> InvertedIndex:
    """Build a deterministic index over unique (id, text) documents.

    Documents are indexed in sorted-id order, so tie-breaking by doc id is
    stable regardless of input order.  Duplicate ids are an error.
    """
    pairs = sorted(docs, key=lambda p: p[0])
    index = InvertedIndex(granularity=granularity, k1=k1, b=b)
    seen: set[str] = set()
    term_docs: dict[str, list[tuple[int, int]]] = {}
    lengths: list[int] = []
    for pos, (doc_id, text) in enumerate(pairs):
        if doc_id in seen:
            raise ValueError(f"duplicate doc id {doc_id!r}")
        seen.add(doc_id)
        index.doc_ids.append(doc_id)
        terms = analyze(text)
        lengths.append(len(terms))
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            term_docs.setdefault(t, []).append((pos, tf))
    index.doc_count = len(index.doc_ids)
    index.doc_lengths = np.asarray(lengths, dtype=np.float64)
    index.avg_doc_length = float(index.doc_lengths.mean()) if index.doc_count else 0.0
    for term, entries in term_docs.items():
        idxs = np.asarray([e[0] for e in entries], dtype=np.int64)
        tfs = np.asarray([e[1] for e in entries], dtype=np.float64)
        index.postings[term] = _with_weights(idxs, tfs, index)
    if meta:
        index.meta = dict(meta)
    return index
