"""The six duplication searches and the orchestrating pipeline.

Searches 1 and 2 are exhaustive; 3 uses the MinHash LSH index (candidates
re-verified with exact shingle Jaccard); 4 retrieves per-comment
neighbours from the BM25 index and rescoring keeps the top fraction per
metric; 5 counts duplicated sentences and links accounts sharing curated
error sentences; 6 expands from already-found accounts through a
sentence-granularity index.

Note on search 1 vs 2/3: search 1 strips digits and punctuation before
matching, the others do not, so search 1 can find pairs the similarity
searches miss (and the overlap matrix reports that divergence).

Evidence is emitted in canonical order (method, accounts, comments) so
internal parallelism or block sizes never change the persisted output.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import re
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy import sparse

from ._fastlcs import FlatSortedSets, sorted_intersect_size
from .corpus import Comment, Corpus
from .lsh import DEFAULT_SEED, SignatureFactory, lsh_build
from .similarity import (
    SimilarityScore,
    _char_masks,
    _lcs_with_masks,
    _token_sort_form,
    canonical_exact_form,
    jaccard,
    partial_ratio,
    shingles,
)
from .textindex import build_index

SEARCH_METHODS = ("search1", "search2", "search3", "search4", "search5", "search6")
_SPAN_REQUIRED = {"search1", "search2", "search5", "search6"}


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class PairEvidence:
    """One (account A, account B) finding from one search."""

    account_a: str
    account_b: str
    method: str
    score: SimilarityScore
    comment_ids: tuple[str, ...]
    matched_spans: tuple[str, ...] = ()
    run_id: str = ""
    suppressed: bool = False

    def __post_init__(self):
        if self.account_a == self.account_b:
            raise ValueError("evidence cannot link an account to itself")
        if self.account_a > self.account_b:
            raise ValueError("accounts must be ordered (account_a < account_b)")
        if self.method not in SEARCH_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method in _SPAN_REQUIRED and not self.matched_spans:
            raise ValueError(f"{self.method} evidence requires matched_spans")

    def sort_key(self):
        return (self.method, self.account_a, self.account_b, self.comment_ids,
                self.score.metric, -self.score.value)

    def touches(self, uid: str) -> bool:
        return uid == self.account_a or uid == self.account_b

    def to_json(self) -> dict:
        return {
            "account_a": self.account_a,
            "account_b": self.account_b,
            "method": self.method,
            "metric": self.score.metric,
            "score": self.score.value,
            "comment_ids": list(self.comment_ids),
            "matched_spans": list(self.matched_spans),
            "run_id": self.run_id,
            "suppressed": self.suppressed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PairEvidence":
        return cls(
            account_a=d["account_a"],
            account_b=d["account_b"],
            method=d["method"],
            score=SimilarityScore(d["metric"], d["score"]),
            comment_ids=tuple(d["comment_ids"]),
            matched_spans=tuple(d["matched_spans"]),
            run_id=d.get("run_id", ""),
            suppressed=bool(d.get("suppressed", False)),
        )


def pair_evidence(a: str, b: str, method: str, score: SimilarityScore,
                  comment_ids: Iterable[str], matched_spans: Iterable[str] = ()) -> PairEvidence:
    """Construct evidence with accounts in canonical order."""
    if a > b:
        a, b = b, a
    return PairEvidence(
        account_a=a,
        account_b=b,
        method=method,
        score=score,
        comment_ids=tuple(sorted(comment_ids)),
        matched_spans=tuple(sorted(matched_spans)),
    )


class SuppressionLike(Protocol):
    version: int

    def is_suppressed_account(self, uid: str) -> bool: ...

    def is_suppressed_pair(self, a: str, b: str) -> bool: ...


def apply_suppression(evidence: Sequence[PairEvidence],
                      suppression: SuppressionLike | None) -> list[PairEvidence]:
    """Evidence minus every item touching a suppressed account or pair."""
    if suppression is None:
        return list(evidence)
    return [
        ev for ev in evidence
        if not (
            suppression.is_suppressed_account(ev.account_a)
            or suppression.is_suppressed_account(ev.account_b)
            or suppression.is_suppressed_pair(ev.account_a, ev.account_b)
        )
    ]


@dataclass
class SearchResult:
    method: str
    evidence: list[PairEvidence]
    index_seconds: float = 0.0
    search_seconds: float = 0.0
    aux: dict = field(default_factory=dict)

    def accounts(self) -> set[str]:
        out: set[str] = set()
        for ev in self.evidence:
            out.add(ev.account_a)
            out.add(ev.account_b)
        return out


# ---------------------------------------------------------------------------
# Exclusion rules for innocent duplication
# ---------------------------------------------------------------------------

EXCLUSION_CATEGORIES = ("convergence", "collection_title", "subheading", "reference", "journal_template")


@dataclass(frozen=True)
class ExclusionRule:
    category: str
    kind: str  # verbatim | regex
    pattern: str
    journal_id: str | None = None

    def __post_init__(self):
        if self.category not in EXCLUSION_CATEGORIES:
            raise ValueError(f"unknown exclusion category {self.category!r}")
        if self.kind not in ("verbatim", "regex"):
            raise ValueError(f"unknown rule kind {self.kind!r}")


class ExclusionRules:
    """Sentence-level rules for innocent-duplication scenarios."""

    def __init__(self, rules: Iterable[ExclusionRule] = ()):
        self.rules = list(rules)
        self._verbatim: dict[str, str] = {}
        self._journal_verbatim: dict[tuple[str, str], str] = {}
        self._regexes: list[tuple[re.Pattern, str]] = []
        for rule in self.rules:
            if rule.kind == "verbatim":
                if rule.journal_id:
                    self._journal_verbatim[(rule.journal_id, rule.pattern)] = rule.category
                else:
                    self._verbatim[rule.pattern] = rule.category
            else:
                self._regexes.append((re.compile(rule.pattern), rule.category))

    def match(self, sentence: str, journal_id: str | None = None) -> str | None:
        cat = self._verbatim.get(sentence)
        if cat:
            return cat
        if journal_id:
            cat = self._journal_verbatim.get((journal_id, sentence))
            if cat:
                return cat
        for pattern, category in self._regexes:
            if pattern.search(sentence):
                return category
        return None

    @classmethod
    def default(cls, journal_templates: dict[str, list[str]] | None = None) -> "ExclusionRules":
        rules = [
            ExclusionRule("convergence", "verbatim", "This is an interesting paper."),
            ExclusionRule("convergence", "verbatim", "This is a very interesting paper."),
            ExclusionRule("convergence", "verbatim", "Thank you for the opportunity to review this paper."),
            ExclusionRule("convergence", "verbatim", "The paper is well written."),
            ExclusionRule("convergence", "verbatim", "I have no further comments."),
            ExclusionRule("subheading", "regex", r"(?i)^(what|why|how|is|are|does|do|can|should)\b[^.!]{0,80}\?$"),
            ExclusionRule("reference", "regex", r"(?i)\bdoi\b\s*:?\s*10\.\d{2,9}"),
            ExclusionRule("reference", "regex", r"\((19|20)\d{2}\)[^.]*\b(pp?\.|[Vv]ol\.?)\s*\d"),
            ExclusionRule("collection_title", "regex", r"(?i)\bsubmitted to\b.{0,80}\bspecial (collection|issue)\b"),
        ]
        for journal, sentences in (journal_templates or {}).items():
            for s in sentences:
                rules.append(ExclusionRule("journal_template", "verbatim", s, journal_id=journal))
        return cls(rules)


# ---------------------------------------------------------------------------
# Search 1: exact duplicates of the canonical form
# ---------------------------------------------------------------------------


def search1_exact(corpus: Corpus, min_words: int = 20) -> SearchResult:
    """Group comments by canonical exact form; cross-account groups become
    evidence, and the form-multiplicity histogram is reported either way."""
    t0 = time.perf_counter()
    groups: dict[str, list[Comment]] = {}
    for c in corpus.ordered_comments():
        form = canonical_exact_form(c.norm_text, min_words)
        if form is not None:
            groups.setdefault(form, []).append(c)
    index_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    histogram = Counter(len(members) for members in groups.values())
    evidence: list[PairEvidence] = []
    for form in sorted(groups):
        members = groups[form]
        by_uid: dict[str, list[str]] = {}
        for c in members:
            by_uid.setdefault(c.referee_uid, []).append(c.comment_id)
        if len(by_uid) < 2:
            continue
        for ua, ub in combinations(sorted(by_uid), 2):
            evidence.append(
                pair_evidence(
                    ua, ub, "search1", SimilarityScore("exact", 1.0),
                    by_uid[ua] + by_uid[ub], matched_spans=(form,),
                )
            )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search1",
        evidence=evidence,
        index_seconds=index_seconds,
        search_seconds=time.perf_counter() - t1,
        aux={"duplicate_count_histogram": dict(sorted(histogram.items()))},
    )


# ---------------------------------------------------------------------------
# Search 2: brute-force sentence overlap over all cross-referee pairs
# ---------------------------------------------------------------------------


def search2_sentence_overlap(
    corpus: Corpus,
    threshold: float = 0.5,
    block_size: int = 2048,
    histogram_bins: int = 20,
) -> SearchResult:
    """All-pairs sentence Jaccard (Eq.-style set arithmetic), emitting
    pairs strictly above ``threshold`` and the full score histogram.

    Every cross-referee comment pair is evaluated; intersections come from
    a sparse sentence-incidence product and the Jaccard grid is
    materialized densely block by block, which keeps the comparison
    exhaustive but vectorized.
    """
    t0 = time.perf_counter()
    comments = corpus.ordered_comments()
    n = len(comments)
    edges = np.linspace(0.0, 1.0, histogram_bins + 1)
    hist = np.zeros(histogram_bins, dtype=np.int64)
    evidence: list[PairEvidence] = []
    if n < 2:
        return SearchResult("search2", [], 0.0, time.perf_counter() - t0,
                            {"jaccard_histogram": {"edges": edges.tolist(), "counts": hist.tolist()}})

    sent_ids: dict[str, int] = {}
    sets: list[frozenset[str]] = []
    row_idx: list[int] = []
    col_idx: list[int] = []
    for i, c in enumerate(comments):
        s = frozenset(c.sentences)
        sets.append(s)
        for sent in s:
            sid = sent_ids.setdefault(sent, len(sent_ids))
            row_idx.append(i)
            col_idx.append(sid)
    mat = sparse.csr_matrix(
        (np.ones(len(row_idx), dtype=np.float64), (row_idx, col_idx)),
        shape=(n, max(len(sent_ids), 1)),
    )
    sizes = np.array([len(s) for s in sets], dtype=np.float64)
    uid_codes = {uid: i for i, uid in enumerate(sorted({c.referee_uid for c in comments}))}
    refs = np.array([uid_codes[c.referee_uid] for c in comments], dtype=np.int64)
    index_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    for i0 in range(0, n, block_size):
        i1 = min(i0 + block_size, n)
        a_mat = mat[i0:i1]
        for j0 in range(i0, n, block_size):
            j1 = min(j0 + block_size, n)
            inter = (a_mat @ mat[j0:j1].T).toarray()
            union = sizes[i0:i1, None] + sizes[None, j0:j1] - inter
            with np.errstate(invalid="ignore", divide="ignore"):
                jac = np.where(union > 0.0, inter / union, 0.0)
            valid = refs[i0:i1, None] != refs[None, j0:j1]
            if i0 == j0:
                valid &= np.triu(np.ones_like(valid), k=1).astype(bool)
            hist += np.histogram(jac[valid], bins=edges)[0]
            for bi, bj in zip(*np.nonzero(valid & (jac > threshold))):
                gi, gj = i0 + int(bi), j0 + int(bj)
                ca, cb = comments[gi], comments[gj]
                shared = sets[gi] & sets[gj]
                evidence.append(
                    pair_evidence(
                        ca.referee_uid, cb.referee_uid, "search2",
                        SimilarityScore("sentence_jaccard", float(jac[bi, bj])),
                        (ca.comment_id, cb.comment_id), matched_spans=sorted(shared),
                    )
                )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search2",
        evidence=evidence,
        index_seconds=index_seconds,
        search_seconds=time.perf_counter() - t1,
        aux={"jaccard_histogram": {"edges": edges.tolist(), "counts": hist.tolist()}},
    )


# ---------------------------------------------------------------------------
# Search 3: MinHash LSH candidates, verified with exact shingle Jaccard
# ---------------------------------------------------------------------------


def search3_lsh(
    corpus: Corpus,
    k: int = 5,
    num_perm: int = 128,
    threshold: float = 0.5,
    seed: int = DEFAULT_SEED,
) -> SearchResult:
    """Index every comment's shingle set, query for candidates, and keep
    cross-referee pairs whose exact shingle Jaccard reaches the threshold.

    Comments shorter than k characters have no shingles and are skipped.
    The exact verification recomputes Jaccard from the real shingle sets,
    so the index can only lose pairs, never invent them.
    """
    comments = corpus.ordered_comments()

    t0 = time.perf_counter()
    from .lsh import hashed_shingles

    factory = SignatureFactory(num_perm=num_perm, seed=seed)
    hashes = {c.comment_id: hashed_shingles(c.norm_text, k) for c in comments}
    signatures = {
        c.comment_id: factory.from_hashes(hashes[c.comment_id], c.comment_id) for c in comments
    }
    index = lsh_build(signatures.values(), threshold=threshold)
    index_seconds = time.perf_counter() - t0

    @lru_cache(maxsize=4096)
    def shingle_set(comment_id: str) -> frozenset[str]:
        return shingles(corpus.comments[comment_id].norm_text, k).shingles

    t1 = time.perf_counter()
    evidence: list[PairEvidence] = []
    candidate_pairs = 0
    ids = [c.comment_id for c in comments]
    idx_of = {cid: i for i, cid in enumerate(ids)}
    owner = {c.comment_id: c.referee_uid for c in comments}
    flat_sets = FlatSortedSets([hashes[cid] for cid in ids])

    src_parts: list[np.ndarray] = []
    dst_parts: list[np.ndarray] = []
    for i, c in enumerate(comments):
        cid = c.comment_id
        uid = c.referee_uid
        cands = [oid for oid in index.query(signatures[cid])
                 if oid > cid and owner[oid] != uid]  # each unordered pair once
        if not cands:
            continue
        cands.sort()
        candidate_pairs += len(cands)
        src_parts.append(np.full(len(cands), i, dtype=np.int64))
        dst_parts.append(np.fromiter((idx_of[oid] for oid in cands),
                                     dtype=np.int64, count=len(cands)))
    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)

    # cheap exact screen on the hashed sets (batched, early-abandoning),
    # then the Eq.-style string-set Jaccard decides and supplies the score
    passed = flat_sets.jaccard_at_least(src, dst, threshold)
    for p in np.nonzero(passed)[0]:
        cid = ids[int(src[p])]
        other_id = ids[int(dst[p])]
        exact = jaccard(shingle_set(cid), shingle_set(other_id))
        if exact >= threshold:
            evidence.append(
                pair_evidence(
                    owner[cid], owner[other_id], "search3",
                    SimilarityScore("shingle_jaccard", exact),
                    (cid, other_id),
                )
            )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search3",
        evidence=evidence,
        index_seconds=index_seconds,
        search_seconds=time.perf_counter() - t1,
        aux={"candidate_pairs": candidate_pairs, "bands": index.bands, "rows": index.rows},
    )


# ---------------------------------------------------------------------------
# Search 4: index retrieval plus five-metric rescoring, top-fraction keeps
# ---------------------------------------------------------------------------

_S4_METRICS = ("indel_ratio", "partial_ratio", "token_sort_ratio", "sentence_jaccard", "shingle_jaccard")


class _PairScorer:
    """Five-metric scorer over a fixed text collection.

    Uses the JIT bit-parallel LCS kernel when numba is available and the
    pure-Python scan otherwise; both produce identical values.  Mask
    tables and token-sort forms are cached per comment.
    """

    def __init__(self, texts: dict[str, str], shingle_k: int):
        from . import _fastlcs

        self.texts = texts
        self.shingle_k = shingle_k
        self.fast = _fastlcs.HAVE_NUMBA
        if self.fast:
            self._codec = _fastlcs.CharCodec()
            self._fastlcs = _fastlcs
        self._sentences: dict[str, frozenset] = {}

        cache = lru_cache(maxsize=None)
        self._masked = cache(self._masked_uncached) if self.fast else None
        self._codes = cache(self._codes_uncached) if self.fast else None
        self._pure_masks = cache(self._pure_masks_uncached)
        self._ts_form = cache(self._ts_form_uncached)
        self._masked_ts = cache(self._masked_ts_uncached) if self.fast else None
        self._codes_ts = cache(self._codes_ts_uncached) if self.fast else None
        self._pure_masks_ts = cache(self._pure_masks_ts_uncached)
        self._shingle_hashes = cache(self._shingle_hashes_uncached)

    def attach_sentences(self, comment_id: str, sentences: Iterable[str]) -> None:
        self._sentences[comment_id] = frozenset(sentences)

    # cached builders -------------------------------------------------------

    def _masked_uncached(self, cid):
        return self._fastlcs.MaskedString(self._codec, self.texts[cid])

    def _codes_uncached(self, cid):
        return self._codec.encode(self.texts[cid])

    def _pure_masks_uncached(self, cid):
        return _char_masks(self.texts[cid])

    def _ts_form_uncached(self, cid):
        return _token_sort_form(self.texts[cid])

    def _masked_ts_uncached(self, cid):
        return self._fastlcs.MaskedString(self._codec, self._ts_form(cid))

    def _codes_ts_uncached(self, cid):
        return self._codec.encode(self._ts_form(cid))

    def _pure_masks_ts_uncached(self, cid):
        return _char_masks(self._ts_form(cid))

    def _shingle_hashes_uncached(self, cid):
        from .lsh import hashed_shingles

        return hashed_shingles(self.texts[cid], self.shingle_k)

    # lcs dispatch ----------------------------------------------------------

    def _lcs(self, a: str, b: str, text_of, masked_of, codes_of, pure_masks_of) -> int:
        ta, tb = text_of(a), text_of(b)
        if ta == tb:
            return len(ta)
        if len(tb) < len(ta) or (len(tb) == len(ta) and tb < ta):
            a, b, ta, tb = b, a, tb, ta
        if self.fast:
            return masked_of(a).lcs_with_codes(codes_of(b))
        return _lcs_with_masks(pure_masks_of(a), len(ta), tb)

    # metrics ---------------------------------------------------------------

    def indel_and_lcs(self, a: str, b: str) -> tuple[float, int]:
        ta, tb = self.texts[a], self.texts[b]
        total = len(ta) + len(tb)
        if total == 0:
            return 100.0, 0
        l = self._lcs(a, b, self.texts.__getitem__, self._masked, self._codes, self._pure_masks)
        return 200.0 * l / total, l

    def token_sort(self, a: str, b: str) -> float:
        fa, fb = self._ts_form(a), self._ts_form(b)
        total = len(fa) + len(fb)
        if total == 0:
            return 100.0
        if not fa or not fb:
            return 0.0
        l = self._lcs(a, b, self._ts_form, self._masked_ts, self._codes_ts, self._pure_masks_ts)
        return 200.0 * l / total

    def partial(self, a: str, b: str) -> float:
        ta, tb = self.texts[a], self.texts[b]
        if not ta and not tb:
            return 100.0
        if not ta or not tb:
            return 0.0
        if not self.fast:
            return partial_ratio(ta, tb)
        if len(tb) < len(ta) or (len(tb) == len(ta) and tb < ta):
            a, b, ta, tb = b, a, tb, ta
        if len(ta) == len(tb):
            return self.indel_and_lcs(a, b)[0]
        best = self._fastlcs.partial_best(self._masked(a), self._codes(b))
        return 100.0 * best / len(ta)

    def sentence_jaccard(self, a: str, b: str) -> float:
        sa = self._sentences.get(a, frozenset())
        sb = self._sentences.get(b, frozenset())
        return jaccard(sa, sb)

    def shingle_jaccard(self, a: str, b: str) -> float:
        ha, hb = self._shingle_hashes(a), self._shingle_hashes(b)
        union = ha.size + hb.size
        if union == 0:
            return 0.0
        inter = sorted_intersect_size(ha, hb)
        return inter / (union - inter)


def _keep_cutoff(scores: np.ndarray, keep_fraction: float) -> tuple[float, int]:
    """Score cutoff for keeping the top ceil(P * keep_fraction) pairs."""
    k = max(1, math.ceil(len(scores) * keep_fraction))
    top = np.sort(scores)[::-1]
    return float(top[k - 1]), k


def search4_index_fuzzy(
    corpus: Corpus,
    top_k: int = 20,
    keep_fraction: float = 0.001,
    shingle_k: int = 5,
    exact_partial_limit: int = 2000,
    histogram_bins: int = 50,
) -> SearchResult:
    """Retrieve each comment's BM25 neighbours, drop same-referee hits,
    score surviving pairs with five metrics and keep, per metric, the top
    ``keep_fraction`` by rank (cutoff ties included, zero scores never).

    partial_ratio is the one expensive metric; pairs that provably cannot
    reach its keep cutoff (their full-string LCS already bounds the best
    window from above) are skipped once enough exact scores exist, except
    on small corpora (``exact_partial_limit``) where every pair is scored.
    """
    comments = corpus.ordered_comments()
    if not comments:
        raise PipelineError("search4 requires a non-empty comment index")
    texts = {c.comment_id: c.norm_text for c in comments}
    owner = {c.comment_id: c.referee_uid for c in comments}

    t0 = time.perf_counter()
    index = build_index(sorted(texts.items()), granularity="comment")
    index_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    pair_set: set[tuple[str, str]] = set()
    block = 256
    for start in range(0, len(comments), block):
        chunk = comments[start : start + block]
        for c, hits in zip(chunk, index.query_block([c.norm_text for c in chunk], top_k=top_k)):
            for hit in hits:
                if hit.doc_id == c.comment_id:
                    continue
                if owner[hit.doc_id] == c.referee_uid:
                    continue
                pair_set.add((c.comment_id, hit.doc_id) if c.comment_id < hit.doc_id else (hit.doc_id, c.comment_id))
    pairs = sorted(pair_set)
    n_pairs = len(pairs)
    if n_pairs == 0:
        return SearchResult("search4", [], index_seconds, time.perf_counter() - t1,
                            {"pairs_scored": 0, "distributions": {}})

    scorer = _PairScorer(texts, shingle_k)
    for c in comments:
        scorer.attach_sentences(c.comment_id, c.sentences)
    scores = {m: np.zeros(n_pairs) for m in _S4_METRICS}
    lcs_full = np.zeros(n_pairs, dtype=np.int64)
    for p, (a, b) in enumerate(pairs):
        indel, l_full = scorer.indel_and_lcs(a, b)
        lcs_full[p] = l_full
        scores["indel_ratio"][p] = indel
        scores["token_sort_ratio"][p] = scorer.token_sort(a, b)
        scores["sentence_jaccard"][p] = scorer.sentence_jaccard(a, b)
        scores["shingle_jaccard"][p] = scorer.shingle_jaccard(a, b)

    # partial_ratio: exact values computed in decreasing upper-bound order
    # (the full-string LCS bounds every window's LCS) until the bound falls
    # below the running keep cutoff
    min_len = np.array([min(len(texts[a]), len(texts[b])) for a, b in pairs], dtype=np.float64)
    upper = 100.0 * lcs_full / np.maximum(min_len, 1.0)
    partial = np.full(n_pairs, np.nan)
    order = np.lexsort((np.arange(n_pairs), -upper))
    k_partial = max(1, math.ceil(n_pairs * keep_fraction))
    exact_all = n_pairs <= exact_partial_limit
    top_heap: list[float] = []  # min-heap of the k best exact scores so far
    for p in order:
        if not exact_all and len(top_heap) >= k_partial and upper[p] < top_heap[0]:
            break
        a, b = pairs[p]
        value = scorer.partial(a, b)
        partial[p] = value
        if len(top_heap) < k_partial:
            heapq.heappush(top_heap, value)
        elif value > top_heap[0]:
            heapq.heapreplace(top_heap, value)
    computed_mask = ~np.isnan(partial)
    scores["partial_ratio"] = np.where(computed_mask, partial, 0.0)

    evidence: list[PairEvidence] = []
    distributions: dict[str, dict] = {}
    for metric in _S4_METRICS:
        vals = scores[metric]
        if metric == "partial_ratio":
            known = vals[computed_mask]
            cutoff, _ = _keep_cutoff(
                np.concatenate([known, np.zeros(n_pairs - known.size)]), keep_fraction
            )
            keep_idx = np.nonzero(computed_mask & (vals >= cutoff) & (vals > 0.0))[0]
            hi = 100.0
            hist_vals = known
            pruned = int(n_pairs - known.size)
        else:
            cutoff, _ = _keep_cutoff(vals, keep_fraction)
            keep_idx = np.nonzero((vals >= cutoff) & (vals > 0.0))[0]
            hi = 100.0 if metric in ("indel_ratio", "token_sort_ratio") else 1.0
            hist_vals = vals
            pruned = 0
        counts, edges = np.histogram(hist_vals, bins=histogram_bins, range=(0.0, hi))
        distributions[metric] = {
            "edges": edges.tolist(),
            "counts": counts.tolist(),
            "cutoff": cutoff,
            "pruned_pairs": pruned,
        }
        for p in keep_idx:
            a, b = pairs[p]
            value = float(vals[p])
            if metric in ("sentence_jaccard", "shingle_jaccard"):
                value = min(value, 1.0)
            evidence.append(
                pair_evidence(owner[a], owner[b], "search4",
                              SimilarityScore(metric, value), (a, b))
            )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search4",
        evidence=evidence,
        index_seconds=index_seconds,
        search_seconds=time.perf_counter() - t1,
        aux={"pairs_scored": n_pairs, "distributions": distributions},
    )


# ---------------------------------------------------------------------------
# Search 5: sentence frequency table and curated error sentences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SentenceFrequencyRow:
    sentence: str
    total: int
    distinct_referees: int
    distinct_journals: int
    excluded_by: str | None = None

    def as_dict(self) -> dict:
        return {
            "sentence": self.sentence,
            "total": self.total,
            "distinct_referees": self.distinct_referees,
            "distinct_journals": self.distinct_journals,
            "excluded_by": self.excluded_by or "",
        }


def sentence_frequency_table(corpus: Corpus, rules: ExclusionRules | None = None) -> list[SentenceFrequencyRow]:
    """Sentence counts across the corpus, sorted by distinct-referee count
    descending, annotated with the matching exclusion rule if any."""
    totals: Counter[str] = Counter()
    referees: dict[str, set[str]] = {}
    journals: dict[str, set[str]] = {}
    for c in corpus.ordered_comments():
        for sent in c.sentences:
            totals[sent] += 1
            referees.setdefault(sent, set()).add(c.referee_uid)
            journals.setdefault(sent, set()).add(c.journal_id)
    rows = [
        SentenceFrequencyRow(
            sentence=sent,
            total=total,
            distinct_referees=len(referees[sent]),
            distinct_journals=len(journals[sent]),
            excluded_by=rules.match(sent) if rules else None,
        )
        for sent, total in totals.items()
    ]
    rows.sort(key=lambda r: (-r.distinct_referees, -r.total, r.sentence))
    return rows


def search5_curated(
    corpus: Corpus,
    curated_sentences: Sequence[str],
    rules: ExclusionRules | None = None,
    allow_excluded: bool = False,
) -> SearchResult:
    """Link every pair of distinct referees that produced a curated
    sentence verbatim.  Curated sentences matching an exclusion rule are
    refused unless explicitly overridden."""
    t0 = time.perf_counter()
    containing: dict[str, dict[str, list[str]]] = {s: {} for s in curated_sentences}
    if curated_sentences:
        wanted = set(curated_sentences)
        for c in corpus.ordered_comments():
            for sent in set(c.sentences) & wanted:
                containing[sent].setdefault(c.referee_uid, []).append(c.comment_id)

    evidence: list[PairEvidence] = []
    warnings: list[str] = []
    for sent in curated_sentences:
        if rules is not None:
            category = rules.match(sent)
            if category and not allow_excluded:
                warnings.append(f"curated sentence excluded by {category} rule: {sent!r}")
                continue
        by_uid = containing[sent]
        if not by_uid:
            warnings.append(f"curated sentence not present in corpus: {sent!r}")
            continue
        for ua, ub in combinations(sorted(by_uid), 2):
            evidence.append(
                pair_evidence(ua, ub, "search5", SimilarityScore("exact", 1.0),
                              by_uid[ua] + by_uid[ub], matched_spans=(sent,))
            )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search5",
        evidence=evidence,
        index_seconds=0.0,  # the "index" is manual curation
        search_seconds=time.perf_counter() - t0,
        aux={"warnings": warnings},
    )


# ---------------------------------------------------------------------------
# Search 6: sentence-level expansion from already-identified accounts
# ---------------------------------------------------------------------------


def search6_sentence_expand(
    corpus: Corpus,
    seed_accounts: set[str],
    min_bm25_norm: float = 0.8,
    rules: ExclusionRules | None = None,
    top_k: int = 150,
) -> SearchResult:
    """Search every sentence written by the seed accounts in a
    sentence-granularity index; hits from other accounts with
    self-score-normalized BM25 at or above ``min_bm25_norm`` (and not
    matching an exclusion rule on either side) become evidence."""
    comments = corpus.ordered_comments()

    t0 = time.perf_counter()
    docs = []
    meta: dict[str, tuple] = {}
    for c in comments:
        for ordinal, sent in enumerate(c.sentences):
            doc_id = f"{c.comment_id}#{ordinal}"
            docs.append((doc_id, sent))
            meta[doc_id] = (c.comment_id, c.referee_uid, ordinal)
    index = build_index(docs, granularity="sentence", meta=meta)
    index_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    by_referee = corpus.comments_by_referee()
    warnings = [f"seed account absent from corpus: {uid}" for uid in sorted(seed_accounts)
                if uid not in by_referee]

    @lru_cache(maxsize=200000)
    def hits_for(sentence: str) -> tuple:
        return tuple(index.normalized_query(sentence, top_k=top_k))

    found: set[tuple] = set()
    evidence: list[PairEvidence] = []
    for seed in sorted(seed_accounts):
        for c in by_referee.get(seed, []):
            for sent in c.sentences:
                if rules is not None and rules.match(sent, c.journal_id):
                    continue
                for hit in hits_for(sent):
                    if hit.score < min_bm25_norm:
                        continue
                    hit_cid, hit_uid, hit_ord = index.meta[hit.doc_id]
                    if hit_uid == seed:
                        continue
                    hit_sentence = corpus.comments[hit_cid].sentences[hit_ord]
                    if rules is not None and rules.match(hit_sentence, corpus.comments[hit_cid].journal_id):
                        continue
                    # one finding per account pair and sentence pair; further
                    # comment pairs repeating the same match add nothing
                    key = (min(seed, hit_uid), max(seed, hit_uid),
                           tuple(sorted((sent, hit_sentence))))
                    if key in found:
                        continue
                    found.add(key)
                    evidence.append(
                        pair_evidence(seed, hit_uid, "search6",
                                      SimilarityScore("bm25", float(hit.score)),
                                      (c.comment_id, hit_cid),
                                      matched_spans=(sent, hit_sentence))
                    )
    evidence.sort(key=PairEvidence.sort_key)
    return SearchResult(
        method="search6",
        evidence=evidence,
        index_seconds=index_seconds,
        search_seconds=time.perf_counter() - t1,
        aux={"warnings": warnings, "seed_accounts": sorted(seed_accounts)},
    )


# ---------------------------------------------------------------------------
# Pipeline configuration, orchestration, and run persistence
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = {
    "seed": int,
    "shingle_k": int,
    "num_perm": int,
    "lsh_threshold": float,
    "search2_threshold": float,
    "top_k": int,
    "keep_fraction": float,
    "min_bm25_norm": float,
    "s6_top_k": int,
    "cluster_boundary": int,
    "damping": float,
    "tol": float,
    "pagerank_weighted": bool,
    "min_canonical_words": int,
    "exact_partial_limit": int,
    "searches": tuple,
    "curated_sentences": tuple,
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable threshold of the pipeline, with the documented defaults."""

    seed: int = 42
    shingle_k: int = 5
    num_perm: int = 128
    lsh_threshold: float = 0.5
    search2_threshold: float = 0.5
    top_k: int = 20
    keep_fraction: float = 0.001
    min_bm25_norm: float = 0.8
    s6_top_k: int = 150
    cluster_boundary: int = 4
    damping: float = 0.85
    tol: float = 1e-6
    pagerank_weighted: bool = True
    min_canonical_words: int = 20
    exact_partial_limit: int = 2000
    searches: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    curated_sentences: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in d.items():
            caster = _CONFIG_FIELDS[key]
            if caster is tuple:
                kwargs[key] = tuple(value)
            elif caster is bool and isinstance(value, str):
                kwargs[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                kwargs[key] = caster(value)
        return cls(**kwargs)

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "shingle_k": self.shingle_k,
            "num_perm": self.num_perm,
            "lsh_threshold": self.lsh_threshold,
            "search2_threshold": self.search2_threshold,
            "top_k": self.top_k,
            "keep_fraction": self.keep_fraction,
            "min_bm25_norm": self.min_bm25_norm,
            "s6_top_k": self.s6_top_k,
            "cluster_boundary": self.cluster_boundary,
            "damping": self.damping,
            "tol": self.tol,
            "pagerank_weighted": self.pagerank_weighted,
            "min_canonical_words": self.min_canonical_words,
            "exact_partial_limit": self.exact_partial_limit,
            "searches": list(self.searches),
            "curated_sentences": list(self.curated_sentences),
        }


@dataclass
class RunRecord:
    """One pipeline execution: config, timings, per-search results."""

    run_id: str
    config: RunConfig
    corpus_version: str
    suppression_version: int
    corpus_id: str = ""

    status: str = "running"  # running | complete | failed
    error: str = ""
    created_at: float = 0.0
    results: dict[str, SearchResult] = field(default_factory=dict)

    @property
    def evidence(self) -> list[PairEvidence]:
        out: list[PairEvidence] = []
        for method in SEARCH_METHODS:
            if method in self.results:
                out.extend(self.results[method].evidence)
        return out

    def accounts_by_search(self) -> dict[str, list[str]]:
        return {m: sorted(r.accounts()) for m, r in sorted(self.results.items())}

    def timings(self) -> dict[str, dict]:
        return {
            m: {
                "index_seconds": r.index_seconds,
                "search_seconds": r.search_seconds,
                "accounts_found": len(r.accounts()),
            }
            for m, r in sorted(self.results.items())
        }


def corpus_version(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for cid in sorted(corpus.comments):
        c = corpus.comments[cid]
        h.update(cid.encode())
        h.update(c.norm_text.encode())
    return h.hexdigest()[:16]


def run_all(
    corpus: Corpus,
    config: RunConfig | None = None,
    suppression: SuppressionLike | None = None,
    run_id: str = "run0001",
    rules: ExclusionRules | None = None,
    out_dir: str | Path | None = None,
    corpus_id: str = "",
) -> RunRecord:
    """Execute the configured searches in order 1..6 (6 seeds from 1-5's
    accounts), apply suppression, and optionally persist the run.

    Exclusion rules apply to searches 5 and 6 only; searches 1-4 report
    raw findings and triage happens downstream.  Any search failure marks
    the run failed with partial results retained.
    """
    config = config or RunConfig()
    rules = rules if rules is not None else ExclusionRules.default()
    record = RunRecord(
        run_id=run_id,
        config=config,
        corpus_version=corpus_version(corpus),
        suppression_version=getattr(suppression, "version", 0) if suppression else 0,
        corpus_id=corpus_id,
        created_at=time.time(),
    )
    # Suppression is a pure output filter: searches (including search 6's
    # seed set) see the raw findings, and evidence touching suppressed
    # entities is dropped at emission.  That keeps re-runs after a
    # suppression exactly equal to the prior run minus the touched items.
    try:
        for number in config.searches:
            if number == 1:
                result = search1_exact(corpus, min_words=config.min_canonical_words)
            elif number == 2:
                result = search2_sentence_overlap(corpus, threshold=config.search2_threshold)
            elif number == 3:
                result = search3_lsh(
                    corpus, k=config.shingle_k, num_perm=config.num_perm,
                    threshold=config.lsh_threshold, seed=config.seed,
                )
            elif number == 4:
                result = search4_index_fuzzy(
                    corpus, top_k=config.top_k, keep_fraction=config.keep_fraction,
                    shingle_k=config.shingle_k, exact_partial_limit=config.exact_partial_limit,
                )
            elif number == 5:
                table = sentence_frequency_table(corpus, rules)
                result = search5_curated(corpus, list(config.curated_sentences), rules)
                distribution = Counter(row.total for row in table)
                result.aux["frequency_table_rows"] = len(table)
                result.aux["frequency_distribution"] = {
                    str(k): v for k, v in sorted(distribution.items())
                }
                result.aux["frequency_table"] = table[:1000]
            elif number == 6:
                seeds = set()
                for method, res in record.results.items():
                    seeds.update(res.accounts())
                result = search6_sentence_expand(
                    corpus, seeds, min_bm25_norm=config.min_bm25_norm,
                    rules=rules, top_k=config.s6_top_k,
                )
            else:
                raise PipelineError(f"unknown search number {number}")
            record.results[result.method] = result
        record.status = "complete"
    except Exception as exc:  # failed runs keep partial results
        record.status = "failed"
        record.error = f"{type(exc).__name__}: {exc}"
    for result in record.results.values():
        result.evidence = apply_suppression(result.evidence, suppression)
        result.evidence = [replace(ev, run_id=run_id) for ev in result.evidence]
    if out_dir is not None:
        save_run(record, out_dir)
    return record


# ---------------------------------------------------------------------------
# Run directory layout:
#   config.json     config snapshot + corpus/suppression versions
#   evidence.jsonl  canonical-ordered evidence
#   timings.json    per-search index/search seconds + accounts found
#   accounts.json   per-search sorted account lists
#   aux.json        histograms and per-search extras (CSV analogues are
#                   emitted by the reporting module)
#   record.json     status, error, created_at, evidence checksum
# ---------------------------------------------------------------------------


def _aux_payload(record: RunRecord) -> dict:
    out: dict = {}
    for method, result in sorted(record.results.items()):
        aux = {}
        for key, value in result.aux.items():
            if key == "frequency_table":
                aux[key] = [row.as_dict() for row in value]
            else:
                aux[key] = value
        out[method] = aux
    return out


def save_run(record: RunRecord, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    evidence_lines = [json.dumps(ev.to_json(), sort_keys=True, ensure_ascii=False)
                      for ev in record.evidence]
    evidence_blob = ("\n".join(evidence_lines) + "\n") if evidence_lines else ""
    (directory / "evidence.jsonl").write_text(evidence_blob, encoding="utf-8")
    (directory / "config.json").write_text(
        json.dumps(
            {
                "run_id": record.run_id,
                "config": record.config.as_dict(),
                "corpus_version": record.corpus_version,
                "corpus_id": record.corpus_id,
                "suppression_version": record.suppression_version,
            },
            sort_keys=True, indent=1,
        ) + "\n",
        encoding="utf-8",
    )
    (directory / "timings.json").write_text(
        json.dumps(record.timings(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    (directory / "accounts.json").write_text(
        json.dumps(record.accounts_by_search(), sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    (directory / "aux.json").write_text(
        json.dumps(_aux_payload(record), sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (directory / "record.json").write_text(
        json.dumps(
            {
                "run_id": record.run_id,
                "status": record.status,
                "error": record.error,
                "created_at": record.created_at,
                "evidence_sha256": hashlib.sha256(evidence_blob.encode()).hexdigest(),
            },
            sort_keys=True, indent=1,
        ) + "\n",
        encoding="utf-8",
    )
    return directory


def load_run(directory: str | Path) -> RunRecord:
    directory = Path(directory)
    head = json.loads((directory / "record.json").read_text(encoding="utf-8"))
    conf = json.loads((directory / "config.json").read_text(encoding="utf-8"))
    timings = json.loads((directory / "timings.json").read_text(encoding="utf-8"))
    aux = json.loads((directory / "aux.json").read_text(encoding="utf-8"))
    evidence_blob = (directory / "evidence.jsonl").read_text(encoding="utf-8")
    if hashlib.sha256(evidence_blob.encode()).hexdigest() != head["evidence_sha256"]:
        raise PipelineError(f"evidence checksum mismatch in {directory}")
    record = RunRecord(
        run_id=head["run_id"],
        config=RunConfig.from_dict(conf["config"]),
        corpus_version=conf["corpus_version"],
        suppression_version=conf["suppression_version"],
        corpus_id=conf.get("corpus_id", ""),
        status=head["status"],
        error=head["error"],
        created_at=head["created_at"],
    )
    by_method: dict[str, list[PairEvidence]] = {}
    for line in evidence_blob.splitlines():
        if line.strip():
            ev = PairEvidence.from_json(json.loads(line))
            by_method.setdefault(ev.method, []).append(ev)
    for method, timing in timings.items():
        method_aux = dict(aux.get(method, {}))
        if "frequency_table" in method_aux:
            method_aux["frequency_table"] = [
                SentenceFrequencyRow(
                    sentence=r["sentence"], total=r["total"],
                    distinct_referees=r["distinct_referees"],
                    distinct_journals=r["distinct_journals"],
                    excluded_by=r["excluded_by"] or None,
                )
                for r in method_aux["frequency_table"]
            ]
        record.results[method] = SearchResult(
            method=method,
            evidence=by_method.get(method, []),
            index_seconds=timing["index_seconds"],
            search_seconds=timing["search_seconds"],
            aux=method_aux,
        )
    return record
