"""Pure text-similarity primitives.

Everything here is a stateless function of its inputs: canonical exact
forms, sentence/shingle Jaccard similarity, and the three edit-based
fuzzy ratios (indel, partial, token-sort).  The fuzzy ratios are defined
in terms of the character longest-common-subsequence (LCS), computed
with a bit-parallel scan so that comment-sized strings stay cheap.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

if TYPE_CHECKING:
    from .corpus import Comment

# Score scales per metric.  Jaccard-family metrics live in [0, 1], the
# ratio family in [0, 100], bm25 is unbounded above.
UNIT_METRICS = frozenset({"exact", "sentence_jaccard", "shingle_jaccard", "lsh_estimate"})
RATIO_METRICS = frozenset({"indel_ratio", "partial_ratio", "token_sort_ratio"})
METRICS = UNIT_METRICS | RATIO_METRICS | {"bm25"}

DEFAULT_SHINGLE_K = 5
MIN_CANONICAL_WORDS = 20


@dataclass(frozen=True, slots=True)
class SimilarityScore:
    metric: str
    value: float

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric in UNIT_METRICS and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric} value {self.value} outside [0, 1]")
        if self.metric in RATIO_METRICS and not 0.0 <= self.value <= 100.0:
            raise ValueError(f"{self.metric} value {self.value} outside [0, 100]")
        if self.metric == "bm25" and self.value < 0.0:
            raise ValueError(f"bm25 value {self.value} negative")


@dataclass(frozen=True)
class ShingleSet:
    """Set of all contiguous k-character substrings of a source string."""

    k: int
    shingles: frozenset[str] = field(default_factory=frozenset)

    def __len__(self):
        return len(self.shingles)


def shingles(text: str, k: int = DEFAULT_SHINGLE_K) -> ShingleSet:
    """Break ``text`` into its set of overlapping k-character shingles.

    Strings shorter than ``k`` have an empty shingle set.
    """
    if k < 1:
        raise ValueError("shingle length k must be >= 1")
    return ShingleSet(k=k, shingles=frozenset(text[i : i + k] for i in range(len(text) - k + 1)))


def jaccard(a: Iterable, b: Iterable) -> float:
    """|A ∩ B| / |A ∪ B|, with the empty-union case defined as 0."""
    sa, sb = set(a), set(b)
    union = len(sa | sb)
    if union == 0:
        return 0.0
    return len(sa & sb) / union


def sentence_jaccard(a: "Comment", b: "Comment") -> SimilarityScore:
    """Jaccard similarity over the two comments' unique sentences."""
    return SimilarityScore("sentence_jaccard", jaccard(a.sentences, b.sentences))


def shingle_jaccard(a: ShingleSet, b: ShingleSet) -> SimilarityScore:
    return SimilarityScore("shingle_jaccard", jaccard(a.shingles, b.shingles))


def canonical_exact_form(text: str, min_words: int = MIN_CANONICAL_WORDS) -> str | None:
    """Reduce a normalized comment to its canonical form for exact matching.

    Punctuation and numeric characters are dropped, whitespace re-collapsed,
    and the result lowercased.  Returns None when fewer than ``min_words``
    whitespace-delimited words survive, so trivially convergent short texts
    never participate in exact matching.
    """
    kept = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat.startswith("P") or cat.startswith("N"):
            continue
        kept.append(ch)
    words = "".join(kept).lower().split()
    if len(words) < min_words:
        return None
    return " ".join(words)


# ---------------------------------------------------------------------------
# Fuzzy ratio family
# ---------------------------------------------------------------------------


def _char_masks(s: str) -> dict[str, int]:
    masks: dict[str, int] = {}
    bit = 1
    for ch in s:
        masks[ch] = masks.get(ch, 0) | bit
        bit <<= 1
    return masks


def _lcs_with_masks(masks: dict[str, int], width: int, other: str) -> int:
    # Bit-parallel LCS row scan: v keeps one bit per char of the masked
    # string, 0-bits marking matched prefix cells.  Characters of `other`
    # absent from the mask table cannot change v and are skipped.
    if width == 0 or not other:
        return 0
    ones = (1 << width) - 1
    v = ones
    get = masks.get
    for ch in other:
        m = get(ch)
        if m:
            u = v & m
            v = ((v + u) | (v - u)) & ones
    return width - v.bit_count()


def lcs_length(a: str, b: str) -> int:
    """Length of the character longest common subsequence of a and b."""
    if not a or not b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    return _lcs_with_masks(_char_masks(a), len(a), b)


def indel_ratio(a: str, b: str) -> float:
    """100 * 2*LCS(a, b) / (len(a) + len(b)).

    Equivalent to 100 * (1 - indel_distance / (len(a)+len(b))) where the
    indel distance allows only insertions and deletions.
    """
    if not a and not b:
        return 100.0
    if not a or not b:
        return 0.0
    if a == b:
        return 100.0
    return 200.0 * lcs_length(a, b) / (len(a) + len(b))


def partial_ratio(a: str, b: str) -> float:
    """Best indel_ratio of the shorter string against every same-length
    window of the longer string.

    Scanning uses an exact skip rule: a window d offsets ahead can improve
    the best LCS by at most d, so offsets that provably cannot beat the
    current best are never evaluated.
    """
    if not a and not b:
        return 100.0
    if not a or not b:
        return 0.0
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)
    if len(short) == len(long_):
        return indel_ratio(short, long_)
    masks = _char_masks(short)
    w = len(short)
    best = 0
    i = 0
    limit = len(long_) - w
    while i <= limit:
        l = _lcs_with_masks(masks, w, long_[i : i + w])
        if l > best:
            best = l
            if best == w:
                break
        i += max(1, best + 1 - l)
    return 100.0 * best / w


def token_sort_ratio(a: str, b: str) -> float:
    """indel_ratio after lowercasing, whitespace-splitting, sorting the
    tokens by code point and re-joining with single spaces."""
    return indel_ratio(_token_sort_form(a), _token_sort_form(b))


def _token_sort_form(s: str) -> str:
    return " ".join(sorted(s.lower().split()))


_FUZZY = {
    "indel_ratio": indel_ratio,
    "partial_ratio": partial_ratio,
    "token_sort_ratio": token_sort_ratio,
}


def fuzzy_score(a: str, b: str, metric: str) -> SimilarityScore:
    """Score two strings with one of the three fuzzy ratio metrics."""
    try:
        fn = _FUZZY[metric]
    except KeyError:
        raise ValueError(f"unknown fuzzy metric {metric!r}") from None
    return SimilarityScore(metric, fn(a, b))
