"""Multi-word bit-parallel LCS kernel, JIT-compiled when numba is present.

Same row-update recurrence as similarity._lcs_with_masks, carried across
64-bit words so comment-length strings run at native speed.  The pipeline
falls back to the pure-Python implementation when numba is unavailable;
results are bit-identical either way (tests cross-check the two paths).
"""

from __future__ import annotations

import os

import numpy as np

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


_U64 = np.uint64
_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


class CharCodec:
    """Corpus-wide character -> code mapping shared by all mask tables."""

    def __init__(self):
        self.codes: dict[str, int] = {}

    def encode(self, text: str) -> np.ndarray:
        codes = self.codes
        out = np.empty(len(text), dtype=np.int32)
        for i, ch in enumerate(text):
            code = codes.get(ch)
            if code is None:
                code = len(codes)
                codes[ch] = code
            out[i] = code
        return out

    @property
    def size(self) -> int:
        return len(self.codes)


def build_masks(codes: np.ndarray, alphabet_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-character bitmask words for one string plus a nonzero-row flag."""
    width = len(codes)
    n_words = max(1, (width + 63) // 64)
    masks = np.zeros((alphabet_size, n_words), dtype=np.uint64)
    if width:
        positions = np.arange(width, dtype=np.uint64)
        np.bitwise_or.at(
            masks,
            (codes, (positions >> _U64(6)).astype(np.int64)),
            _U64(1) << (positions & _U64(63)),
        )
    used = masks.any(axis=1)
    return masks, used


@njit(cache=True)
def _lcs_words(masks, used, other_codes, width):  # pragma: no cover - jit
    n_words = masks.shape[1]
    v = np.empty(n_words, dtype=np.uint64)
    for w in range(n_words):
        v[w] = _ALL_ONES
    top_bits = width - 64 * (n_words - 1)
    if top_bits >= 64:
        top_mask = _ALL_ONES
    else:
        top_mask = (np.uint64(1) << np.uint64(top_bits)) - np.uint64(1)
    v[n_words - 1] &= top_mask
    for k in range(other_codes.shape[0]):
        idx = other_codes[k]
        if idx < 0 or idx >= masks.shape[0] or not used[idx]:
            continue
        carry = np.uint64(0)
        for w in range(n_words):
            m = masks[idx, w]
            u = v[w] & m
            t = v[w] + u
            c1 = np.uint64(1) if t < v[w] else np.uint64(0)
            s = t + carry
            c2 = np.uint64(1) if s < t else np.uint64(0)
            v[w] = s | (v[w] - u)
            carry = np.uint64(1) if (c1 or c2) else np.uint64(0)
        v[n_words - 1] &= top_mask
    ones = 0
    for w in range(n_words):
        x = v[w]
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        ones += int((x * np.uint64(0x0101010101010101)) >> np.uint64(56))
    return width - ones


@njit(cache=True)
def _sorted_intersect_size(a, b):  # pragma: no cover - jit
    i = j = n = 0
    while i < a.size and j < b.size:
        if a[i] == b[j]:
            n += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return n


def sorted_intersect_size(a: np.ndarray, b: np.ndarray) -> int:
    """|a ∩ b| for sorted unique uint64 arrays."""
    if a.size == 0 or b.size == 0:
        return 0
    if HAVE_NUMBA:
        return int(_sorted_intersect_size(a, b))
    return int(np.intersect1d(a, b, assume_unique=True).size)


@njit(cache=True)
def _batch_intersect_ranges(a, flat, starts, ends, out):  # pragma: no cover - jit
    for t in range(out.size):
        i = 0
        j = starts[t]
        hi = ends[t]
        n = 0
        while i < a.size and j < hi:
            if a[i] == flat[j]:
                n += 1
                i += 1
                j += 1
            elif a[i] < flat[j]:
                i += 1
            else:
                j += 1
        out[t] = n


@njit(parallel=True, cache=True)
def _jaccard_threshold_kernel(flat, starts, ends, src, dst, threshold, passed):  # pragma: no cover - jit
    for p in prange(src.size):
        i = starts[src[p]]
        ea = ends[src[p]]
        j = starts[dst[p]]
        eb = ends[dst[p]]
        na = ea - i
        nb = eb - j
        union = na + nb
        if union == 0:
            continue
        # n >= threshold * (na + nb) / (1 + threshold) is required to pass
        required = threshold * union / (1.0 + threshold) - 1e-9
        n = 0
        while i < ea and j < eb:
            rem = ea - i if ea - i < eb - j else eb - j
            if n + rem < required:
                break  # provably below threshold
            if flat[i] == flat[j]:
                n += 1
                i += 1
                j += 1
            elif flat[i] < flat[j]:
                i += 1
            else:
                j += 1
        passed[p] = n >= required and n / (union - n) >= threshold


class FlatSortedSets:
    """Many sorted uint64 sets packed into one buffer, for batched
    intersection without per-query copying."""

    def __init__(self, arrays: list[np.ndarray]):
        self.sizes = np.array([a.size for a in arrays], dtype=np.int64)
        bounds = np.zeros(len(arrays) + 1, dtype=np.int64)
        np.cumsum(self.sizes, out=bounds[1:])
        self.starts = bounds[:-1]
        self.ends = bounds[1:]
        self.flat = (np.concatenate(arrays) if bounds[-1] else np.empty(0, dtype=np.uint64))
        self._arrays = arrays

    def get(self, index: int) -> np.ndarray:
        return self._arrays[index]

    def intersect_one_vs_many(self, index: int, targets: np.ndarray) -> np.ndarray:
        """|set[index] ∩ set[t]| for every t in ``targets``."""
        out = np.zeros(targets.size, dtype=np.int64)
        a = self._arrays[index]
        if a.size == 0 or targets.size == 0:
            return out
        if HAVE_NUMBA:
            _batch_intersect_ranges(a, self.flat, self.starts[targets], self.ends[targets], out)
        else:
            for pos, t in enumerate(targets):
                out[pos] = sorted_intersect_size(a, self._arrays[int(t)])
        return out

    def jaccard_at_least(self, src: np.ndarray, dst: np.ndarray, threshold: float) -> np.ndarray:
        """For candidate pairs (set[src[p]], set[dst[p]]): True when their
        Jaccard reaches ``threshold``.

        Exact decision with early abandon: a merge stops once the
        threshold is provably unreachable, so sub-threshold pairs cost a
        fraction of a full intersection."""
        passed = np.zeros(src.size, dtype=np.bool_)
        if src.size == 0:
            return passed
        if HAVE_NUMBA:
            _jaccard_threshold_kernel(self.flat, self.starts, self.ends,
                                      src, dst, threshold, passed)
            return passed
        for p in range(src.size):
            a = self._arrays[int(src[p])]
            b = self._arrays[int(dst[p])]
            union = a.size + b.size
            if union == 0:
                continue
            inter = sorted_intersect_size(a, b)
            passed[p] = inter / (union - inter) >= threshold
        return passed


class MaskedString:
    """One string prepared for repeated LCS computations."""

    __slots__ = ("width", "codes", "masks", "used")

    def __init__(self, codec: CharCodec, text: str):
        self.codes = codec.encode(text)
        self.width = len(text)
        self.masks, self.used = build_masks(self.codes, codec.size)

    def lcs_with_codes(self, other_codes: np.ndarray) -> int:
        if self.width == 0 or other_codes.shape[0] == 0:
            return 0
        return int(_lcs_words(self.masks, self.used, other_codes, self.width))


def lcs_pair(shorter: MaskedString, longer_codes: np.ndarray) -> int:
    return shorter.lcs_with_codes(longer_codes)


def partial_best(shorter: MaskedString, longer_codes: np.ndarray) -> int:
    """Max LCS of the shorter string against every same-width window of the
    longer, with the exact skip-ahead rule (a window d offsets away can
    improve the best by at most d)."""
    w = shorter.width
    if w == 0:
        return 0
    limit = longer_codes.shape[0] - w
    if limit < 0:
        return shorter.lcs_with_codes(longer_codes)
    best = 0
    i = 0
    while i <= limit:
        l = shorter.lcs_with_codes(longer_codes[i : i + w])
        if l > best:
            best = l
            if best == w:
                break
        i += max(1, best + 1 - l)
    return best
