"""MinHash signatures and a banded locality-sensitive-hash index.

Signatures hash each shingle to a stable 64-bit base value (blake2b), then
apply ``num_perm`` seeded bijective mixers and keep the componentwise
minimum, so the fraction of equal components estimates shingle Jaccard
similarity.  The index buckets each signature by band so that candidate
retrieval is sub-quadratic; callers must verify candidates with the exact
Jaccard (the index only approximates a brute-force search).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DEFAULT_NUM_PERM = 128
DEFAULT_THRESHOLD = 0.5
DEFAULT_SEED = 42

_U64 = np.uint64


class LshContractError(ValueError):
    pass


# Base hash: codepoint polynomial accumulation (mod 2^64) finished with a
# splitmix64 mixer.  Non-cryptographic but well distributed, deterministic
# across platforms, and vectorizable over all shingles of a text at once.
_POLY_B = 1099511628211  # FNV-1a prime, odd
_MASK64 = (1 << 64) - 1


def _mix64_int(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def base_hash64(shingle: str) -> int:
    """Frozen 64-bit base hash of one shingle (see module test vectors)."""
    acc = 0
    for ch in shingle:
        acc = (acc * _POLY_B + ord(ch)) & _MASK64
    return _mix64_int(acc)


def base_hashes(shingles: Iterable[str]) -> np.ndarray:
    return np.array([base_hash64(s) for s in shingles], dtype=np.uint64)


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps by design
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    return z ^ (z >> _U64(31))


def _perm_seeds(num_perm: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(1, np.iinfo(np.uint64).max, size=num_perm, dtype=np.uint64)


@dataclass(frozen=True)
class MinHashSignature:
    """Fixed-length MinHash sketch of a shingle set.

    ``values`` is None for the sentinel signature of an empty shingle set;
    sentinels match nothing (estimates 0, never indexed).
    """

    num_perm: int
    seed: int
    source_id: str
    values: np.ndarray | None = field(repr=False, default=None)

    @property
    def is_empty(self) -> bool:
        return self.values is None


def minhash_signature(
    shingle_hashes: np.ndarray | Iterable[str],
    num_perm: int = DEFAULT_NUM_PERM,
    seed: int = DEFAULT_SEED,
    source_id: str = "",
    _seeds: np.ndarray | None = None,
) -> MinHashSignature:
    """Compute the MinHash signature of a shingle set.

    Accepts either precomputed 64-bit base hashes or the shingle strings
    themselves.  num_perm must be at least 16.
    """
    if num_perm < 16:
        raise ValueError("num_perm must be >= 16")
    if not isinstance(shingle_hashes, np.ndarray):
        shingle_hashes = base_hashes(list(shingle_hashes))
    if shingle_hashes.size == 0:
        return MinHashSignature(num_perm=num_perm, seed=seed, source_id=source_id, values=None)
    seeds = _seeds if _seeds is not None else _perm_seeds(num_perm, seed)
    with np.errstate(over="ignore"):
        mixed = _mix64(shingle_hashes[None, :] ^ seeds[:, None])
    return MinHashSignature(
        num_perm=num_perm, seed=seed, source_id=source_id, values=mixed.min(axis=1)
    )


class SignatureFactory:
    """Reuses the seeded mixer array across many signatures."""

    def __init__(self, num_perm: int = DEFAULT_NUM_PERM, seed: int = DEFAULT_SEED):
        if num_perm < 16:
            raise ValueError("num_perm must be >= 16")
        self.num_perm = num_perm
        self.seed = seed
        self._seeds = _perm_seeds(num_perm, seed)

    def from_hashes(self, hashes: np.ndarray, source_id: str = "") -> MinHashSignature:
        return minhash_signature(hashes, self.num_perm, self.seed, source_id, _seeds=self._seeds)

    def from_text(self, text: str, k: int, source_id: str = "") -> MinHashSignature:
        hs = hashed_shingles(text, k)
        return self.from_hashes(hs, source_id)


def hashed_shingles(text: str, k: int) -> np.ndarray:
    """Sorted unique 64-bit base hashes of a text's k-shingles.

    Vectorized Horner evaluation over all windows; elementwise identical
    to hashing each shingle with base_hash64."""
    n = len(text)
    if n < k:
        return np.empty(0, dtype=np.uint64)
    codes = np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
    m = n - k + 1
    acc = np.zeros(m, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for j in range(k):
            acc = acc * _U64(_POLY_B) + codes[j : j + m]
        return np.unique(_mix64(acc))


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of equal signature components; 0 when either is empty."""
    if a.num_perm != b.num_perm or a.seed != b.seed:
        raise LshContractError("signatures built with different num_perm or seed")
    if a.is_empty or b.is_empty:
        return 0.0
    return float(np.count_nonzero(a.values == b.values)) / a.num_perm


def _integrate(f, lo: float, hi: float, steps: int = 1000) -> float:
    xs = np.linspace(lo, hi, steps + 1)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(f(xs), xs))


def choose_bands(
    num_perm: int,
    threshold: float,
    fp_weight: float = 0.5,
    fn_weight: float = 0.5,
) -> tuple[int, int]:
    """Pick (bands, rows) with bands*rows == num_perm minimizing the
    weighted false-positive/false-negative area of the S-curve
    1 - (1 - s^rows)^bands around the threshold."""
    best = None
    for b in range(1, num_perm + 1):
        if num_perm % b:
            continue
        r = num_perm // b
        curve = lambda s, b=b, r=r: 1.0 - (1.0 - s**r) ** b
        fp = _integrate(curve, 0.0, threshold)
        fn = _integrate(lambda s: 1.0 - curve(s), threshold, 1.0)
        cost = fp_weight * fp + fn_weight * fn
        if best is None or cost < best[0]:
            best = (cost, b, r)
    assert best is not None
    return best[1], best[2]


@dataclass
class LshIndex:
    """Banded bucket index over MinHash signatures.

    Immutable after build; queries return every indexed id that shares at
    least one full band hash with the probe, excluding the probe's own id.
    """

    num_perm: int
    seed: int
    bands: int
    rows: int
    threshold: float
    buckets: dict[tuple[int, bytes], set[str]] = field(default_factory=dict)
    indexed_ids: set[str] = field(default_factory=set)

    def _band_keys(self, sig: MinHashSignature) -> list[tuple[int, bytes]]:
        vals = sig.values
        return [
            (band, vals[band * self.rows : (band + 1) * self.rows].tobytes())
            for band in range(self.bands)
        ]

    def _check(self, sig: MinHashSignature) -> None:
        if sig.num_perm != self.num_perm or sig.seed != self.seed:
            raise LshContractError(
                f"signature (num_perm={sig.num_perm}, seed={sig.seed}) does not match "
                f"index (num_perm={self.num_perm}, seed={self.seed})"
            )

    def insert(self, sig: MinHashSignature) -> None:
        self._check(sig)
        if sig.is_empty:
            return
        self.indexed_ids.add(sig.source_id)
        for key in self._band_keys(sig):
            self.buckets.setdefault(key, set()).add(sig.source_id)

    def query(self, sig: MinHashSignature) -> set[str]:
        self._check(sig)
        if sig.is_empty:
            return set()
        out: set[str] = set()
        for key in self._band_keys(sig):
            hit = self.buckets.get(key)
            if hit:
                out.update(hit)
        out.discard(sig.source_id)
        return out


def lsh_build(
    signatures: Iterable[MinHashSignature],
    threshold: float = DEFAULT_THRESHOLD,
) -> LshIndex:
    """Build an LshIndex with optimal banding for the target threshold."""
    sigs = list(signatures)
    non_empty = [s for s in sigs if not s.is_empty]
    if non_empty:
        num_perm = non_empty[0].num_perm
        seed = non_empty[0].seed
    else:
        num_perm, seed = DEFAULT_NUM_PERM, DEFAULT_SEED
    bands, rows = choose_bands(num_perm, threshold)
    index = LshIndex(num_perm=num_perm, seed=seed, bands=bands, rows=rows, threshold=threshold)
    for sig in sigs:
        index.insert(sig)
    return index


def lsh_query(index: LshIndex, sig: MinHashSignature) -> set[str]:
    return index.query(sig)


# ---------------------------------------------------------------------------
# Binary serialization
#
# Layout (all integers little-endian):
#   magic    8 bytes  b"DFLSHv1\0"
#   u32      num_perm
#   u64      seed
#   u32      bands
#   u32      rows
#   f64      threshold
#   u64      bucket count
#   then per bucket (sorted by band index, then key bytes):
#     u32    band index
#     u32    key length, followed by key bytes
#     u32    member count
#     then per member (sorted): u32 id length, followed by UTF-8 id bytes
# ---------------------------------------------------------------------------

_MAGIC = b"DFLSHv1\0"


def save_index(index: LshIndex, path: str | Path) -> None:
    buf = bytearray()
    buf += _MAGIC
    buf += struct.pack("<IQII d Q".replace(" ", ""), index.num_perm, index.seed,
                       index.bands, index.rows, index.threshold, len(index.buckets))
    for (band, key), members in sorted(index.buckets.items()):
        buf += struct.pack("<II", band, len(key))
        buf += key
        ids = sorted(members)
        buf += struct.pack("<I", len(ids))
        for doc_id in ids:
            raw = doc_id.encode("utf-8")
            buf += struct.pack("<I", len(raw))
            buf += raw
    Path(path).write_bytes(bytes(buf))


def load_index(path: str | Path) -> LshIndex:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise LshContractError("not a dupforge LSH index file")
    offset = 8
    num_perm, seed, bands, rows, threshold, n_buckets = struct.unpack_from("<IQIIdQ", data, offset)
    offset += struct.calcsize("<IQIIdQ")
    index = LshIndex(num_perm=num_perm, seed=int(seed), bands=bands, rows=rows, threshold=threshold)
    for _ in range(n_buckets):
        band, key_len = struct.unpack_from("<II", data, offset)
        offset += 8
        key = data[offset : offset + key_len]
        offset += key_len
        (n_ids,) = struct.unpack_from("<I", data, offset)
        offset += 4
        members = set()
        for _ in range(n_ids):
            (id_len,) = struct.unpack_from("<I", data, offset)
            offset += 4
            members.add(data[offset : offset + id_len].decode("utf-8"))
            offset += id_len
        index.buckets[(band, key)] = members
        index.indexed_ids.update(members)
    return index
