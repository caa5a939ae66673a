"""Corpus data model: ingestion filters, text normalization, sentence
splitting, and pseudonymization of reviewer identities.

A corpus is immutable once built.  Serialization is deterministic (sorted
keys, no timestamps) so the same input stream always produces byte-identical
output directories.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import hmac
import json
import re
import time
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from threading import Lock
from typing import Iterable, Iterator

from cryptography.fernet import Fernet, InvalidToken

AUDIENCES = ("to_authors", "to_editors")
RECOMMENDATIONS = ("accept", "minor", "major", "reject", "other")
AUTHOR_ROLES = ("never_author", "lead_author", "co_author")

_UID_RE = re.compile(r"^uid[0-9]+$")
_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

# Sentence boundaries at . ! ? are suppressed when the text up to and
# including the period ends with one of these (case-sensitive, preceded by
# a non-alphanumeric character or start of text).
PROTECTED_ABBREVIATIONS = (
    "e.g.", "i.e.", "et al.", "cf.", "Fig.", "Eq.", "Dr.", "vs.", "No.",
    "Mr.", "Mrs.", "Ms.", "Prof.",
)

_TERMINATORS = ".!?"


class CorpusError(Exception):
    pass


class CorpusIntegrityError(CorpusError):
    """Raised when the input stream violates corpus integrity (fatal)."""


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs to single spaces, trim, and strip accents.

    Accented characters are canonically decomposed and their combining
    marks removed; every other character is preserved.  Idempotent.
    """
    decomposed = unicodedata.normalize("NFD", raw)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return " ".join(stripped.split())


def _protected_abbreviation(text: str, dot_index: int) -> bool:
    head = text[: dot_index + 1]
    for abbr in PROTECTED_ABBREVIATIONS:
        if head.endswith(abbr):
            prev = dot_index - len(abbr)
            if prev < 0 or not text[prev].isalnum():
                return True
    return False


def split_sentences(text: str) -> list[str]:
    """Deterministic rule-based sentence split of normalized text.

    A boundary sits at '.', '!' or '?' followed by whitespace and then an
    uppercase letter, a digit, or end of text; '.' boundaries inside
    PROTECTED_ABBREVIATIONS are suppressed.  Sentences are trimmed and
    empties dropped, order preserved.
    """
    sentences: list[str] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        ch = text[i]
        if ch in _TERMINATORS:
            j = i + 1
            if j >= n:
                boundary, nxt = True, n
            elif text[j] in _TERMINATORS:
                # part of a run like "?!" or "..." - the run's last char decides
                boundary, nxt = False, j
            elif text[j].isspace():
                k = j
                while k < n and text[k].isspace():
                    k += 1
                boundary = k >= n or text[k].isupper() or text[k].isdigit()
                nxt = k
            else:
                boundary, nxt = False, j
            if boundary and ch == "." and _protected_abbreviation(text, i):
                boundary = False
            if boundary:
                piece = text[start : i + 1].strip()
                if piece:
                    sentences.append(piece)
                start = nxt
                i = nxt
                continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


@dataclass(frozen=True, slots=True)
class Comment:
    """One referee's text for one article in one review round."""

    comment_id: str
    article_id: str
    referee_uid: str
    journal_id: str
    audience: str
    round: int
    recommendation: str
    submitted_at: str  # UTC date, YYYY-MM-DD
    raw_text: str
    norm_text: str
    sentences: tuple[str, ...]

    def to_row(self) -> dict:
        return {
            "comment_id": self.comment_id,
            "article_id": self.article_id,
            "referee_uid": self.referee_uid,
            "journal_id": self.journal_id,
            "audience": self.audience,
            "round": self.round,
            "recommendation": self.recommendation,
            "submitted_at": self.submitted_at,
            "text": self.raw_text,
        }


@dataclass(frozen=True)
class CorpusStats:
    comments: int
    articles: int
    journals: int
    accounts: int
    sentences: int

    def as_dict(self) -> dict:
        return {
            "comments": self.comments,
            "articles": self.articles,
            "journals": self.journals,
            "accounts": self.accounts,
            "sentences": self.sentences,
        }


@dataclass(frozen=True)
class Exclusion:
    row_number: int
    comment_id: str
    reason: str


@dataclass(frozen=True)
class IngestConfig:
    journal_blocklist: frozenset[str] = frozenset()
    min_chars: int = 150
    keep_round: int = 1
    drop_recommendations: frozenset[str] = frozenset({"reject"})

    @classmethod
    def from_dict(cls, d: dict) -> "IngestConfig":
        return cls(
            journal_blocklist=frozenset(d.get("journal_blocklist", ())),
            min_chars=int(d.get("min_chars", 150)),
            keep_round=int(d.get("keep_round", 1)),
            drop_recommendations=frozenset(d.get("drop_recommendations", ("reject",))),
        )

    def as_dict(self) -> dict:
        return {
            "journal_blocklist": sorted(self.journal_blocklist),
            "min_chars": self.min_chars,
            "keep_round": self.keep_round,
            "drop_recommendations": sorted(self.drop_recommendations),
        }


@dataclass
class Corpus:
    """Immutable set of retained comments plus account/authorship context."""

    comments: dict[str, Comment]
    accounts: dict[str, str]  # uid -> author role
    authorship: dict[str, tuple[str, tuple[str, ...]]]  # article -> (lead, co-authors)
    recommendations: dict[str, tuple[tuple[str, str], ...]]  # article -> ((author, referee), ...)
    journal_blocklist: frozenset[str]
    stats: CorpusStats
    exclusions: tuple[Exclusion, ...] = ()
    ingest_config: IngestConfig = field(default_factory=IngestConfig)

    def comments_by_referee(self) -> dict[str, list[Comment]]:
        out: dict[str, list[Comment]] = {}
        for c in self.comments.values():
            out.setdefault(c.referee_uid, []).append(c)
        for lst in out.values():
            lst.sort(key=lambda c: c.comment_id)
        return out

    def ordered_comments(self) -> list[Comment]:
        return [self.comments[k] for k in sorted(self.comments)]

    def recount_stats(self) -> CorpusStats:
        articles = {c.article_id for c in self.comments.values()}
        journals = {c.journal_id for c in self.comments.values()}
        n_sentences = sum(len(c.sentences) for c in self.comments.values())
        return CorpusStats(
            comments=len(self.comments),
            articles=len(articles),
            journals=len(journals),
            accounts=len(self.accounts),
            sentences=n_sentences,
        )

    def validate(self) -> None:
        if self.stats != self.recount_stats():
            raise CorpusIntegrityError("stats do not match recount")
        for c in self.comments.values():
            if c.referee_uid not in self.accounts:
                raise CorpusIntegrityError(f"referee {c.referee_uid} missing from accounts")


_REQUIRED_FIELDS = (
    "comment_id", "article_id", "referee_uid", "journal_id",
    "audience", "round", "recommendation", "submitted_at", "text",
)


def _check_row(row: dict) -> str | None:
    for name in _REQUIRED_FIELDS:
        if row.get(name) in (None, ""):
            return f"missing field {name}"
    if row["audience"] not in AUDIENCES:
        return f"bad audience {row['audience']!r}"
    if row["recommendation"] not in RECOMMENDATIONS:
        return f"bad recommendation {row['recommendation']!r}"
    if not _UID_RE.match(str(row["referee_uid"])):
        return f"bad referee_uid {row['referee_uid']!r}"
    if not _DATE_RE.match(str(row["submitted_at"])):
        return f"bad submitted_at {row['submitted_at']!r}"
    try:
        if int(row["round"]) < 1:
            return "round < 1"
    except (TypeError, ValueError):
        return f"bad round {row['round']!r}"
    return None


def ingest(records: Iterable[dict], config: IngestConfig | None = None) -> Corpus:
    """Build a Corpus from raw review rows, applying the retention filters.

    Filter order: journal blocklist, review round, recommendation, then
    minimum length measured on the normalized text.  Malformed rows are
    rejected individually with a reason; a duplicate comment_id is fatal.
    """
    config = config or IngestConfig()
    comments: dict[str, Comment] = {}
    exclusions: list[Exclusion] = []
    authorship: dict[str, tuple[str, tuple[str, ...]]] = {}
    recommendations: dict[str, list[tuple[str, str]]] = {}
    author_uids: set[str] = set()
    seen_ids: set[str] = set()

    for row_number, row in enumerate(records, start=1):
        if not isinstance(row, dict):
            exclusions.append(Exclusion(row_number, "", "malformed_row: not an object"))
            continue
        problem = _check_row(row)
        cid = str(row.get("comment_id", ""))
        if problem:
            exclusions.append(Exclusion(row_number, cid, f"malformed_row: {problem}"))
            continue
        if cid in seen_ids:
            raise CorpusIntegrityError(f"duplicate comment_id {cid!r} at row {row_number}")
        seen_ids.add(cid)

        article = str(row["article_id"])
        # Authorship / recommendation sidecar data may ride on any row of
        # the article; merged here, conflicts are row-level rejects.
        if "authors" in row and row["authors"]:
            lead = str(row["authors"].get("lead", ""))
            co = tuple(str(u) for u in row["authors"].get("co", ()))
            if article in authorship and authorship[article] != (lead, co):
                exclusions.append(Exclusion(row_number, cid, "malformed_row: conflicting authors"))
                continue
            authorship[article] = (lead, co)
            author_uids.add(lead)
            author_uids.update(co)
        if "recommended_referees" in row and row["recommended_referees"]:
            pairs = recommendations.setdefault(article, [])
            for rec in row["recommended_referees"]:
                pair = (str(rec["author"]), str(rec["referee"]))
                if pair not in pairs:
                    pairs.append(pair)
                author_uids.add(pair[0])

        if row["journal_id"] in config.journal_blocklist:
            exclusions.append(Exclusion(row_number, cid, "blocklisted_journal"))
            continue
        if int(row["round"]) != config.keep_round:
            exclusions.append(Exclusion(row_number, cid, "later_round"))
            continue
        if row["recommendation"] in config.drop_recommendations:
            exclusions.append(Exclusion(row_number, cid, "reject_recommendation"))
            continue
        norm = normalize_text(str(row["text"]))
        if len(norm) < config.min_chars:
            exclusions.append(Exclusion(row_number, cid, "too_short"))
            continue

        comments[cid] = Comment(
            comment_id=cid,
            article_id=article,
            referee_uid=str(row["referee_uid"]),
            journal_id=str(row["journal_id"]),
            audience=str(row["audience"]),
            round=int(row["round"]),
            recommendation=str(row["recommendation"]),
            submitted_at=str(row["submitted_at"]),
            raw_text=str(row["text"]),
            norm_text=norm,
            sentences=tuple(split_sentences(norm)),
        )

    accounts: dict[str, str] = {}
    leads = {lead for lead, _ in authorship.values()}
    cos = {u for _, co in authorship.values() for u in co}
    for uid in sorted({c.referee_uid for c in comments.values()} | author_uids):
        if uid in leads:
            accounts[uid] = "lead_author"
        elif uid in cos:
            accounts[uid] = "co_author"
        else:
            accounts[uid] = "never_author"

    corpus = Corpus(
        comments=comments,
        accounts=accounts,
        authorship=authorship,
        recommendations={k: tuple(v) for k, v in sorted(recommendations.items())},
        journal_blocklist=config.journal_blocklist,
        stats=CorpusStats(0, 0, 0, 0, 0),
        exclusions=tuple(exclusions),
        ingest_config=config,
    )
    corpus.stats = corpus.recount_stats()
    return corpus


# ---------------------------------------------------------------------------
# Readers and on-disk corpus format
# ---------------------------------------------------------------------------

_LIST_SEP = ";"


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def read_csv(path: str | Path) -> Iterator[dict]:
    """CSV reader with the same columns as the JSON-lines format.

    List-valued columns (co_authors, recommended_referees) are
    semicolon-joined; recommended referee pairs use author:referee.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out: dict = dict(row)
            if row.get("lead_author"):
                out["authors"] = {
                    "lead": row["lead_author"],
                    "co": [u for u in (row.get("co_authors") or "").split(_LIST_SEP) if u],
                }
            out.pop("lead_author", None)
            out.pop("co_authors", None)
            recs = row.get("recommended_referees") or ""
            if recs:
                out["recommended_referees"] = [
                    {"author": p.split(":")[0], "referee": p.split(":")[1]}
                    for p in recs.split(_LIST_SEP)
                    if ":" in p
                ]
            yield out


CORPUS_FORMAT_VERSION = 1


def save_corpus(corpus: Corpus, directory: str | Path) -> Path:
    """Persist a corpus as a versioned directory (JSON-lines + manifest).

    Output is byte-deterministic for a given corpus.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "comments.jsonl", "w", encoding="utf-8") as fh:
        for c in corpus.ordered_comments():
            rec = c.to_row()
            rec["norm_text"] = c.norm_text
            rec["sentences"] = list(c.sentences)
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    manifest = {
        "format_version": CORPUS_FORMAT_VERSION,
        "stats": corpus.stats.as_dict(),
        "ingest_config": corpus.ingest_config.as_dict(),
        "accounts": corpus.accounts,
        "authorship": {k: [v[0], list(v[1])] for k, v in sorted(corpus.authorship.items())},
        "recommendations": {k: [list(p) for p in v] for k, v in sorted(corpus.recommendations.items())},
        "exclusions": [
            {"row": e.row_number, "comment_id": e.comment_id, "reason": e.reason}
            for e in corpus.exclusions
        ],
    }
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, ensure_ascii=False, indent=1)
        fh.write("\n")
    return directory


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    with open(directory / "manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CORPUS_FORMAT_VERSION:
        raise CorpusError(f"unsupported corpus format {manifest.get('format_version')!r}")
    comments: dict[str, Comment] = {}
    for rec in read_jsonl(directory / "comments.jsonl"):
        comments[rec["comment_id"]] = Comment(
            comment_id=rec["comment_id"],
            article_id=rec["article_id"],
            referee_uid=rec["referee_uid"],
            journal_id=rec["journal_id"],
            audience=rec["audience"],
            round=int(rec["round"]),
            recommendation=rec["recommendation"],
            submitted_at=rec["submitted_at"],
            raw_text=rec["text"],
            norm_text=rec["norm_text"],
            sentences=tuple(rec["sentences"]),
        )
    config = IngestConfig.from_dict(manifest["ingest_config"])
    corpus = Corpus(
        comments=comments,
        accounts=dict(manifest["accounts"]),
        authorship={k: (v[0], tuple(v[1])) for k, v in manifest["authorship"].items()},
        recommendations={
            k: tuple((a, r) for a, r in v) for k, v in manifest["recommendations"].items()
        },
        journal_blocklist=config.journal_blocklist,
        stats=CorpusStats(**manifest["stats"]),
        exclusions=tuple(
            Exclusion(e["row"], e["comment_id"], e["reason"]) for e in manifest["exclusions"]
        ),
        ingest_config=config,
    )
    corpus.validate()
    return corpus


# ---------------------------------------------------------------------------
# Pseudonymization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditEntry:
    timestamp: float
    actor: str
    uid: str
    reason: str
    outcome: str  # granted | denied | not_found

    def as_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "actor": self.actor,
            "uid": self.uid,
            "reason": self.reason,
            "outcome": self.outcome,
        }


class PseudonymAccessError(CorpusError):
    pass


class PseudonymMap:
    """Keyed deterministic identity -> UID mapping with audited reversal.

    Forward mapping is an HMAC of the identity truncated to decimal digits;
    the stored reverse table is only reachable with the map's secret key,
    and every reversal attempt (granted or not) appends one audit entry.
    """

    UID_DIGITS = 10

    def __init__(self, key: str | bytes):
        self._key = key.encode() if isinstance(key, str) else bytes(key)
        self._forward: dict[str, str] = {}
        self._reverse: dict[str, str] = {}
        self.audit: list[AuditEntry] = []
        self._lock = Lock()

    def _fingerprint(self, key: bytes) -> str:
        return hashlib.sha256(b"dupforge-pseudonym:" + key).hexdigest()

    def _derive(self, identity: str, attempt: int) -> str:
        msg = identity.encode() if attempt == 0 else f"{identity}\x00{attempt}".encode()
        digest = hmac.new(self._key, msg, hashlib.sha256).digest()
        number = int.from_bytes(digest[:8], "big") % (10**self.UID_DIGITS)
        return f"uid{number}"

    def uid_for(self, identity: str) -> str:
        with self._lock:
            existing = self._forward.get(identity)
            if existing is not None:
                return existing
            attempt = 0
            uid = self._derive(identity, attempt)
            while uid in self._reverse:
                attempt += 1
                uid = self._derive(identity, attempt)
            self._forward[identity] = uid
            self._reverse[uid] = identity
            return uid

    def reverse(self, uid: str, key: str | bytes, reason: str, actor: str = "") -> str:
        key_bytes = key.encode() if isinstance(key, str) else bytes(key)
        if not reason:
            raise ValueError("a non-empty reason is required to reverse a pseudonym")
        with self._lock:
            if not hmac.compare_digest(self._fingerprint(key_bytes), self._fingerprint(self._key)):
                self.audit.append(AuditEntry(time.time(), actor, uid, reason, "denied"))
                raise PseudonymAccessError("invalid de-pseudonymisation key")
            identity = self._reverse.get(uid)
            if identity is None:
                self.audit.append(AuditEntry(time.time(), actor, uid, reason, "not_found"))
                raise KeyError(f"unknown uid {uid!r}")
            self.audit.append(AuditEntry(time.time(), actor, uid, reason, "granted"))
            return identity

    def __len__(self):
        return len(self._forward)

    def _fernet(self) -> Fernet:
        return Fernet(base64.urlsafe_b64encode(hashlib.sha256(self._key).digest()))

    def save(self, path: str | Path) -> None:
        """Write the map as an encrypted file (never co-located with a
        corpus export by convention; callers choose the path)."""
        payload = json.dumps(
            {
                "forward": self._forward,
                "audit": [e.as_dict() for e in self.audit],
            },
            sort_keys=True,
        ).encode()
        Path(path).write_bytes(self._fernet().encrypt(payload))

    @classmethod
    def load(cls, path: str | Path, key: str | bytes) -> "PseudonymMap":
        pm = cls(key)
        try:
            payload = json.loads(pm._fernet().decrypt(Path(path).read_bytes()))
        except InvalidToken:
            raise PseudonymAccessError("invalid key for pseudonym map file") from None
        pm._forward = dict(payload["forward"])
        pm._reverse = {v: k for k, v in pm._forward.items()}
        pm.audit = [AuditEntry(**e) for e in payload["audit"]]
        return pm


def pseudonymize(identity: str, pmap: PseudonymMap) -> str:
    return pmap.uid_for(identity)


def reverse_pseudonym(uid: str, pmap: PseudonymMap, key: str | bytes, reason: str, actor: str = "") -> str:
    return pmap.reverse(uid, key, reason, actor)
