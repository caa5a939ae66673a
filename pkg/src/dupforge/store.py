"""Append-only directory store shared by the CLI and the HTTP service.

Layout under the store root:
    corpora/<corpus_id>/    versioned corpus directories
    runs/<run_id>/          run records (write-once after completion)
    suppressions.jsonl      append-only suppression list
    audit.jsonl             de-pseudonymisation audit log
    idempotency.json        idempotency-token replay cache
"""

from __future__ import annotations

import json
import re
import time
from pathlib import Path
from threading import Lock

from .corpus import Corpus, load_corpus, save_corpus
from .graph import SuppressionList
from .searches import RunRecord, load_run

_ID_RE = re.compile(r"(\d+)$")


class StoreError(Exception):
    pass


class DataStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "corpora").mkdir(parents=True, exist_ok=True)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)
        self._lock = Lock()

    # -- id sequencing ------------------------------------------------------

    def _next_id(self, directory: Path, prefix: str) -> str:
        best = 0
        if directory.exists():
            for child in directory.iterdir():
                m = _ID_RE.search(child.name)
                if child.name.startswith(prefix) and m:
                    best = max(best, int(m.group(1)))
        return f"{prefix}{best + 1:04d}"

    # -- corpora ------------------------------------------------------------

    def corpus_ids(self) -> list[str]:
        return sorted(p.name for p in (self.root / "corpora").iterdir() if p.is_dir())

    def add_corpus(self, corpus: Corpus, corpus_id: str | None = None) -> str:
        with self._lock:
            corpus_id = corpus_id or self._next_id(self.root / "corpora", "c")
            target = self.root / "corpora" / corpus_id
            if target.exists():
                raise StoreError(f"corpus {corpus_id} already exists")
            save_corpus(corpus, target)
            return corpus_id

    def corpus_dir(self, corpus_id: str) -> Path:
        path = self.root / "corpora" / corpus_id
        if not path.exists():
            raise KeyError(f"unknown corpus {corpus_id!r}")
        return path

    def load_corpus(self, corpus_id: str) -> Corpus:
        return load_corpus(self.corpus_dir(corpus_id))

    # -- runs -----------------------------------------------------------------

    def run_ids(self) -> list[str]:
        return sorted(p.name for p in (self.root / "runs").iterdir() if p.is_dir())

    def new_run_id(self) -> str:
        with self._lock:
            run_id = self._next_id(self.root / "runs", "run")
            (self.root / "runs" / run_id).mkdir()
            return run_id

    def run_dir(self, run_id: str) -> Path:
        path = self.root / "runs" / run_id
        if not path.exists():
            raise KeyError(f"unknown run {run_id!r}")
        return path

    def load_run(self, run_id: str) -> RunRecord:
        return load_run(self.run_dir(run_id))

    # -- suppression list ---------------------------------------------------

    @property
    def suppressions_path(self) -> Path:
        return self.root / "suppressions.jsonl"

    def suppressions(self) -> SuppressionList:
        return SuppressionList.load(self.suppressions_path)

    def save_suppressions(self, suppressions: SuppressionList) -> None:
        suppressions.save(self.suppressions_path)

    # -- audit log ------------------------------------------------------------

    @property
    def audit_path(self) -> Path:
        return self.root / "audit.jsonl"

    def append_audit(self, entry: dict) -> None:
        with self._lock:
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def audit_entries(self) -> list[dict]:
        if not self.audit_path.exists():
            return []
        return [json.loads(line) for line in self.audit_path.read_text(encoding="utf-8").splitlines()
                if line.strip()]

    # -- idempotency cache ----------------------------------------------------

    @property
    def idempotency_path(self) -> Path:
        return self.root / "idempotency.json"

    def idempotency_get(self, token: str) -> dict | None:
        if not self.idempotency_path.exists():
            return None
        return json.loads(self.idempotency_path.read_text(encoding="utf-8")).get(token)

    def idempotency_put(self, token: str, response: dict) -> None:
        with self._lock:
            cache = {}
            if self.idempotency_path.exists():
                cache = json.loads(self.idempotency_path.read_text(encoding="utf-8"))
            cache[token] = {"stored_at": time.time(), **response}
            self.idempotency_path.write_text(json.dumps(cache, sort_keys=True), encoding="utf-8")
