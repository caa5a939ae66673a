"""HTTP service exposing corpora, runs, evidence, the graph, ranking,
triage actions, and audited de-pseudonymisation.

Many concurrent readers, one pipeline writer: POST /runs enqueues and a
single worker thread executes runs in order.  Completed run artifacts are
write-once.  Mutating endpoints accept an Idempotency-Key header and
replay the stored response on retry.  Errors are JSON {code, message}.

If an auth token is configured, mutating endpoints require
``Authorization: Bearer <token>``; de-pseudonymisation additionally needs
the map's own secret key per request, which the service never stores.
"""

from __future__ import annotations

import queue
import threading
import time
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, Request
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from . import __version__
from .corpus import IngestConfig, PseudonymAccessError, PseudonymMap, ingest
from .graph import build_graph, components, pagerank
from .reports import emit_reports
from .searches import RunConfig, RunRecord, run_all
from .store import DataStore

_REPORT_NAMES = {
    "summary", "overlap_matrix", "timings", "fig1_hist", "fig3_hist",
    "table2_freq", "fig9_series",
}


class ApiError(HTTPException):
    def __init__(self, status_code: int, code: str, message: str):
        super().__init__(status_code=status_code, detail={"code": code, "message": message})


def _not_found(message: str) -> ApiError:
    return ApiError(404, "not_found", message)


class ServiceState:
    def __init__(self, store: DataStore, auth_token: str | None = None,
                 pseudonym_map_path: str | Path | None = None):
        self.store = store
        self.auth_token = auth_token
        self.pseudonym_map_path = Path(pseudonym_map_path) if pseudonym_map_path else None
        self.run_queue: "queue.Queue[tuple[str, str, RunConfig]]" = queue.Queue()
        self.worker: threading.Thread | None = None
        self.worker_lock = threading.Lock()
        self.suppress_lock = threading.Lock()
        self.pseudonym_lock = threading.Lock()
        self.corpus_cache: dict[str, object] = {}
        self.run_cache: dict[str, RunRecord] = {}
        self.graph_cache: dict[str, dict] = {}

    def ensure_worker(self) -> None:
        with self.worker_lock:
            if self.worker is None or not self.worker.is_alive():
                self.worker = threading.Thread(target=self._drain, daemon=True)
                self.worker.start()

    def _drain(self) -> None:
        while True:
            try:
                run_id, corpus_id, config = self.run_queue.get(timeout=0.5)
            except queue.Empty:
                return
            try:
                corpus = self.get_corpus(corpus_id)
                suppression = self.store.suppressions()
                run_all(
                    corpus, config, suppression=suppression, run_id=run_id,
                    out_dir=self.store.run_dir(run_id), corpus_id=corpus_id,
                )
            except Exception as exc:  # keep the worker alive; mark the run failed
                run_dir = self.store.run_dir(run_id)
                (run_dir / "record.json").write_text(
                    '{"run_id": "%s", "status": "failed", "error": "%s", '
                    '"created_at": %f, "evidence_sha256": ""}'
                    % (run_id, type(exc).__name__, time.time()),
                    encoding="utf-8",
                )
            finally:
                self.run_queue.task_done()

    def get_corpus(self, corpus_id: str):
        if corpus_id not in self.corpus_cache:
            self.corpus_cache[corpus_id] = self.store.load_corpus(corpus_id)
        return self.corpus_cache[corpus_id]

    def get_run(self, run_id: str) -> RunRecord:
        cached = self.run_cache.get(run_id)
        if cached is not None:
            return cached
        try:
            record = self.store.load_run(run_id)
        except KeyError:
            raise _not_found(f"unknown run {run_id!r}") from None
        except FileNotFoundError:
            raise ApiError(409, "not_ready", f"run {run_id} has not completed") from None
        if record.status == "complete":
            self.run_cache[run_id] = record
        return record


def _paginate(items: list, limit: int, offset: int) -> dict:
    return {
        "total": len(items),
        "limit": limit,
        "offset": offset,
        "items": items[offset : offset + limit],
    }


def create_app(
    data_dir: str | Path,
    auth_token: str | None = None,
    pseudonym_map_path: str | Path | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    store = DataStore(data_dir)
    state = ServiceState(store, auth_token=auth_token, pseudonym_map_path=pseudonym_map_path)
    app = FastAPI(title="dupforge", version=__version__)
    app.state.service = state
    if frontend_dir and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    @app.exception_handler(HTTPException)
    async def _http_error(_request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(detail, status_code=exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request: Request, exc: RequestValidationError):
        return JSONResponse({"code": "bad_request", "message": str(exc)}, status_code=400)

    def require_auth(request: Request) -> None:
        if state.auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {state.auth_token}":
            raise ApiError(401, "unauthorized", "missing or invalid bearer token")

    def idempotent(request: Request, fn: Callable[[], tuple[int, dict]]) -> JSONResponse:
        token = request.headers.get("idempotency-key")
        if token:
            cached = store.idempotency_get(token)
            if cached is not None:
                return JSONResponse(cached["body"], status_code=cached["status"])
        status_code, body = fn()
        if token:
            store.idempotency_put(token, {"status": status_code, "body": body})
        return JSONResponse(body, status_code=status_code)

    # -- health and corpora -------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/corpora")
    def list_corpora():
        return {"corpora": store.corpus_ids()}

    @app.post("/corpora")
    async def upload_corpus(request: Request):
        require_auth(request)
        payload = await request.json()

        def do() -> tuple[int, dict]:
            rows = payload.get("rows")
            if not isinstance(rows, list):
                raise ApiError(400, "bad_request", "body must contain a 'rows' list")
            config = IngestConfig.from_dict(payload.get("config", {}))
            corpus = ingest(rows, config)
            corpus_id = store.add_corpus(corpus)
            return 201, {
                "corpus_id": corpus_id,
                "stats": corpus.stats.as_dict(),
                "excluded_rows": len(corpus.exclusions),
            }

        return idempotent(request, do)

    @app.get("/corpora/{corpus_id}/stats")
    def corpus_stats(corpus_id: str):
        try:
            corpus = state.get_corpus(corpus_id)
        except KeyError:
            raise _not_found(f"unknown corpus {corpus_id!r}") from None
        return {
            "corpus_id": corpus_id,
            "stats": corpus.stats.as_dict(),
            "excluded_rows": len(corpus.exclusions),
            "journal_blocklist": sorted(corpus.journal_blocklist),
        }

    # -- runs -----------------------------------------------------------------

    @app.post("/runs", status_code=202)
    async def start_run(request: Request):
        require_auth(request)
        payload = await request.json()

        def do() -> tuple[int, dict]:
            corpus_id = payload.get("corpus_id")
            if not corpus_id:
                ids = store.corpus_ids()
                if not ids:
                    raise ApiError(400, "bad_request", "no corpus available; upload one first")
                corpus_id = ids[-1]
            try:
                store.corpus_dir(corpus_id)
            except KeyError:
                raise _not_found(f"unknown corpus {corpus_id!r}") from None
            try:
                config = RunConfig.from_dict(payload.get("config", {}))
            except ValueError as exc:
                raise ApiError(400, "bad_request", str(exc)) from None
            run_id = store.new_run_id()
            run_dir = store.run_dir(run_id)
            (run_dir / "record.json").write_text(
                '{"run_id": "%s", "status": "running", "error": "", '
                '"created_at": %f, "evidence_sha256": ""}'
                % (run_id, time.time()),
                encoding="utf-8",
            )
            (run_dir / "service.json").write_text(
                '{"corpus_id": "%s"}' % corpus_id, encoding="utf-8"
            )
            position = state.run_queue.qsize()
            state.run_queue.put((run_id, corpus_id, config))
            state.ensure_worker()
            return 202, {"run_id": run_id, "corpus_id": corpus_id, "queue_position": position}

        return idempotent(request, do)

    @app.get("/runs")
    def list_runs():
        return {"runs": store.run_ids()}

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        import json as _json

        try:
            run_dir = store.run_dir(run_id)
        except KeyError:
            raise _not_found(f"unknown run {run_id!r}") from None
        head = _json.loads((run_dir / "record.json").read_text(encoding="utf-8"))
        out = {
            "run_id": run_id,
            "status": head["status"],
            "error": head.get("error", ""),
            "created_at": head.get("created_at"),
        }
        if head["status"] in ("complete", "failed") and (run_dir / "timings.json").exists():
            record = state.get_run(run_id)
            out["timings"] = record.timings()
            out["config"] = record.config.as_dict()
            out["corpus_id"] = record.corpus_id
            out["suppression_version"] = record.suppression_version
            out["evidence_count"] = len(record.evidence)
        return out

    @app.get("/runs/{run_id}/evidence")
    def run_evidence(run_id: str, method: str = "", min_score: float | None = None,
                     limit: int = 100, offset: int = 0):
        record = state.get_run(run_id)
        items = record.evidence
        if method:
            items = [ev for ev in items if ev.method == method]
        if min_score is not None:
            items = [ev for ev in items if ev.score.value >= min_score]
        return _paginate([ev.to_json() for ev in items], limit, offset)

    def _graph_payload(run_id: str) -> dict:
        if run_id in state.graph_cache:
            return state.graph_cache[run_id]
        record = state.get_run(run_id)
        if record.status != "complete":
            raise ApiError(409, "not_ready", f"run {run_id} is {record.status}")
        corpus = state.get_corpus(record.corpus_id) if record.corpus_id else None
        if corpus is None:
            raise ApiError(409, "not_ready", "run has no associated corpus")
        graph = build_graph(record.evidence, corpus)
        comps = components(graph)
        comp_of = {}
        for idx, comp in enumerate(comps):
            for uid in comp:
                comp_of[uid] = idx
        ranking = pagerank(graph, damping=record.config.damping, tol=record.config.tol,
                           weighted=record.config.pagerank_weighted)
        rank_of = {r.uid: r for r in ranking}
        payload = graph.to_json()
        for node in payload["nodes"]:
            node["component"] = comp_of.get(node["uid"], -1)
            entry = rank_of.get(node["uid"])
            node["pagerank"] = entry.pagerank if entry else 0.0
            node["rank_position"] = entry.position if entry else 0
        payload["components"] = comps
        payload["ranking"] = [
            {"uid": r.uid, "pagerank": r.pagerank, "position": r.position} for r in ranking
        ]
        state.graph_cache[run_id] = payload
        return payload

    @app.get("/runs/{run_id}/graph")
    def run_graph(run_id: str):
        return _graph_payload(run_id)

    @app.get("/runs/{run_id}/ranking")
    def run_ranking(run_id: str, limit: int = 100, offset: int = 0):
        payload = _graph_payload(run_id)
        return _paginate(payload["ranking"], limit, offset)

    @app.get("/runs/{run_id}/reports/{name}")
    def run_report(run_id: str, name: str):
        record = state.get_run(run_id)
        if record.status != "complete":
            raise ApiError(409, "not_ready", f"run {run_id} is {record.status}")
        run_dir = store.run_dir(run_id)
        reports_dir = run_dir / "reports"
        target = reports_dir / f"{name}.csv"
        if not target.exists():
            if not (name in _REPORT_NAMES or name.startswith("search4_dist_")):
                raise _not_found(f"unknown report {name!r}")
            corpus = state.get_corpus(record.corpus_id)
            emit_reports(record, corpus, reports_dir, suppression=store.suppressions())
            if not target.exists():
                raise _not_found(f"report {name!r} not produced by this run")
        return PlainTextResponse(target.read_text(encoding="utf-8"), media_type="text/csv")

    @app.get("/runs/{run_id}/pairs/{account_a}/{account_b}")
    def pair_detail(run_id: str, account_a: str, account_b: str):
        record = state.get_run(run_id)
        a, b = sorted((account_a, account_b))
        suppression = store.suppressions()
        if (suppression.is_suppressed_account(a) or suppression.is_suppressed_account(b)
                or suppression.is_suppressed_pair(a, b)):
            raise ApiError(404, "suppressed", f"pair ({a}, {b}) is suppressed")
        items = [ev for ev in record.evidence if ev.account_a == a and ev.account_b == b]
        if not items:
            raise _not_found(f"no evidence for pair ({a}, {b}) in run {run_id}")
        corpus = state.get_corpus(record.corpus_id)
        comment_ids = sorted({cid for ev in items for cid in ev.comment_ids if cid in corpus.comments})
        sentences_of = {uid: set() for uid in (a, b)}
        for cid in comment_ids:
            c = corpus.comments[cid]
            if c.referee_uid in sentences_of:
                sentences_of[c.referee_uid].update(c.sentences)
        comments_payload = []
        for cid in comment_ids:
            c = corpus.comments[cid]
            other = b if c.referee_uid == a else a
            comments_payload.append({
                "comment_id": c.comment_id,
                "referee_uid": c.referee_uid,
                "article_id": c.article_id,
                "journal_id": c.journal_id,
                "audience": c.audience,
                "submitted_at": c.submitted_at,
                "sentences": [
                    {"text": s, "shared": s in sentences_of.get(other, ())}
                    for s in c.sentences
                ],
            })
        return {
            "account_a": a,
            "account_b": b,
            "scores": [
                {"method": ev.method, "metric": ev.score.metric, "value": ev.score.value,
                 "comment_ids": list(ev.comment_ids)}
                for ev in items
            ],
            "matched_spans": sorted({s for ev in items for s in ev.matched_spans}),
            "comments": comments_payload,
        }

    # -- suppression ----------------------------------------------------------

    @app.get("/suppress")
    def list_suppressions():
        suppressions = store.suppressions()
        return {
            "version": suppressions.version,
            "entries": [e.as_dict() for e in suppressions.active_entries()],
        }

    @app.post("/suppress")
    async def add_suppression(request: Request):
        require_auth(request)
        payload = await request.json()

        def do() -> tuple[int, dict]:
            entity = payload.get("entity", "")
            category = payload.get("category", "")
            reason = payload.get("reason", "")
            with state.suppress_lock:
                suppressions = store.suppressions()
                try:
                    entry = suppressions.suppress(entity, category, reason)
                except ValueError as exc:
                    raise ApiError(400, "bad_request", str(exc)) from None
                store.save_suppressions(suppressions)
            return 201, {"entry_id": entry.entry_id, "version": suppressions.version}

        return idempotent(request, do)

    @app.delete("/suppress/{entry_id}")
    def remove_suppression(entry_id: int, request: Request):
        require_auth(request)

        def do() -> tuple[int, dict]:
            with state.suppress_lock:
                suppressions = store.suppressions()
                try:
                    suppressions.revoke(entry_id)
                except KeyError as exc:
                    raise _not_found(str(exc)) from None
                store.save_suppressions(suppressions)
            return 200, {"revoked": entry_id, "version": suppressions.version}

        return idempotent(request, do)

    # -- de-pseudonymisation ----------------------------------------------------

    @app.post("/unpseudonymise")
    async def unpseudonymise(request: Request):
        require_auth(request)
        payload = await request.json()
        uid = payload.get("uid", "")
        key = payload.get("key", "")
        reason = payload.get("reason", "")
        actor = request.client.host if request.client else ""
        if not reason:
            raise ApiError(400, "bad_request", "a non-empty reason is required")
        if state.pseudonym_map_path is None or not state.pseudonym_map_path.exists():
            raise ApiError(503, "no_pseudonym_map", "no pseudonym map configured")
        with state.pseudonym_lock:
            audit = {"timestamp": time.time(), "actor": actor, "uid": uid, "reason": reason}
            try:
                pmap = PseudonymMap.load(state.pseudonym_map_path, key)
                identity = pmap.reverse(uid, key, reason, actor=actor)
            except PseudonymAccessError:
                audit["outcome"] = "denied"
                store.append_audit(audit)
                raise ApiError(403, "forbidden", "invalid de-pseudonymisation key") from None
            except KeyError:
                audit["outcome"] = "not_found"
                store.append_audit(audit)
                raise _not_found(f"unknown uid {uid!r}") from None
            audit["outcome"] = "granted"
            store.append_audit(audit)
            pmap.save(state.pseudonym_map_path)
        return {"uid": uid, "identity": identity}

    @app.get("/audit")
    def audit_log(limit: int = 100, offset: int = 0):
        return _paginate(store.audit_entries(), limit, offset)

    return app


def serve(
    data_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8570,
    auth_token: str | None = None,
    pseudonym_map_path: str | Path | None = None,
    frontend_dir: str | Path | None = None,
) -> None:
    """Run the service until interrupted.  Fails fast when the store root
    is unusable or the port cannot be bound."""
    import uvicorn

    app = create_app(data_dir, auth_token=auth_token,
                     pseudonym_map_path=pseudonym_map_path, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
