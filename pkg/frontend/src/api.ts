// Typed client for the dupforge HTTP API. Every mutation the UI performs
// maps to exactly one documented endpoint here.

import type {
  AuditEntry,
  EvidenceItem,
  GraphPayload,
  Paginated,
  PairDetail,
  RankEntry,
  RunStatus,
  SuppressionEntry,
} from "./types";

export interface ApiErrorBody {
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class DupforgeClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args)
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (idempotencyKey) headers["Idempotency-Key"] = idempotencyKey;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const parsed = text ? JSON.parse(text) : {};
    if (!response.ok) {
      const errorBody =
        parsed && typeof parsed.code === "string"
          ? (parsed as ApiErrorBody)
          : { code: "error", message: text || response.statusText };
      throw new ApiError(response.status, errorBody);
    }
    return parsed as T;
  }

  private async requestText(path: string): Promise<string> {
    const response = await this.fetchImpl(this.baseUrl + path, { method: "GET" });
    if (!response.ok) throw new ApiError(response.status, { code: "error", message: path });
    return response.text();
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/health");
  }

  listRuns(): Promise<{ runs: string[] }> {
    return this.request("GET", "/runs");
  }

  runStatus(runId: string): Promise<RunStatus> {
    return this.request("GET", `/runs/${runId}`);
  }

  graph(runId: string): Promise<GraphPayload> {
    return this.request("GET", `/runs/${runId}/graph`);
  }

  ranking(runId: string, limit = 50, offset = 0): Promise<Paginated<RankEntry>> {
    return this.request("GET", `/runs/${runId}/ranking?limit=${limit}&offset=${offset}`);
  }

  evidence(
    runId: string,
    opts: { method?: string; minScore?: number; limit?: number; offset?: number } = {}
  ): Promise<Paginated<EvidenceItem>> {
    const params = new URLSearchParams();
    if (opts.method) params.set("method", opts.method);
    if (opts.minScore !== undefined) params.set("min_score", String(opts.minScore));
    params.set("limit", String(opts.limit ?? 100));
    params.set("offset", String(opts.offset ?? 0));
    return this.request("GET", `/runs/${runId}/evidence?${params}`);
  }

  pairDetail(runId: string, a: string, b: string): Promise<PairDetail> {
    return this.request("GET", `/runs/${runId}/pairs/${a}/${b}`);
  }

  report(runId: string, name: string): Promise<string> {
    return this.requestText(`/runs/${runId}/reports/${name}`);
  }

  startRun(corpusId?: string, config?: Record<string, unknown>, idempotencyKey?: string) {
    return this.request<{ run_id: string; queue_position: number }>(
      "POST",
      "/runs",
      { corpus_id: corpusId, config: config ?? {} },
      idempotencyKey
    );
  }

  suppressions(): Promise<{ version: number; entries: SuppressionEntry[] }> {
    return this.request("GET", "/suppress");
  }

  suppress(entity: string, category: string, reason: string, idempotencyKey?: string) {
    return this.request<{ entry_id: number; version: number }>(
      "POST",
      "/suppress",
      { entity, category, reason },
      idempotencyKey
    );
  }

  unsuppress(entryId: number) {
    return this.request<{ revoked: number; version: number }>(
      "DELETE",
      `/suppress/${entryId}`
    );
  }

  unpseudonymise(uid: string, key: string, reason: string) {
    return this.request<{ uid: string; identity: string }>("POST", "/unpseudonymise", {
      uid,
      key,
      reason,
    });
  }

  audit(limit = 100, offset = 0): Promise<Paginated<AuditEntry>> {
    return this.request("GET", `/audit?limit=${limit}&offset=${offset}`);
  }
}
