// Shapes of the service's JSON payloads the UI consumes.

export type AuthorRole = "never_author" | "lead_author" | "co_author";

export interface GraphNode {
  uid: string;
  author_role: AuthorRole;
  dup_count: number;
  component: number;
  pagerank: number;
  rank_position: number;
  flags?: string[];
}

export interface GraphEdge {
  type: "duplication" | "reviewed_for";
  a: string;
  b: string;
  weight: number;
  methods?: string[];
}

export interface GraphPayload {
  nodes: GraphNode[];
  edges: GraphEdge[];
  components: string[][];
  ranking: RankEntry[];
}

export interface RankEntry {
  uid: string;
  pagerank: number;
  position: number;
}

export interface RunStatus {
  run_id: string;
  status: "running" | "complete" | "failed";
  error: string;
  evidence_count?: number;
  corpus_id?: string;
  timings?: Record<string, { index_seconds: number; search_seconds: number; accounts_found: number }>;
}

export interface EvidenceItem {
  account_a: string;
  account_b: string;
  method: string;
  metric: string;
  score: number;
  comment_ids: string[];
  matched_spans: string[];
}

export interface PairSentence {
  text: string;
  shared: boolean;
}

export interface PairComment {
  comment_id: string;
  referee_uid: string;
  article_id: string;
  journal_id: string;
  audience: string;
  submitted_at: string;
  sentences: PairSentence[];
}

export interface PairDetail {
  account_a: string;
  account_b: string;
  scores: { method: string; metric: string; value: number; comment_ids: string[] }[];
  matched_spans: string[];
  comments: PairComment[];
}

export interface SuppressionEntry {
  entry_id: number;
  entity: string;
  category: string;
  reason: string;
  active: boolean;
}

export interface AuditEntry {
  timestamp: number;
  actor: string;
  uid: string;
  reason: string;
  outcome: "granted" | "denied" | "not_found";
}

export interface Paginated<T> {
  total: number;
  limit: number;
  offset: number;
  items: T[];
}

export interface GraphFilters {
  method: string | null; // e.g. "search3"; null keeps every edge
  minScore: number;
  component: number | null;
}
